//! Empirical verification and attack-detection error rates.
//!
//! Conventions:
//! * a comparison is a match, and a detection score is classified as an
//!   attack, when `score >= threshold`;
//! * detection scores follow the detector convention, 1 = doppelganger
//!   (attack), 0 = mated (bona fide);
//! * rates are exact step functions of the threshold, kept as integer
//!   fractions ([`Rate`]) so they can be compared without rounding;
//! * operating points are searched over every observed score, every midpoint
//!   between consecutive distinct scores, and one threshold just above the
//!   largest score. That set reaches every achievable operating point.

use std::fmt::{self, Write as _};

use log::warn;

use crate::error::{Error, Result};

/// `errors / total`, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    pub errors: usize,
    pub total: usize,
}

impl Rate {
    pub fn new(errors: usize, total: usize) -> Self {
        debug_assert!(errors <= total && total > 0);
        Rate { errors, total }
    }

    pub fn value(self) -> f64 {
        self.errors as f64 / self.total as f64
    }

    pub fn at_most(self, target: f64) -> bool {
        self.value() <= target
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}%", 100.0 * self.value())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub criterion: String,
}

impl Threshold {
    pub fn new(value: f64, criterion: impl Into<String>) -> Self {
        Threshold {
            value,
            criterion: criterion.into(),
        }
    }
}

/// Ascending copy of a score list.
#[derive(Debug, Clone)]
struct Sorted(Vec<f64>);

impl Sorted {
    fn new(scores: &[f64], what: &'static str) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyScores(what));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite {what} score")));
        }
        let mut v = scores.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(Sorted(v))
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn below(&self, t: f64) -> usize {
        self.0.partition_point(|&s| s < t)
    }

    fn at_or_above(&self, t: f64) -> usize {
        self.len() - self.below(t)
    }

    fn max(&self) -> f64 {
        *self.0.last().expect("non-empty")
    }
}

/// Smallest `f64` strictly greater than `x`.
pub fn just_above(x: f64) -> f64 {
    x.next_up()
}

/// Observed values, midpoints between consecutive distinct values, and one
/// threshold just above the maximum, ascending and distinct.
pub fn candidate_thresholds(lists: &[&[f64]]) -> Vec<f64> {
    let mut pooled: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let Some(&max) = pooled.last() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(2 * pooled.len());
    for w in pooled.windows(2) {
        out.push(w[0]);
        let mid = w[0] + (w[1] - w[0]) / 2.0;
        if mid > w[0] && mid < w[1] {
            out.push(mid);
        }
    }
    out.push(max);
    out.push(just_above(max));
    out
}

/// False match rate: share of nonmated scores `>= t`.
pub fn fmr(nonmated: &[f64], t: f64) -> Result<Rate> {
    let s = Sorted::new(nonmated, "nonmated")?;
    Ok(Rate::new(s.at_or_above(t), s.len()))
}

/// False non-match rate: share of mated scores `< t`.
pub fn fnmr(mated: &[f64], t: f64) -> Result<Rate> {
    let s = Sorted::new(mated, "mated")?;
    Ok(Rate::new(s.below(t), s.len()))
}

/// Impostor attack presentation match rate: share of attack similarity
/// scores `>= t`.
pub fn iapmr(attack: &[f64], t: f64) -> Result<Rate> {
    let s = Sorted::new(attack, "attack")?;
    Ok(Rate::new(s.at_or_above(t), s.len()))
}

/// Share of attack detection scores `< t` (attacks passed as bona fide).
pub fn apcer(attack: &[f64], t: f64) -> Result<Rate> {
    let s = Sorted::new(attack, "attack")?;
    Ok(Rate::new(s.below(t), s.len()))
}

/// Share of bona fide detection scores `>= t` (flagged as attacks).
pub fn bpcer(bonafide: &[f64], t: f64) -> Result<Rate> {
    let s = Sorted::new(bonafide, "bona fide")?;
    Ok(Rate::new(s.at_or_above(t), s.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmrThreshold {
    pub threshold: Threshold,
    pub achieved: Rate,
    /// False when the list is too short to resolve the target
    /// (fewer than `1 / target` scores); the threshold then sits above the
    /// largest score.
    pub reachable: bool,
}

/// Smallest threshold whose FMR does not exceed `target_fmr`.
pub fn threshold_at_fmr(nonmated: &[f64], target_fmr: f64) -> Result<FmrThreshold> {
    if !(target_fmr > 0.0 && target_fmr < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target FMR must lie in (0, 1), got {target_fmr}"
        )));
    }
    let s = Sorted::new(nonmated, "nonmated")?;
    let n = s.len();
    let criterion = format!("FMR={}%", 100.0 * target_fmr);
    let reachable = n as f64 * target_fmr >= 1.0;
    if !reachable {
        warn!("{n} nonmated scores cannot resolve FMR {target_fmr}; threshold placed above the maximum score");
    }
    let t = candidate_thresholds(&[&s.0])
        .into_iter()
        .find(|&t| Rate::new(s.at_or_above(t), n).at_most(target_fmr))
        .expect("the threshold above the maximum has FMR 0");
    Ok(FmrThreshold {
        threshold: Threshold::new(t, criterion),
        achieved: Rate::new(s.at_or_above(t), n),
        reachable,
    })
}

/// Detection operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub threshold: Threshold,
    pub apcer: Rate,
    pub bpcer: Rate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualErrorRate {
    /// Mean of APCER and BPCER at the selected threshold.
    pub rate: f64,
    pub point: OperatingPoint,
}

/// Detection equal error rate: the candidate threshold minimising
/// `|APCER - BPCER|` (ties: lower BPCER, then lower APCER), reported as the
/// mean of the two rates there.
pub fn d_eer(attack: &[f64], bonafide: &[f64]) -> Result<EqualErrorRate> {
    let a = Sorted::new(attack, "attack")?;
    let b = Sorted::new(bonafide, "bona fide")?;
    let (n, m) = (a.len() as u128, b.len() as u128);
    let mut best: Option<(u128, usize, usize, f64)> = None;
    for t in candidate_thresholds(&[&a.0, &b.0]) {
        let ae = a.below(t);
        let be = b.at_or_above(t);
        // |ae/n - be/m| scaled by n*m
        let gap = (ae as u128 * m).abs_diff(be as u128 * n);
        let better = match best {
            None => true,
            Some((g, bb, ba, _)) => (gap, be, ae) < (g, bb, ba),
        };
        if better {
            best = Some((gap, be, ae, t));
        }
    }
    let (_, be, ae, t) = best.expect("candidate set is non-empty");
    let apcer = Rate::new(ae, a.len());
    let bpcer = Rate::new(be, b.len());
    Ok(EqualErrorRate {
        rate: (apcer.value() + bpcer.value()) / 2.0,
        point: OperatingPoint {
            threshold: Threshold::new(t, "D-EER"),
            apcer,
            bpcer,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpcerAtApcer {
    pub point: OperatingPoint,
    /// Fewer attack scores than `1 / target`: APCER cannot be resolved at the
    /// requested granularity.
    pub resolution_limited: bool,
}

/// BPCER at the operating point with APCER no larger than `apcer_target`
/// and, among those, the lowest BPCER (i.e. the highest such threshold).
/// `apcer_target` = 0.1 gives BPCER10, 0.05 gives BPCER20.
pub fn bpcer_at_apcer(attack: &[f64], bonafide: &[f64], apcer_target: f64) -> Result<BpcerAtApcer> {
    if !(apcer_target > 0.0 && apcer_target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "APCER target must lie in (0, 1), got {apcer_target}"
        )));
    }
    let a = Sorted::new(attack, "attack")?;
    let b = Sorted::new(bonafide, "bona fide")?;
    let resolution_limited = (a.len() as f64) * apcer_target < 1.0;
    if resolution_limited {
        warn!(
            "{} attack scores cannot resolve APCER {apcer_target}; reporting the APCER = 0 operating point",
            a.len()
        );
    }
    let t = candidate_thresholds(&[&a.0, &b.0])
        .into_iter()
        .rev()
        .find(|&t| Rate::new(a.below(t), a.len()).at_most(apcer_target))
        .expect("the smallest candidate has APCER 0");
    let criterion = format!("APCER={}%", 100.0 * apcer_target);
    Ok(BpcerAtApcer {
        point: OperatingPoint {
            threshold: Threshold::new(t, criterion),
            apcer: Rate::new(a.below(t), a.len()),
            bpcer: Rate::new(b.at_or_above(t), b.len()),
        },
        resolution_limited,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetAxes {
    /// (APCER, BPCER) of detection scores.
    Detection,
    /// (FMR, FNMR) of similarity scores.
    Verification,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    /// APCER or FMR.
    pub rate1: f64,
    /// BPCER or FNMR.
    pub rate2: f64,
}

/// Error trade-off curve, ordered by strictly increasing threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub axes: DetAxes,
    pub points: Vec<DetPoint>,
}

impl DetCurve {
    pub fn column_names(&self) -> (&'static str, &'static str) {
        match self.axes {
            DetAxes::Detection => ("apcer", "bpcer"),
            DetAxes::Verification => ("fmr", "fnmr"),
        }
    }

    /// Thresholds strictly increase; the two rates move in opposite
    /// directions (APCER and FNMR rise with the threshold, BPCER and FMR
    /// fall); every rate lies in `[0, 1]`.
    pub fn is_well_formed(&self) -> bool {
        let in_range = self
            .points
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.rate1) && (0.0..=1.0).contains(&p.rate2) && p.threshold.is_finite());
        let ordered = self.points.windows(2).all(|w| {
            let (p, q) = (w[0], w[1]);
            let rates = match self.axes {
                DetAxes::Detection => q.rate1 >= p.rate1 && q.rate2 <= p.rate2,
                DetAxes::Verification => q.rate1 <= p.rate1 && q.rate2 >= p.rate2,
            };
            q.threshold > p.threshold && rates
        });
        in_range && ordered
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let (r1, r2) = self.column_names();
        writeln!(w, "threshold,{r1},{r2}")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.threshold, p.rate1, p.rate2)?;
        }
        Ok(())
    }
}

fn step_thresholds(a: &Sorted, b: &Sorted) -> Vec<f64> {
    let mut t: Vec<f64> = a.0.iter().chain(&b.0).copied().collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let top = just_above(a.max().max(b.max()));
    t.push(top);
    t
}

/// Keeps `n_points` evenly spaced points including both endpoints;
/// `n_points == 0` keeps everything.
fn subsample(points: Vec<DetPoint>, n_points: usize) -> Vec<DetPoint> {
    if n_points == 0 || points.len() <= n_points {
        return points;
    }
    if n_points == 1 {
        return vec![points[0]];
    }
    let last = points.len() - 1;
    let mut idx: Vec<usize> = (0..n_points)
        .map(|i| ((i as f64) * last as f64 / (n_points - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx.into_iter().map(|i| points[i]).collect()
}

/// APCER/BPCER at every distinct observed score plus one threshold above the
/// maximum.
pub fn det_curve(attack: &[f64], bonafide: &[f64], n_points: usize) -> Result<DetCurve> {
    let a = Sorted::new(attack, "attack")?;
    let b = Sorted::new(bonafide, "bona fide")?;
    let points = step_thresholds(&a, &b)
        .into_iter()
        .map(|t| DetPoint {
            threshold: t,
            rate1: Rate::new(a.below(t), a.len()).value(),
            rate2: Rate::new(b.at_or_above(t), b.len()).value(),
        })
        .collect();
    Ok(DetCurve {
        axes: DetAxes::Detection,
        points: subsample(points, n_points),
    })
}

/// FMR/FNMR trade-off of similarity scores.
pub fn verification_det_curve(mated: &[f64], nonmated: &[f64], n_points: usize) -> Result<DetCurve> {
    let g = Sorted::new(mated, "mated")?;
    let i = Sorted::new(nonmated, "nonmated")?;
    let points = step_thresholds(&g, &i)
        .into_iter()
        .map(|t| DetPoint {
            threshold: t,
            rate1: Rate::new(i.at_or_above(t), i.len()).value(),
            rate2: Rate::new(g.below(t), g.len()).value(),
        })
        .collect();
    Ok(DetCurve {
        axes: DetAxes::Verification,
        points: subsample(points, n_points),
    })
}

/// D-EER with BPCER at APCER 10% and 5%.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSummary {
    pub d_eer: EqualErrorRate,
    pub bpcer10: BpcerAtApcer,
    pub bpcer20: BpcerAtApcer,
}

pub fn detection_summary(attack: &[f64], bonafide: &[f64]) -> Result<DetectionSummary> {
    Ok(DetectionSummary {
        d_eer: d_eer(attack, bonafide)?,
        bpcer10: bpcer_at_apcer(attack, bonafide, 0.10)?,
        bpcer20: bpcer_at_apcer(attack, bonafide, 0.05)?,
    })
}

/// FMR targets of the vulnerability table.
pub const VULNERABILITY_FMRS: [f64; 3] = [0.01, 0.001, 0.0001];

/// FNMR and IAPMR at a threshold fixed by a target FMR.
#[derive(Debug, Clone, PartialEq)]
pub struct VulnerabilityRow {
    pub target_fmr: f64,
    pub threshold: FmrThreshold,
    pub fnmr: Rate,
    pub iapmr: Option<Rate>,
}

pub fn vulnerability_table(
    mated: &[f64],
    nonmated: &[f64],
    attack: &[f64],
    targets: &[f64],
) -> Result<Vec<VulnerabilityRow>> {
    targets
        .iter()
        .map(|&target| {
            let th = threshold_at_fmr(nonmated, target)?;
            let t = th.threshold.value;
            Ok(VulnerabilityRow {
                target_fmr: target,
                fnmr: fnmr(mated, t)?,
                iapmr: if attack.is_empty() {
                    None
                } else {
                    Some(iapmr(attack, t)?)
                },
                threshold: th,
            })
        })
        .collect()
}

/// Log-log DET plot of one or more curves as a standalone SVG document.
pub fn render_det_svg(curves: &[(&str, &DetCurve)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    const MIN_RATE: f64 = 1e-4;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let (lo, hi) = (MIN_RATE.log10(), 0.0);
    let x = |r: f64| PAD + (r.max(MIN_RATE).log10() - lo) / (hi - lo) * (W - 2.0 * PAD);
    let y = |r: f64| H - PAD - (r.max(MIN_RATE).log10() - lo) / (hi - lo) * (H - 2.0 * PAD);

    let (xl, yl) = curves
        .first()
        .map(|(_, c)| match c.axes {
            DetAxes::Detection => ("APCER", "BPCER"),
            DetAxes::Verification => ("FMR", "FNMR"),
        })
        .unwrap_or(("APCER", "BPCER"));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for (e, label) in [
        (1e-4, "0.01%"),
        (1e-3, "0.1%"),
        (1e-2, "1%"),
        (1e-1, "10%"),
        (1.0, "100%"),
    ] {
        let (px, py) = (x(e), y(e));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{label}</text>"##,
            PAD,
            H - PAD,
            H - PAD + 16.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            PAD,
            W - PAD,
            PAD - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xl}</text><text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">{yl}</text>"#,
        W / 2.0,
        H - 20.0,
        H / 2.0,
        H / 2.0
    );
    for (k, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.rate1), y(p.rate2)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = PAD + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{name}</text>"#,
            W - PAD - 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
