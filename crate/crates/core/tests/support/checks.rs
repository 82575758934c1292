//! Per-case checks shared by the oracle suites and the acceptance run.
//! Expects `qp_oracle`, `sweep_oracle` and `morph_cases` at the crate root.

#![allow(dead_code)]

use lookalike_core::morphgen::{generate_doppelganger_pair, interpolate_landmarks};
use lookalike_core::svm::smo::{self, SolverParams};
use lookalike_core::svm::{self, Gamma};
use lookalike_core::{metrics, Class, DifferenceVector, MorphParams, Point, SvmConfig};
use num_rational::Ratio;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::morph_cases::{self, Case};
use crate::qp_oracle;
use crate::sweep_oracle::{self, count_at_or_above, count_below, exact, q};

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

pub struct Problem {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub c: f64,
    pub gamma: f64,
}

pub fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let n = rng.random_range(2..=30);
    let dim = rng.random_range(1..=4);
    let mut labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    let shift = rng.random_range(0.0..1.5);
    let points = labels
        .iter()
        .map(|&y| {
            (0..dim)
                .map(|_| rng.random_range(-1.0..1.0) + 0.5 * y * shift)
                .collect()
        })
        .collect();
    Problem {
        points,
        labels,
        c: [0.1, 1.0, 10.0][rng.random_range(0..3)],
        gamma: [0.5, 1.0, 2.0, 1.0 / dim as f64][rng.random_range(0..4)],
    }
}

pub const ORACLE_TOLERANCE: f64 = 1e-8;

/// SMO objective within 1e-6 of the reference QP and identical decision
/// signs on the training points.
pub fn check_svm(p: &Problem) -> Result<(), String> {
    let refs: Vec<&[f64]> = p.points.iter().map(Vec::as_slice).collect();
    let params = SolverParams {
        c: p.c,
        gamma: p.gamma,
        tolerance: ORACLE_TOLERANCE,
        max_iterations: 10_000_000,
        cache_bytes: 1 << 20,
    };
    let sol = smo::solve(&refs, &p.labels, &params).map_err(|e| e.to_string())?;
    let oracle = qp_oracle::solve(&p.points, &p.labels, p.c, p.gamma);
    ensure!(
        (sol.objective - oracle.objective).abs() <= 1e-6,
        "objective: smo {} oracle {} (oracle gap {})",
        sol.objective,
        oracle.objective,
        oracle.gap
    );

    let features: Vec<DifferenceVector> = p
        .points
        .iter()
        .zip(&p.labels)
        .enumerate()
        .map(|(i, (x, &y))| DifferenceVector {
            values: x.clone(),
            reference_id: format!("r{i}"),
            probe_id: format!("p{i}"),
            label: Some(if y > 0.0 { Class::Doppelganger } else { Class::Mated }),
        })
        .collect();
    let config = SvmConfig {
        c: p.c,
        gamma: Gamma::Value(p.gamma),
        tolerance: ORACLE_TOLERANCE,
        ..SvmConfig::default()
    };
    let model = svm::train(&features, &config).map_err(|e| e.to_string())?;
    for x in &p.points {
        let got = model.decision_value(x).map_err(|e| e.to_string())?;
        let want = qp_oracle::decision(&p.points, &p.labels, &oracle, p.gamma, x);
        ensure!((got > 0.0) == (want > 0.0), "decision {got} vs oracle {want} at {x:?}");
    }
    Ok(())
}

/// Scores on a coarse grid (many ties) or continuous.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
    let grid = rng.random_bool(0.5);
    let levels = rng.random_range(2..40) as f64;
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(0.0..1.0) + shift;
            if grid {
                (x * levels).round() / levels
            } else {
                x
            }
        })
        .collect()
}

/// `(high, low)` score lists with at most 1000 scores in total.
pub fn random_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let total = rng.random_range(2..=1000);
    let n = rng.random_range(1..total);
    let shift = rng.random_range(-0.5..1.0);
    (random_scores(rng, n, shift), random_scores(rng, total - n, 0.0))
}

/// Every rate and operating point against the exhaustive sweep.
pub fn check_metrics(high: &[f64], low: &[f64], rng: &mut ChaCha8Rng) -> Result<(), String> {
    let err = |e: lookalike_core::Error| e.to_string();
    let probes: Vec<f64> = high.iter().chain(low).copied().take(5).chain([f64::MIN, 2.0]).collect();
    for &t in &probes {
        let r = metrics::fmr(low, t).map_err(err)?;
        ensure!(
            (r.errors, r.total) == (count_at_or_above(low, t), low.len()),
            "fmr at {t}"
        );
        let r = metrics::fnmr(high, t).map_err(err)?;
        ensure!((r.errors, r.total) == (count_below(high, t), high.len()), "fnmr at {t}");
        let r = metrics::iapmr(high, t).map_err(err)?;
        ensure!(r.errors == count_at_or_above(high, t), "iapmr at {t}");
        let r = metrics::apcer(high, t).map_err(err)?;
        ensure!(r.errors == count_below(high, t), "apcer at {t}");
        let r = metrics::bpcer(low, t).map_err(err)?;
        ensure!(r.errors == count_at_or_above(low, t), "bpcer at {t}");
    }

    let e = metrics::d_eer(high, low).map_err(err)?;
    let (ae, be) = sweep_oracle::d_eer(high, low);
    ensure!((e.point.apcer.errors, e.point.bpcer.errors) == (ae, be), "D-EER counts");
    let t = e.point.threshold.value;
    ensure!(
        (count_below(high, t), count_at_or_above(low, t)) == (ae, be),
        "D-EER threshold"
    );
    let mean = (q(ae, high.len()) + q(be, low.len())) / 2;
    ensure!(sweep_oracle::abs(exact(e.rate) - mean) <= exact(1e-15), "D-EER value");

    for target in [0.1, 0.05, rng.random_range(0.01..0.99)] {
        let b = metrics::bpcer_at_apcer(high, low, target).map_err(err)?;
        let (ae, be) = sweep_oracle::bpcer_at_apcer(high, low, target);
        ensure!(
            (b.point.apcer.errors, b.point.bpcer.errors) == (ae, be),
            "BPCER at APCER {target}"
        );
        let t = b.point.threshold.value;
        ensure!(
            (count_below(high, t), count_at_or_above(low, t)) == (ae, be),
            "BPCER at APCER {target} threshold"
        );

        let f = metrics::threshold_at_fmr(low, target).map_err(err)?;
        let fe = sweep_oracle::fmr_at_target(low, target);
        ensure!(f.achieved.errors == fe, "FMR target {target}");
        ensure!(
            count_at_or_above(low, f.threshold.value) == fe,
            "FMR target {target} threshold"
        );
    }
    Ok(())
}

pub fn random_params(rng: &mut ChaCha8Rng) -> MorphParams {
    MorphParams {
        warp_weight: rng.random_range(0.0..=1.0),
        blend_alpha: rng.random_range(0.0..=1.0),
        feather_radius: if rng.random_bool(0.5) {
            Some(rng.random_range(0..6))
        } else {
            None
        },
    }
}

fn morph(c: &Case, self_morph: bool, p: &MorphParams) -> Result<lookalike_core::MorphResult, String> {
    let (s, sl) = if self_morph {
        (&c.target, &c.target_lmk)
    } else {
        (&c.source, &c.source_lmk)
    };
    generate_doppelganger_pair(&c.target, &c.target_lmk, s, sl, p).map_err(|e| e.to_string())
}

pub fn check_self_morph(c: &Case, p: &MorphParams) -> Result<(), String> {
    ensure!(
        morph(c, true, p)?.image == c.target,
        "self-morph differs from target with {p:?}"
    );
    Ok(())
}

pub fn check_zero_identity(c: &Case, feather: u32) -> Result<(), String> {
    let p = MorphParams {
        warp_weight: 0.0,
        blend_alpha: 0.0,
        feather_radius: Some(feather),
    };
    ensure!(
        morph(c, false, &p)?.image == c.target,
        "(0, 0) morph differs from target"
    );
    Ok(())
}

/// Pixels clearly outside the morphed landmarks' hull keep the target's value.
pub fn check_outer_retention(c: &Case, p: &MorphParams) -> Result<(), String> {
    let p = MorphParams {
        feather_radius: Some(0),
        ..*p
    };
    let r = morph(c, false, &p)?;
    let hull = morph_cases::hull(&r.landmarks.points);
    let (w, h) = c.target.dimensions();
    for y in 0..h {
        for x in 0..w {
            if morph_cases::clearly_outside(&hull, Point::new(x as f64, y as f64), 1e-9) {
                ensure!(
                    r.image.pixel(x, y) == c.target.pixel(x, y),
                    "pixel ({x}, {y}) changed with {p:?}"
                );
            }
        }
    }
    Ok(())
}

fn dyadic(x: f64) -> Result<Ratio<i64>, String> {
    let scaled = x * 1024.0;
    ensure!(scaled.fract() == 0.0, "{x} is not a multiple of 1/1024");
    Ok(Ratio::new(scaled as i64, 1024))
}

/// Interpolated landmarks equal `(1 - w) a + w b` in exact arithmetic for
/// `w = k / 16`.
pub fn check_interpolation(c: &Case, k: i64) -> Result<(), String> {
    let w = k as f64 / 16.0;
    let wq = Ratio::new(k, 16);
    let one = Ratio::from_integer(1);
    let out = interpolate_landmarks(&c.target_lmk, &c.source_lmk, w).map_err(|e| e.to_string())?;
    for ((t, s), o) in c.target_lmk.points.iter().zip(&c.source_lmk.points).zip(&out.points) {
        ensure!(
            dyadic(o.x)? == (one - wq) * dyadic(t.x)? + wq * dyadic(s.x)?,
            "x of {o:?} at w={w}"
        );
        ensure!(
            dyadic(o.y)? == (one - wq) * dyadic(t.y)? + wq * dyadic(s.y)?,
            "y of {o:?} at w={w}"
        );
    }
    Ok(())
}
