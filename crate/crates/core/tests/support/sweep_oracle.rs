//! Definition-level error rates: every threshold that can change a count is
//! visited and every count is taken by a full scan. Rates are compared as
//! exact fractions.

#![allow(dead_code)]

use num_rational::Ratio;

pub type Q = Ratio<i128>;

pub fn count_at_or_above(scores: &[f64], t: f64) -> usize {
    scores.iter().filter(|&&s| s >= t).count()
}

pub fn count_below(scores: &[f64], t: f64) -> usize {
    scores.iter().filter(|&&s| s < t).count()
}

/// Exact value of a finite `f64`.
pub fn exact(x: f64) -> Q {
    if x == 0.0 {
        return Q::from_integer(0);
    }
    let bits = x.to_bits();
    let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mant = if exp == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    let e = exp - 1075;
    if e >= 0 {
        Q::from_integer(sign * ((mant as i128) << e))
    } else {
        assert!(-e < 126, "{x} is too small to represent here");
        Q::new(sign * mant as i128, 1i128 << -e)
    }
}

pub fn abs(x: Q) -> Q {
    if x < Q::from_integer(0) {
        -x
    } else {
        x
    }
}

pub fn q(errors: usize, total: usize) -> Q {
    Q::new(errors as i128, total as i128)
}

/// Every threshold at which some count changes, plus one above everything:
/// the distinct pooled scores and +infinity.
pub fn sweep(lists: &[&[f64]]) -> Vec<f64> {
    let mut t: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t.push(f64::INFINITY);
    t
}

/// (APCER errors, BPCER errors) at the equal-error point: minimal
/// `|APCER - BPCER|`, then minimal BPCER, then minimal APCER.
pub fn d_eer(attack: &[f64], bonafide: &[f64]) -> (usize, usize) {
    let mut best: Option<(Q, usize, usize)> = None;
    for t in sweep(&[attack, bonafide]) {
        let ae = count_below(attack, t);
        let be = count_at_or_above(bonafide, t);
        let gap = abs(q(ae, attack.len()) - q(be, bonafide.len()));
        let cand = (gap, be, ae);
        if best.as_ref().is_none_or(|b| cand < *b) {
            best = Some(cand);
        }
    }
    let (_, be, ae) = best.unwrap();
    (ae, be)
}

/// (APCER errors, BPCER errors) at the lowest-BPCER operating point whose
/// APCER does not exceed `target`.
pub fn bpcer_at_apcer(attack: &[f64], bonafide: &[f64], target: f64) -> (usize, usize) {
    let target = exact(target);
    let mut best: Option<(usize, usize)> = None;
    for t in sweep(&[attack, bonafide]) {
        let ae = count_below(attack, t);
        if q(ae, attack.len()) > target {
            continue;
        }
        let be = count_at_or_above(bonafide, t);
        // equal BPCER: keep the higher threshold, i.e. the larger APCER
        if best.is_none_or(|(a, b)| be < b || (be == b && ae > a)) {
            best = Some((ae, be));
        }
    }
    best.unwrap()
}

/// FMR errors at the lowest threshold whose FMR does not exceed `target`.
pub fn fmr_at_target(nonmated: &[f64], target: f64) -> usize {
    let target = exact(target);
    sweep(&[nonmated])
        .into_iter()
        .map(|t| count_at_or_above(nonmated, t))
        .find(|&e| q(e, nonmated.len()) <= target)
        .unwrap()
}
