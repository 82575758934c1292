//! Sigmoid calibration of decision values, `P(doppelganger | f) = 1 / (1 + exp(A f + B))`,
//! fitted by regularised maximum likelihood (Newton's method with backtracking,
//! targets smoothed by the class priors).

/// Steepest slope accepted as "not increasing"; fits that come out with
/// `A >= -MIN_SLOPE` fall back to a prior-only sigmoid with this slope.
pub const MIN_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Default for Sigmoid {
    fn default() -> Self {
        Sigmoid { a: -1.0, b: 0.0 }
    }
}

impl Sigmoid {
    /// Numerically stable evaluation.
    pub fn apply(&self, decision: f64) -> f64 {
        let fab = decision * self.a + self.b;
        if fab >= 0.0 {
            let e = (-fab).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + fab.exp())
        }
    }
}

fn objective(dec: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    dec.iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let fab = f * a + b;
            if fab >= 0.0 {
                t * fab + (-fab).exp().ln_1p()
            } else {
                (t - 1.0) * fab + fab.exp().ln_1p()
            }
        })
        .sum()
}

/// Fits the sigmoid to decision values; `positive[i]` marks the doppelganger class.
/// Returns the fit and whether the fallback was used.
pub fn fit(dec: &[f64], positive: &[bool]) -> (Sigmoid, bool) {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;

    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let prior_b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut a = 0.0;
    let mut b = prior_b;
    let mut fval = objective(dec, &targets, a, b);

    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (SIGMA, SIGMA, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&f, &t) in dec.iter().zip(&targets) {
            let fab = f * a + b;
            let (p, q) = if fab >= 0.0 {
                let e = (-fab).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = fab.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(dec, &targets, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }

    if a < -MIN_SLOPE && a.is_finite() && b.is_finite() {
        (Sigmoid { a, b }, false)
    } else {
        (
            Sigmoid {
                a: -MIN_SLOPE,
                b: prior_b,
            },
            true,
        )
    }
}
