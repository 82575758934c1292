//! Sequential minimal optimisation for the C-SVC dual
//!
//! ```text
//! min_a  1/2 a^T Q a - e^T a    s.t.  0 <= a_i <= C,  y^T a = 0
//! ```
//!
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Each step optimises the maximal
//! violating pair analytically; the loop stops once the KKT gap
//! `max_{I_up} -y_t G_t - min_{I_low} -y_t G_t` drops below the tolerance.

use log::warn;

use super::kernel::QMatrix;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub c: f64,
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub cache_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Offset added to the kernel expansion (`-rho` in the usual notation).
    pub bias: f64,
    pub objective: f64,
    pub iterations: usize,
    /// KKT gap at termination.
    pub violation: f64,
    pub converged: bool,
}

/// Solves the dual problem for `points` with labels in {-1, +1}.
pub fn solve(points: &[&[f64]], labels: &[f64], params: &SolverParams) -> Result<DualSolution> {
    let n = points.len();
    if n != labels.len() {
        return Err(Error::Training(format!("{n} points but {} labels", labels.len())));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Training("labels must be -1 or +1".into()));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::Training("training data contains a single class".into()));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {}",
            params.gamma
        )));
    }
    if params.tolerance.is_nan() || params.tolerance <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            params.tolerance
        )));
    }

    let c = params.c;
    let y = labels;
    let mut q = QMatrix::new(points, labels, params.gamma, params.cache_bytes);
    let mut alpha = vec![0.0; n];
    // gradient of the objective: Q a - e
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, y: f64| if y > 0.0 { a < c } else { a > 0.0 };
    let in_low = |a: f64, y: f64| if y > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let mut violation;
    let mut converged = false;
    loop {
        // maximal violating pair
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v >= g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v <= g_min {
                g_min = v;
                j = t;
            }
        }
        violation = g_max - g_min;
        if i == usize::MAX || j == usize::MAX || violation < params.tolerance {
            converged = true;
            break;
        }
        if iterations >= params.max_iterations {
            break;
        }
        iterations += 1;

        let qi = q.column(i);
        let qj = q.column(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if y[i] != y[j] {
            let mut quad = q.diag(i) + q.diag(j) + 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q.diag(i) + q.diag(j) - 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += qi[k] * di + qj[k] * dj;
        }
    }

    if !converged {
        warn!(
            "SMO stopped after {iterations} iterations with KKT gap {violation:.3e} (tolerance {:.1e})",
            params.tolerance
        );
    }

    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    let bias = -rho(&alpha, &grad, y, c);
    Ok(DualSolution {
        alpha,
        bias,
        objective,
        iterations,
        violation,
        converged,
    })
}

/// Offset from free vectors, or the midpoint of the feasible interval when
/// every multiplier sits at a bound.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for ((&a, &g), &yi) in alpha.iter().zip(grad).zip(y) {
        let yg = yi * g;
        if a >= c {
            if yi < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if a <= 0.0 {
            if yi > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (upper + lower) / 2.0
    }
}
