//! Reference solver for the soft-margin SVM dual
//!
//!   min 1/2 a'Qa - 1'a   s.t.  y'a = 0,  0 <= a <= C,   Q_ij = y_i y_j K(x_i, x_j)
//!
//! Accelerated projected gradient followed by an exact equality-constrained
//! solve on the detected free set. Dense and slow; meant for small problems.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
    /// Largest KKT violation `max_up(-y G) - min_low(-y G)`.
    pub gap: f64,
}

pub fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

pub fn gram(points: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| rbf(&points[i], &points[j], gamma))
}

fn objective(q: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    0.5 * a.dot(&(q * a)) - a.sum()
}

/// Euclidean projection onto `{a : y'a = 0, 0 <= a <= c}`.
fn project(v: &DVector<f64>, y: &[f64], c: f64) -> DVector<f64> {
    let at = |lambda: f64| {
        DVector::from_iterator(
            v.len(),
            v.iter().zip(y).map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c)),
        )
    };
    let g = |lambda: f64| at(lambda).iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>();
    let span = v.amax() + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

fn kkt_gap(q: &DMatrix<f64>, a: &DVector<f64>, y: &[f64], c: f64) -> f64 {
    let g = q * a - DVector::from_element(a.len(), 1.0);
    let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..a.len() {
        let v = -y[i] * g[i];
        let can_up = if y[i] > 0.0 { a[i] < c } else { a[i] > 0.0 };
        let can_low = if y[i] > 0.0 { a[i] > 0.0 } else { a[i] < c };
        if can_up {
            up = up.max(v);
        }
        if can_low {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

/// Re-solves the stationarity conditions exactly with every coordinate
/// outside `[eps, c - eps]` pinned to its bound.
fn polish(q: &DMatrix<f64>, a: &DVector<f64>, y: &[f64], c: f64, eps: f64) -> Option<DVector<f64>> {
    let n = a.len();
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > eps && a[i] < c - eps).collect();
    let mut out = DVector::from_iterator(n, a.iter().map(|&v| if v >= c - eps { c } else { 0.0 }));
    for &i in &free {
        out[i] = 0.0;
    }
    if free.is_empty() {
        return Some(out);
    }
    let k = free.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            m[(r, s)] = q[(i, j)];
        }
        m[(r, k)] = y[i];
        m[(k, r)] = y[i];
        rhs[r] = 1.0
            - (0..n)
                .filter(|j| !free.contains(j))
                .map(|j| q[(i, j)] * out[j])
                .sum::<f64>();
    }
    rhs[k] = -(0..n).filter(|j| !free.contains(j)).map(|j| y[j] * out[j]).sum::<f64>();
    let sol = m.svd(true, true).solve(&rhs, 1e-13).ok()?;
    for (r, &i) in free.iter().enumerate() {
        let v = sol[r];
        if !(-1e-9..=c + 1e-9).contains(&v) {
            return None;
        }
        out[i] = v.clamp(0.0, c);
    }
    Some(out)
}

fn bias(q_k: &DMatrix<f64>, a: &DVector<f64>, y: &[f64], c: f64, eps: f64) -> f64 {
    let n = a.len();
    let r = |i: usize| y[i] - (0..n).map(|j| a[j] * y[j] * q_k[(i, j)]).sum::<f64>();
    let free: Vec<f64> = (0..n).filter(|&i| a[i] > eps && a[i] < c - eps).map(r).collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let at_zero = a[i] <= eps;
        if at_zero == (y[i] > 0.0) {
            lower = lower.max(r(i));
        } else {
            upper = upper.min(r(i));
        }
    }
    0.5 * (lower + upper)
}

pub fn solve(points: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> QpSolution {
    let n = points.len();
    let k = gram(points, gamma);
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let lipschitz = q.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lipschitz;

    let mut a = project(&DVector::zeros(n), y, c);
    let mut z = a.clone();
    let mut t = 1.0f64;
    let ones = DVector::from_element(n, 1.0);
    let mut best = a.clone();
    let mut best_obj = objective(&q, &a);
    for round in 0..100 {
        for _ in 0..500 {
            let grad = &q * &z - &ones;
            let next = project(&(&z - step * grad), y, c);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &next + ((t - 1.0) / t_next) * (&next - &a);
            a = next;
            t = t_next;
        }
        if round == 0 || objective(&q, &a) < best_obj {
            best = a.clone();
            best_obj = objective(&q, &a);
        }
        for eps in [1e-10, 1e-8, 1e-6, 1e-4].map(|e| e * c) {
            if let Some(p) = polish(&q, &a, y, c, eps) {
                let feasible = p.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>().abs() < 1e-9;
                let obj = objective(&q, &p);
                if feasible && obj <= best_obj + 1e-12 && kkt_gap(&q, &p, y, c) <= kkt_gap(&q, &best, y, c) {
                    best = p;
                    best_obj = obj;
                }
            }
        }
        if kkt_gap(&q, &best, y, c) < 1e-10 {
            break;
        }
    }
    let gap = kkt_gap(&q, &best, y, c);
    QpSolution {
        bias: bias(&k, &best, y, c, 1e-9 * c),
        alpha: best.iter().copied().collect(),
        objective: best_obj,
        gap,
    }
}

/// `sum_j a_j y_j K(x_j, x) + b`.
pub fn decision(points: &[Vec<f64>], y: &[f64], sol: &QpSolution, gamma: f64, x: &[f64]) -> f64 {
    points
        .iter()
        .zip(y)
        .zip(&sol.alpha)
        .map(|((p, yi), ai)| ai * yi * rbf(p, x, gamma))
        .sum::<f64>()
        + sol.bias
}
