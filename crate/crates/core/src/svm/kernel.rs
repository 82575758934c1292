use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use crate::error::{Error, Result};

/// `exp(-gamma * |x - y|^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(rbf_unchecked(x, y, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Columns of the label-signed kernel matrix `Q[i][j] = y_i y_j K(x_i, x_j)`,
/// computed on demand and kept in an LRU cache bounded by a byte budget.
pub(crate) struct QMatrix<'a> {
    points: &'a [&'a [f64]],
    labels: &'a [f64],
    gamma: f64,
    max_columns: usize,
    columns: HashMap<usize, (Rc<[f64]>, u64)>,
    recency: BTreeMap<u64, usize>,
    clock: u64,
}

impl<'a> QMatrix<'a> {
    pub fn new(points: &'a [&'a [f64]], labels: &'a [f64], gamma: f64, cache_bytes: usize) -> Self {
        let column_bytes = (points.len() * std::mem::size_of::<f64>()).max(1);
        // Two columns are live per SMO step, so never go below that.
        let max_columns = (cache_bytes / column_bytes).max(2);
        QMatrix {
            points,
            labels,
            gamma,
            max_columns,
            columns: HashMap::new(),
            recency: BTreeMap::new(),
            clock: 0,
        }
    }

    /// Diagonal entry; `K(x, x) = 1` for the RBF kernel.
    pub fn diag(&self, _i: usize) -> f64 {
        1.0
    }

    pub fn column(&mut self, i: usize) -> Rc<[f64]> {
        self.clock += 1;
        let now = self.clock;
        if let Some((col, stamp)) = self.columns.get_mut(&i) {
            self.recency.remove(stamp);
            *stamp = now;
            self.recency.insert(now, i);
            return Rc::clone(col);
        }
        if self.columns.len() >= self.max_columns {
            if let Some((_, victim)) = self.recency.pop_first() {
                self.columns.remove(&victim);
            }
        }
        let xi = self.points[i];
        let yi = self.labels[i];
        let col: Rc<[f64]> = self
            .points
            .iter()
            .zip(self.labels)
            .map(|(xj, yj)| yi * yj * rbf_unchecked(xi, xj, self.gamma))
            .collect();
        self.columns.insert(i, (Rc::clone(&col), now));
        self.recency.insert(now, i);
        col
    }
}
