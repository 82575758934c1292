//! RBF support vector machine for mated-vs-doppelganger classification.
//!
//! Doppelganger features are the positive class, so larger decision values
//! mean "more likely a doppelganger" and the calibrated score maps them into
//! `[0, 1]` with 0 = mated and 1 = doppelganger.

mod io;
mod kernel;
pub mod platt;
pub mod smo;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use self::io::{load_model, parse_model, save_model, write_model, MODEL_MAGIC};
pub use self::kernel::rbf_kernel;
pub use self::platt::Sigmoid;
pub use self::smo::{DualSolution, SolverParams};

use crate::error::{Error, Result};
use crate::features::{Class, DifferenceVector, FeatureConfig};

/// RBF width. `Auto` resolves to `1 / dimension`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma {
    #[default]
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, dim: usize) -> f64 {
        match self {
            Gamma::Auto => 1.0 / dim.max(1) as f64,
            Gamma::Value(g) => g,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Auto => f.write_str("auto"),
            Gamma::Value(g) => write!(f, "{g}"),
        }
    }
}

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Gamma::Auto);
        }
        match s.parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(Gamma::Value(g)),
            _ => Err(format!("gamma must be `auto` or a positive number, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: Gamma,
    /// KKT gap at which SMO stops.
    pub tolerance: f64,
    /// SMO iteration cap, in multiples of the training-set size.
    pub max_passes: usize,
    /// Seeds the stratified calibration split.
    pub seed: u64,
    pub cache_bytes: usize,
    /// Share of training pairs held out for the sigmoid fit.
    pub calibration_fraction: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            gamma: Gamma::Auto,
            tolerance: 1e-3,
            max_passes: 10_000,
            seed: 0,
            cache_bytes: 256 << 20,
            calibration_fraction: 0.2,
        }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("gamma must be positive, got {g}")));
            }
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidParameter("max_passes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.calibration_fraction) {
            return Err(Error::InvalidParameter(
                "calibration fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Trained detector. Immutable; evaluation is safe from any thread.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub dim: usize,
    pub gamma: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub calibration: Sigmoid,
    pub feature_config: FeatureConfig,
}

impl SvmModel {
    pub fn n_support(&self) -> usize {
        self.support_vectors.len()
    }

    pub fn decision_value(&self, feature: &[f64]) -> Result<f64> {
        if feature.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: feature.len(),
            });
        }
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * kernel::rbf_unchecked(sv, feature, self.gamma))
            .sum();
        Ok(sum + self.bias)
    }

    /// Calibrated detection score in `[0, 1]`.
    pub fn score(&self, feature: &[f64]) -> Result<f64> {
        self.decision_value(feature).map(|f| self.calibration.apply(f))
    }

    /// Scores many features in parallel; output order matches input order.
    pub fn score_batch(&self, features: &[DifferenceVector]) -> Result<Vec<f64>> {
        features.par_iter().map(|f| self.score(&f.values)).collect()
    }

    pub fn with_calibration(mut self, calibration: Sigmoid) -> Self {
        self.calibration = calibration;
        self
    }
}

/// Feature rows, their +1/-1 labels and the shared dimension.
type Labelled<'a> = (Vec<&'a [f64]>, Vec<f64>, usize);

fn labelled(features: &[DifferenceVector]) -> Result<Labelled<'_>> {
    let dim = features
        .first()
        .map(DifferenceVector::dim)
        .ok_or_else(|| Error::Training("no training features".into()))?;
    let mut points = Vec::with_capacity(features.len());
    let mut labels = Vec::with_capacity(features.len());
    for f in features {
        if f.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: f.dim(),
            });
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite feature for pair {}/{}",
                f.reference_id, f.probe_id
            )));
        }
        let class = f
            .label
            .ok_or_else(|| Error::Training(format!("unlabelled feature for pair {}/{}", f.reference_id, f.probe_id)))?;
        points.push(f.values.as_slice());
        labels.push(class.sign());
    }
    Ok((points, labels, dim))
}

/// Fits the SVM on every given feature. The returned model carries the
/// default sigmoid (`A = -1, B = 0`) and `FeatureConfig::default()`.
pub fn train(features: &[DifferenceVector], config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    let (points, labels, dim) = labelled(features)?;
    let gamma = config.gamma.resolve(dim);
    let params = SolverParams {
        c: config.c,
        gamma,
        tolerance: config.tolerance,
        max_iterations: config.max_passes.saturating_mul(points.len()),
        cache_bytes: config.cache_bytes,
    };
    let sol = smo::solve(&points, &labels, &params)?;
    info!(
        "SMO finished: {} iterations, KKT gap {:.2e}, objective {:.6}",
        sol.iterations, sol.violation, sol.objective
    );

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for ((&a, &y), &x) in sol.alpha.iter().zip(&labels).zip(&points) {
        if a > 0.0 {
            support_vectors.push(x.to_vec());
            dual_coefs.push(a * y);
        }
    }
    Ok(SvmModel {
        dim,
        gamma,
        bias: sol.bias,
        support_vectors,
        dual_coefs,
        calibration: Sigmoid::default(),
        feature_config: FeatureConfig::default(),
    })
}

/// Fits the score sigmoid on held-out labelled features.
pub fn calibrate(model: &SvmModel, held_out: &[DifferenceVector]) -> Result<SvmModel> {
    let mut dec = Vec::with_capacity(held_out.len());
    let mut positive = Vec::with_capacity(held_out.len());
    for f in held_out {
        let class = f
            .label
            .ok_or_else(|| Error::Calibration("unlabelled held-out feature".into()))?;
        dec.push(model.decision_value(&f.values)?);
        positive.push(class == Class::Doppelganger);
    }
    if !positive.contains(&true) || !positive.contains(&false) {
        return Err(Error::Calibration("held-out set contains a single class".into()));
    }
    let (sigmoid, fallback) = platt::fit(&dec, &positive);
    if fallback {
        warn!("held-out decision values do not increase with the doppelganger class; using a prior-only sigmoid");
    }
    Ok(model.clone().with_calibration(sigmoid))
}

/// Splits features into (fit, calibration) index sets. Both orderings of a
/// symmetrised pair stay on the same side; the split is stratified by class
/// and seeded. Returns `None` when a class has fewer than two pairs.
pub fn calibration_split(features: &[DifferenceVector], fraction: f64, seed: u64) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut group_of: HashMap<(Class, &str, &str), usize> = HashMap::new();
    let mut groups: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
    for (i, f) in features.iter().enumerate() {
        let class = f.label?;
        let (a, b) = if f.reference_id <= f.probe_id {
            (f.reference_id.as_str(), f.probe_id.as_str())
        } else {
            (f.probe_id.as_str(), f.reference_id.as_str())
        };
        let slot = usize::from(class == Class::Doppelganger);
        let g = *group_of.entry((class, a, b)).or_insert_with(|| {
            groups[slot].push(Vec::new());
            groups[slot].len() - 1
        });
        groups[slot][g].push(i);
    }
    if groups.iter().any(|g| g.len() < 2) {
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fit, mut held) = (Vec::new(), Vec::new());
    for class_groups in &mut groups {
        class_groups.shuffle(&mut rng);
        let n = class_groups.len();
        let k = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        for (gi, members) in class_groups.iter().enumerate() {
            if gi < k {
                held.extend_from_slice(members);
            } else {
                fit.extend_from_slice(members);
            }
        }
    }
    fit.sort_unstable();
    held.sort_unstable();
    Some((fit, held))
}

/// Full detector training: stratified split, SVM fit on the larger part,
/// sigmoid fit on the held-out part. `feature_config` is recorded in the model.
pub fn train_detector(
    features: &[DifferenceVector],
    feature_config: FeatureConfig,
    config: &SvmConfig,
) -> Result<SvmModel> {
    config.validate()?;
    let split = if config.calibration_fraction > 0.0 {
        calibration_split(features, config.calibration_fraction, config.seed)
    } else {
        None
    };
    let model = match split {
        Some((fit_idx, held_idx)) => {
            let fit: Vec<DifferenceVector> = fit_idx.iter().map(|&i| features[i].clone()).collect();
            let held: Vec<DifferenceVector> = held_idx.iter().map(|&i| features[i].clone()).collect();
            info!("training on {} features, calibrating on {}", fit.len(), held.len());
            let m = train(&fit, config)?;
            calibrate(&m, &held)?
        }
        None => {
            warn!("too few pairs per class for a held-out split; calibrating on the training features");
            let m = train(features, config)?;
            calibrate(&m, features)?
        }
    };
    Ok(SvmModel {
        feature_config,
        ..model
    })
}
