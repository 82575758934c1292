//! Classifier features: element-wise differences of embedding pairs.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataio::{Embedding, EmbeddingIndex, PairLabel, TrialPair};
use crate::error::{Error, Result};

/// Detector class. Doppelgangers are the positive (attack) class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Mated,
    Doppelganger,
}

impl Class {
    pub fn from_label(label: PairLabel) -> Option<Class> {
        match label {
            PairLabel::Mated => Some(Class::Mated),
            PairLabel::Doppelganger => Some(Class::Doppelganger),
            PairLabel::Nonmated => None,
        }
    }

    /// SVM target: +1 for doppelgangers, -1 for mated pairs.
    pub fn sign(self) -> f64 {
        match self {
            Class::Mated => -1.0,
            Class::Doppelganger => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DiffMode {
    #[default]
    Signed,
    Absolute,
}

impl fmt::Display for DiffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffMode::Signed => "signed",
            DiffMode::Absolute => "absolute",
        })
    }
}

impl FromStr for DiffMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signed" => Ok(DiffMode::Signed),
            "absolute" => Ok(DiffMode::Absolute),
            other => Err(format!("unknown difference mode `{other}`")),
        }
    }
}

/// How pairs become features. Stored in the model file so scoring reuses the
/// training-time settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureConfig {
    pub mode: DiffMode,
    /// Unit-normalise both embeddings before subtracting.
    pub normalize: bool,
    /// Training only: add the swapped-order feature for every pair.
    pub symmetrize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            mode: DiffMode::Signed,
            normalize: true,
            symmetrize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceVector {
    pub values: Vec<f64>,
    pub reference_id: String,
    pub probe_id: String,
    pub label: Option<Class>,
}

impl DifferenceVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales an embedding to unit Euclidean norm.
pub fn normalize(e: &Embedding) -> Result<Embedding> {
    let norm = l2_norm(&e.values);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding(e.image_id.clone()));
    }
    Ok(Embedding {
        image_id: e.image_id.clone(),
        subject_id: e.subject_id.clone(),
        values: e.values.iter().map(|v| v / norm).collect(),
    })
}

pub fn difference(reference: &Embedding, probe: &Embedding, mode: DiffMode) -> Result<DifferenceVector> {
    if reference.dim() != probe.dim() {
        return Err(Error::Dimension {
            expected: reference.dim(),
            actual: probe.dim(),
        });
    }
    let values = reference
        .values
        .iter()
        .zip(&probe.values)
        .map(|(r, p)| match mode {
            DiffMode::Signed => r - p,
            DiffMode::Absolute => (r - p).abs(),
        })
        .collect();
    Ok(DifferenceVector {
        values,
        reference_id: reference.image_id.clone(),
        probe_id: probe.image_id.clone(),
        label: None,
    })
}

/// Feature of one (reference, probe) pair under `config`, ignoring
/// symmetrisation. This is the scoring-time path.
pub fn pair_feature(reference: &Embedding, probe: &Embedding, config: &FeatureConfig) -> Result<DifferenceVector> {
    if config.normalize {
        difference(&normalize(reference)?, &normalize(probe)?, config.mode)
    } else {
        difference(reference, probe, config.mode)
    }
}

/// Builds labelled training features. Nonmated pairs are skipped; with
/// symmetrisation each pair contributes (reference - probe) followed by
/// (probe - reference). Output order follows input order.
pub fn build_feature_set(
    pairs: &[TrialPair],
    embeddings: &EmbeddingIndex,
    config: &FeatureConfig,
) -> Result<Vec<DifferenceVector>> {
    let per_pair: Vec<Vec<DifferenceVector>> = pairs
        .par_iter()
        .filter_map(|p| Class::from_label(p.label).map(|c| (p, c)))
        .map(|(p, class)| {
            let r = embeddings.resolve(&p.reference_id)?;
            let q = embeddings.resolve(&p.probe_id)?;
            let mut fwd = pair_feature(r, q, config)?;
            fwd.label = Some(class);
            if !config.symmetrize {
                return Ok(vec![fwd]);
            }
            let mut rev = pair_feature(q, r, config)?;
            rev.label = Some(class);
            Ok(vec![fwd, rev])
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}
