//! Face-verification baseline: cosine comparison scores and their
//! distribution statistics.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::dataio::{Embedding, EmbeddingIndex, PairLabel, TrialPair};
use crate::error::{Error, Result};

/// `<a, b> / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 {
        return Err(Error::DegenerateEmbedding(a.image_id.clone()));
    }
    if nb == 0.0 {
        return Err(Error::DegenerateEmbedding(b.image_id.clone()));
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// How comparison scores are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreScale {
    /// Cosine similarity in `[-1, 1]`.
    Raw,
    /// `(cos + 1) / 2`, in `[0, 1]`.
    #[default]
    Unit,
}

impl ScoreScale {
    pub fn apply(self, cosine: f64) -> f64 {
        match self {
            ScoreScale::Raw => cosine,
            ScoreScale::Unit => (cosine + 1.0) / 2.0,
        }
    }
}

/// Comparison scores split by trial category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub mated: Vec<f64>,
    pub nonmated: Vec<f64>,
    /// Doppelganger comparisons.
    pub attack: Vec<f64>,
    pub meta: String,
}

impl ScoreSet {
    pub fn push(&mut self, label: PairLabel, score: f64) {
        match label {
            PairLabel::Mated => self.mated.push(score),
            PairLabel::Nonmated => self.nonmated.push(score),
            PairLabel::Doppelganger => self.attack.push(score),
        }
    }

    pub fn get(&self, label: PairLabel) -> &[f64] {
        match label {
            PairLabel::Mated => &self.mated,
            PairLabel::Nonmated => &self.nonmated,
            PairLabel::Doppelganger => &self.attack,
        }
    }

    pub fn len(&self) -> usize {
        self.mated.len() + self.nonmated.len() + self.attack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `label,score` lines, categories in the order doppelganger, mated, nonmated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for label in [PairLabel::Doppelganger, PairLabel::Mated, PairLabel::Nonmated] {
            for s in self.get(label) {
                writeln!(w, "{label},{s}")?;
            }
        }
        Ok(())
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let mut set = ScoreSet {
            meta: origin.to_owned(),
            ..ScoreSet::default()
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::Format {
                origin: origin.to_owned(),
                line: i + 1,
                message: m,
            };
            let (label, score) = line
                .split_once(',')
                .ok_or_else(|| bad("expected `label,score`".into()))?;
            let label: PairLabel = label.trim().parse().map_err(bad)?;
            let score: f64 = score
                .trim()
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| bad(format!("invalid score `{}`", score.trim())))?;
            set.push(label, score);
        }
        Ok(set)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }
}

/// Compares every pair and files the score under the pair's label.
pub fn score_pairs(pairs: &[TrialPair], embeddings: &EmbeddingIndex, scale: ScoreScale) -> Result<ScoreSet> {
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let a = embeddings.resolve(&p.reference_id)?;
            let b = embeddings.resolve(&p.probe_id)?;
            cosine_similarity(a, b).map(|c| scale.apply(c))
        })
        .collect::<Result<_>>()?;
    let mut set = ScoreSet::default();
    for (p, s) in pairs.iter().zip(scores) {
        set.push(p.label, s);
    }
    Ok(set)
}

/// Neumaier-compensated sum; order-stable and accurate to a few ulps.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample statistics; a field is `None` when too few samples (or zero
/// variance) leave it undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: Option<f64>,
    /// `n - 1` divisor.
    pub std_dev: Option<f64>,
    /// Adjusted Fisher-Pearson coefficient `G1`.
    pub skewness: Option<f64>,
    /// Bias-corrected sample excess kurtosis `G2`.
    pub excess_kurtosis: Option<f64>,
}

pub fn descriptive_stats(scores: &[f64]) -> DescriptiveStats {
    let n = scores.len();
    if n == 0 {
        return DescriptiveStats::default();
    }
    let nf = n as f64;
    let mean = compensated_sum(scores.iter().copied()) / nf;
    let mut stats = DescriptiveStats {
        n,
        mean: Some(mean),
        ..DescriptiveStats::default()
    };
    if n < 2 {
        return stats;
    }
    let dev: Vec<f64> = scores.iter().map(|x| x - mean).collect();
    let m2 = compensated_sum(dev.iter().map(|d| d * d)) / nf;
    stats.std_dev = Some((m2 * nf / (nf - 1.0)).sqrt());
    if m2 == 0.0 {
        return stats;
    }
    if n >= 3 {
        let m3 = compensated_sum(dev.iter().map(|d| d * d * d)) / nf;
        let g1 = m3 / m2.powf(1.5);
        stats.skewness = Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0));
    }
    if n >= 4 {
        let m4 = compensated_sum(dev.iter().map(|d| d * d * d * d)) / nf;
        let g2 = m4 / (m2 * m2) - 3.0;
        stats.excess_kurtosis = Some(((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)));
    }
    stats
}

/// Per-category statistics table, one row per category with header
/// `category,n,mean,std_dev,skewness,excess_kurtosis`. Undefined fields are `NA`.
pub fn write_stats_csv<W: Write>(mut w: W, set: &ScoreSet) -> std::io::Result<()> {
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_owned(), |x| format!("{x}"));
    writeln!(w, "# sample mean; standard deviation with n-1 divisor; adjusted Fisher-Pearson skewness; bias-corrected excess kurtosis")?;
    writeln!(w, "category,n,mean,std_dev,skewness,excess_kurtosis")?;
    for label in [PairLabel::Doppelganger, PairLabel::Mated, PairLabel::Nonmated] {
        let s = descriptive_stats(set.get(label));
        writeln!(
            w,
            "{label},{},{},{},{},{}",
            s.n,
            fmt(s.mean),
            fmt(s.std_dev),
            fmt(s.skewness),
            fmt(s.excess_kurtosis)
        )?;
    }
    Ok(())
}
