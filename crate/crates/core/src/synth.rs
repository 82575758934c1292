//! Synthetic face-embedding populations for desk-scale experiments.
//!
//! Subjects are unit vectors drawn uniformly on the sphere. A sample of a
//! subject is its centroid pushed along a random tangent direction and
//! renormalised. Doppelganger subjects come in pairs whose centroids are a
//! fixed angle apart. Training doppelgangers are "morph-style": samples
//! around the renormalised convex combination of two training centroids.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::{Embedding, PairLabel, TrialPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub dim: usize,
    /// Test-population subjects; every subject joins one doppelganger pairing
    /// until `doppelganger_pairs` is reached.
    pub subjects: usize,
    pub doppelganger_pairs: usize,
    /// Angle between the centroids of a doppelganger pairing, in radians.
    pub doppelganger_angle: f64,
    pub samples_per_subject: usize,
    /// Tangent noise magnitude; a sample sits about `atan(noise)` from its centroid.
    pub noise: f64,
    pub train_subjects: usize,
    /// Morph-style training pairs; `None` matches the mated training pair count.
    pub train_morphs: Option<usize>,
    pub morph_weight: f64,
    pub nonmated_pairs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            dim: 128,
            subjects: 200,
            doppelganger_pairs: 100,
            doppelganger_angle: angle_for_mean_cosine(0.5, 0.5),
            samples_per_subject: 3,
            noise: 0.5,
            train_subjects: 200,
            train_morphs: None,
            morph_weight: 0.5,
            nonmated_pairs: 20_000,
        }
    }
}

/// Centroid angle at which two samples with tangent noise `noise` have an
/// expected cosine close to `mean_cosine`. The result saturates at 0 and pi.
pub fn angle_for_mean_cosine(mean_cosine: f64, noise: f64) -> f64 {
    (mean_cosine * (1.0 + noise * noise)).clamp(-1.0, 1.0).acos()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dim < 2 {
            return bad(format!("dimension must be at least 2, got {}", self.dim));
        }
        if self.subjects < 2 || self.train_subjects < 2 {
            return bad("at least two test and two training subjects are needed".into());
        }
        if 2 * self.doppelganger_pairs > self.subjects {
            return bad(format!(
                "{} doppelganger pairings need {} subjects, only {} configured",
                self.doppelganger_pairs,
                2 * self.doppelganger_pairs,
                self.subjects
            ));
        }
        if self.samples_per_subject < 2 {
            return bad("at least two samples per subject are needed for mated pairs".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be finite and non-negative, got {}", self.noise));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.doppelganger_angle) {
            return bad(format!(
                "doppelganger angle must lie in [0, pi], got {}",
                self.doppelganger_angle
            ));
        }
        if !(0.0..=1.0).contains(&self.morph_weight) {
            return bad(format!("morph weight must lie in [0, 1], got {}", self.morph_weight));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub dim: usize,
    pub embeddings: Vec<Embedding>,
    /// Mated and morph-style doppelganger pairs over training subjects.
    pub train_pairs: Vec<TrialPair>,
    /// Mated, doppelganger and nonmated pairs over test subjects.
    pub test_pairs: Vec<TrialPair>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let g = gaussian(rng, dim);
        if g.iter().any(|&x| x != 0.0) {
            return unit(g);
        }
    }
}

/// Gaussian direction orthogonal to the unit vector `c`, with expected
/// squared norm about 1.
fn tangent(rng: &mut ChaCha8Rng, c: &[f64]) -> Vec<f64> {
    let g = gaussian(rng, c.len());
    let proj: f64 = g.iter().zip(c).map(|(a, b)| a * b).sum();
    let scale = 1.0 / ((c.len() - 1) as f64).sqrt();
    g.iter().zip(c).map(|(a, b)| (a - proj * b) * scale).collect()
}

fn rotate_away(rng: &mut ChaCha8Rng, c: &[f64], angle: f64) -> Vec<f64> {
    let u = loop {
        let t = tangent(rng, c);
        if t.iter().any(|&x| x != 0.0) {
            break unit(t);
        }
    };
    let (s, k) = angle.sin_cos();
    unit(c.iter().zip(&u).map(|(a, b)| k * a + s * b).collect())
}

fn sample(rng: &mut ChaCha8Rng, c: &[f64], noise: f64) -> Vec<f64> {
    let t = tangent(rng, c);
    unit(c.iter().zip(&t).map(|(a, b)| a + noise * b).collect())
}

fn within_subject_pairs(ids: &[String]) -> impl Iterator<Item = TrialPair> + '_ {
    (0..ids.len())
        .flat_map(move |i| (i + 1..ids.len()).map(move |j| TrialPair::new(&ids[i], &ids[j], PairLabel::Mated)))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let dim = cfg.dim;
    let k = cfg.samples_per_subject;
    let mut centroid_rng = stream(cfg.seed, 1);
    let mut partner_rng = stream(cfg.seed, 2);
    let mut noise_rng = stream(cfg.seed, 3);
    let mut morph_rng = stream(cfg.seed, 4);
    let mut impostor_rng = stream(cfg.seed, 5);

    let mut embeddings = Vec::new();
    let mut train_pairs = Vec::new();
    let mut test_pairs = Vec::new();

    // Test population: subjects 2i and 2i+1 form pairing i.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(cfg.subjects);
    for s in 0..cfg.subjects {
        let c = if s % 2 == 1 && s / 2 < cfg.doppelganger_pairs {
            rotate_away(&mut partner_rng, &centroids[s - 1], cfg.doppelganger_angle)
        } else {
            random_unit(&mut centroid_rng, dim)
        };
        centroids.push(c);
    }
    let mut test_ids: Vec<Vec<String>> = Vec::with_capacity(cfg.subjects);
    for (s, c) in centroids.iter().enumerate() {
        let subject = format!("te{s:05}");
        let ids: Vec<String> = (0..k).map(|i| format!("{subject}_{i}")).collect();
        for id in &ids {
            embeddings.push(Embedding::new(id, &subject, sample(&mut noise_rng, c, cfg.noise)));
        }
        test_pairs.extend(within_subject_pairs(&ids));
        test_ids.push(ids);
    }
    for p in 0..cfg.doppelganger_pairs {
        for a in &test_ids[2 * p] {
            for b in &test_ids[2 * p + 1] {
                test_pairs.push(TrialPair::new(a, b, PairLabel::Doppelganger));
            }
        }
    }
    let partner = |s: usize| (s / 2 < cfg.doppelganger_pairs).then_some(s ^ 1);
    let possible = cfg.subjects * (cfg.subjects - 1) / 2 - cfg.doppelganger_pairs;
    let target = cfg.nonmated_pairs.min(possible * k * k);
    let mut seen = HashSet::with_capacity(target);
    while seen.len() < target {
        let a = impostor_rng.random_range(0..cfg.subjects);
        let b = impostor_rng.random_range(0..cfg.subjects);
        if a == b || partner(a) == Some(b) {
            continue;
        }
        let (i, j) = (impostor_rng.random_range(0..k), impostor_rng.random_range(0..k));
        let key = if (a, i) < (b, j) { (a, i, b, j) } else { (b, j, a, i) };
        if seen.insert(key) {
            test_pairs.push(TrialPair::new(&test_ids[a][i], &test_ids[b][j], PairLabel::Nonmated));
        }
    }

    // Training population.
    let train_centroids: Vec<Vec<f64>> = (0..cfg.train_subjects)
        .map(|_| random_unit(&mut centroid_rng, dim))
        .collect();
    let mut train_ids = Vec::with_capacity(cfg.train_subjects);
    for (s, c) in train_centroids.iter().enumerate() {
        let subject = format!("tr{s:05}");
        let ids: Vec<String> = (0..k).map(|i| format!("{subject}_{i}")).collect();
        for id in &ids {
            embeddings.push(Embedding::new(id, &subject, sample(&mut noise_rng, c, cfg.noise)));
        }
        train_pairs.extend(within_subject_pairs(&ids));
        train_ids.push(ids);
    }
    let morphs = cfg.train_morphs.unwrap_or(train_pairs.len());
    for m in 0..morphs {
        let t = m % cfg.train_subjects;
        let s = loop {
            let s = morph_rng.random_range(0..cfg.train_subjects);
            if s != t {
                break s;
            }
        };
        let w = cfg.morph_weight;
        let mix: Vec<f64> = train_centroids[t]
            .iter()
            .zip(&train_centroids[s])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        let norm = mix.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Geometry(format!(
                "morph of antipodal subjects {t} and {s} is undefined"
            )));
        }
        let mix = unit(mix);
        let id = format!("mo{m:06}");
        embeddings.push(Embedding::new(&id, &id, sample(&mut noise_rng, &mix, cfg.noise)));
        let reference = &train_ids[t][morph_rng.random_range(0..k)];
        train_pairs.push(TrialPair::new(reference, &id, PairLabel::Doppelganger));
    }

    Ok(SynthData {
        dim,
        embeddings,
        train_pairs,
        test_pairs,
    })
}
