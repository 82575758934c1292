//! Fixtures for the benchmarks.

use lookalike_core::features::build_feature_set;
use lookalike_core::synth::{generate, SynthConfig, SynthData};
use lookalike_core::{DifferenceVector, EmbeddingIndex, FeatureConfig, ImageBuffer, LandmarkSet, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Synthetic population with `train_subjects` training identities.
pub fn population(train_subjects: usize, dim: usize) -> (SynthData, EmbeddingIndex) {
    let data = generate(&SynthConfig {
        dim,
        subjects: 50,
        doppelganger_pairs: 25,
        train_subjects,
        nonmated_pairs: 1000,
        ..SynthConfig::default()
    })
    .expect("valid synth config");
    let index = EmbeddingIndex::new(data.embeddings.clone()).expect("unique ids");
    (data, index)
}

pub fn training_features(train_subjects: usize, dim: usize) -> Vec<DifferenceVector> {
    let (data, index) = population(train_subjects, dim);
    build_feature_set(&data.train_pairs, &index, &FeatureConfig::default()).expect("resolvable pairs")
}

/// `(attack, bonafide)` score lists, `n` each, partially overlapping.
pub fn scores(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attack = (0..n).map(|_| rng.random_range(0.3..1.0)).collect();
    let bonafide = (0..n).map(|_| rng.random_range(0.0..0.7)).collect();
    (attack, bonafide)
}

/// Textured square image with 68 jittered landmarks on a face-like ellipse.
pub fn face(size: u32, seed: u64) -> (ImageBuffer, LandmarkSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = ImageBuffer::filled(size, size, [0; 3]).expect("non-empty image");
    for y in 0..size {
        for x in 0..size {
            img.set_pixel(x, y, [(x ^ y) as u8, (x * 3) as u8, rng.random()]);
        }
    }
    let c = size as f64 / 2.0;
    let points = (0..68)
        .map(|i| {
            let t = i as f64 / 68.0 * std::f64::consts::TAU;
            let r = 0.3 + 0.1 * (i % 3) as f64;
            Point::new(
                c + c * r * t.cos() + rng.random_range(-2.0..2.0),
                c + c * 1.2 * r * t.sin() + rng.random_range(-2.0..2.0),
            )
        })
        .collect();
    (img, LandmarkSet::new(format!("face{seed}"), points))
}
