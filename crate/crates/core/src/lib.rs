//! Doppelganger (lookalike) detection from deep face representations.
//!
//! A pair of face embeddings is turned into an element-wise difference
//! vector and classified by an RBF support vector machine trained to
//! separate mated comparisons from doppelgangers. Training doppelgangers are
//! synthesised by landmark-based face morphing. The crate also carries the
//! verification and attack-detection metrics used to evaluate both the
//! face-recognition baseline and the detector.

pub mod dataio;
pub mod embed_adapter;
pub mod error;
pub mod features;
pub mod metrics;
pub mod morphgen;
pub mod svm;
pub mod synth;
pub mod verify;

pub use dataio::{Embedding, EmbeddingIndex, ImageBuffer, LandmarkSet, PairLabel, Point, TrialPair};
pub use error::{Error, ErrorKind, Result};
pub use features::{Class, DiffMode, DifferenceVector, FeatureConfig};
pub use metrics::{Rate, Threshold};
pub use morphgen::{MorphParams, MorphResult, TriangleMesh};
pub use svm::{Gamma, SvmConfig, SvmModel};
pub use verify::{ScoreScale, ScoreSet};
