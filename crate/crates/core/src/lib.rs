//! Quaternion matrix regression for color image classification.
//!
//! Color images are pure quaternion matrices (`R i + G j + B k`). A query is
//! regressed on a dictionary of training images with a nuclear-norm penalty
//! on the error image ([`nqmr`]), or with a robust split into low-rank,
//! sparse and Gaussian error terms ([`rnqmr`]). Both solvers run ADMM in the
//! real embedding of [`quat`], and [`classify`] turns their coefficients
//! into a class decision.

pub mod classify;
pub mod dataio;
pub mod dictionary;
pub mod error;
pub mod linalg;
pub mod nqmr;
pub mod quat;
pub mod rnqmr;

pub use classify::{
    classify_nqmr, classify_rnqmr, ClassificationResult, FinalWeights, LabeledDictionary, NqmrClassifier,
    RnqmrClassifier,
};
pub use dataio::{BlockSource, CorruptionRecipe, DatasetManifest, LabeledImage, SynthDataset, SynthSpec};
pub use dictionary::{combine, Dictionary};
pub use error::{QmrError, Result};
pub use linalg::{RidgeSystem, WeightVector};
pub use nqmr::{solve_nqmr, NqmrConfig, NqmrSolution, NqmrSolver, NqmrState};
pub use quat::{Quaternion, QuaternionMatrix, QuaternionVector, RealEmbedding};
pub use rnqmr::{solve_rnqmr, RnqmrConfig, RnqmrSolution, RnqmrSolver, RnqmrState};
