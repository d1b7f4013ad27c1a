//! Class-dependent reconstruction-error classification.
//!
//! After regressing a query on the whole dictionary, each class `k` is
//! scored by the (weighted) nuclear norm of `A(x) - A(delta_k(x))`, the part
//! of the reconstruction contributed by every other class. The query goes
//! to the class with the smallest score; ties resolve to the smallest id.

use crate::dictionary::Dictionary;
use crate::error::{QmrError, Result};
use crate::linalg::WeightVector;
use crate::nqmr::{NqmrConfig, NqmrSolver};
use crate::quat::{Quaternion, QuaternionMatrix, QuaternionVector};
use crate::rnqmr::{RnqmrConfig, RnqmrSolution, RnqmrSolver};

/// Training images with 1-based class ids.
#[derive(Clone, Debug)]
pub struct LabeledDictionary {
    dictionary: Dictionary,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDictionary {
    pub fn new(images: Vec<QuaternionMatrix>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(QmrError::InvalidInput(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if classes == 0 {
            return Err(QmrError::InvalidInput("need at least one class".into()));
        }
        if let Some(bad) = labels.iter().find(|&&k| k == 0 || k > classes) {
            return Err(QmrError::InvalidInput(format!("class id {bad} outside 1..={classes}")));
        }
        if images.len() < classes {
            return Err(QmrError::InvalidInput(format!(
                "{} training images for {classes} classes",
                images.len()
            )));
        }
        Ok(Self {
            dictionary: Dictionary::new(images)?,
            labels,
            classes,
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

#[derive(Clone, Debug)]
pub struct ClassificationResult {
    /// 1-based class id.
    pub predicted: usize,
    /// `r_k` for `k = 1..=K`, stored at index `k - 1`.
    pub per_class_error: Vec<f64>,
    pub coefficients: QuaternionVector,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Copy of `x` keeping only entries labeled `k`.
pub fn restrict_coeffs(x: &QuaternionVector, k: usize, labels: &[usize]) -> QuaternionVector {
    assert_eq!(x.len(), labels.len(), "coefficient/label length mismatch");
    x.as_slice()
        .iter()
        .zip(labels)
        .map(|(&q, &l)| if l == k { q } else { Quaternion::ZERO })
        .collect()
}

/// 1-based index of the smallest error, lowest id on ties.
pub fn argmin_class(errors: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate().skip(1) {
        if e < errors[best] {
            best = i;
        }
    }
    best + 1
}

/// `A(x) - A(delta_k(x))` for every class.
fn class_residuals(dict: &LabeledDictionary, x: &QuaternionVector) -> Result<Vec<QuaternionMatrix>> {
    let full = dict.dictionary.reconstruct(x)?;
    (1..=dict.classes)
        .map(|k| {
            let part = dict.dictionary.reconstruct(&restrict_coeffs(x, k, &dict.labels))?;
            Ok(&full - &part)
        })
        .collect()
}

/// `sum_i w_i s_i` over the quaternion spectrum, with last-value padding
/// when the weights are shorter than the spectrum.
pub fn weighted_nuclear_norm(m: &QuaternionMatrix, weights: &WeightVector) -> f64 {
    m.singular_values()
        .iter()
        .enumerate()
        .map(|(i, s)| weights.get_padded(i) * s)
        .sum()
}

/// Which weight vector scores classes after a robust solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FinalWeights {
    /// The weights used by the last `E0` update.
    #[default]
    LastIteration,
    /// Weights recomputed from the spectrum of the final `E0`.
    FromFinalE0,
}

pub struct NqmrClassifier<'a> {
    dict: &'a LabeledDictionary,
    solver: NqmrSolver<'a>,
}

impl<'a> NqmrClassifier<'a> {
    pub fn new(dict: &'a LabeledDictionary, config: NqmrConfig) -> Result<Self> {
        Ok(Self {
            dict,
            solver: NqmrSolver::new(&dict.dictionary, config)?,
        })
    }

    pub fn classify(&self, b: &QuaternionMatrix) -> Result<ClassificationResult> {
        let sol = self.solver.solve(b)?;
        let per_class_error: Vec<f64> = class_residuals(self.dict, &sol.x)?
            .iter()
            .map(|r| r.nuclear_norm())
            .collect();
        Ok(ClassificationResult {
            predicted: argmin_class(&per_class_error),
            per_class_error,
            coefficients: sol.x,
            iterations: sol.iterations,
            trace: sol.trace,
        })
    }
}

pub struct RnqmrClassifier<'a> {
    dict: &'a LabeledDictionary,
    solver: RnqmrSolver<'a>,
    weights: FinalWeights,
}

impl<'a> RnqmrClassifier<'a> {
    pub fn new(dict: &'a LabeledDictionary, config: RnqmrConfig, weights: FinalWeights) -> Result<Self> {
        Ok(Self {
            dict,
            solver: RnqmrSolver::new(&dict.dictionary, config)?,
            weights,
        })
    }

    /// Builds on a prepared solver, e.g. one sharing a ridge factorization
    /// across a hyperparameter sweep.
    pub fn from_solver(dict: &'a LabeledDictionary, solver: RnqmrSolver<'a>, weights: FinalWeights) -> Self {
        Self { dict, solver, weights }
    }

    pub fn solve(&self, b: &QuaternionMatrix) -> Result<RnqmrSolution> {
        self.solver.solve(b)
    }

    pub fn classify(&self, b: &QuaternionMatrix) -> Result<ClassificationResult> {
        let sol = self.solver.solve(b)?;
        self.classify_solution(sol)
    }

    /// Scores classes for an already computed robust solution.
    pub fn classify_solution(&self, sol: RnqmrSolution) -> Result<ClassificationResult> {
        let weights = match self.weights {
            FinalWeights::LastIteration => sol.final_weights.clone(),
            FinalWeights::FromFinalE0 => sol.weights_from_final_e0(self.solver.config()),
        };
        let per_class_error: Vec<f64> = class_residuals(self.dict, &sol.x)?
            .iter()
            .map(|r| weighted_nuclear_norm(r, &weights))
            .collect();
        Ok(ClassificationResult {
            predicted: argmin_class(&per_class_error),
            per_class_error,
            coefficients: sol.x,
            iterations: sol.iterations,
            trace: sol.trace,
        })
    }
}

pub fn classify_nqmr(dict: &LabeledDictionary, b: &QuaternionMatrix, config: &NqmrConfig) -> Result<ClassificationResult> {
    NqmrClassifier::new(dict, *config)?.classify(b)
}

pub fn classify_rnqmr(
    dict: &LabeledDictionary,
    b: &QuaternionMatrix,
    config: &RnqmrConfig,
) -> Result<ClassificationResult> {
    RnqmrClassifier::new(dict, *config, FinalWeights::default())?.classify(b)
}
