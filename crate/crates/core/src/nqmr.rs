//! Nuclear-norm quaternion matrix regression solved by ADMM.
//!
//! Solves `min ||A(x) - B||_* + (lambda/2) ||x||^2` through the split
//! `A(x) - B = E`. Each iteration performs a ridge step on `x`, a singular
//! value thresholding step on `E` (in the real embedding), and a multiplier
//! ascent step.

use crate::dictionary::Dictionary;
use crate::error::{shape_mismatch, QmrError, Result};
use crate::linalg::{svt, RidgeSystem};
use crate::quat::{embed_matrix, unembed_matrix, QuaternionMatrix, QuaternionVector, RealEmbedding};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NqmrConfig {
    pub lambda: f64,
    pub mu: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
}

impl Default for NqmrConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            eps_rel: 1e-4,
            max_iter: 100,
        }
    }
}

impl NqmrConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(QmrError::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("mu", self.mu)?;
        positive("eps_rel", self.eps_rel)?;
        if self.max_iter == 0 {
            return Err(QmrError::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// One ADMM iterate.
#[derive(Clone, Debug)]
pub struct NqmrState {
    pub x: QuaternionVector,
    /// Error image `E`.
    pub error: QuaternionMatrix,
    /// Lagrange multiplier.
    pub multiplier: QuaternionMatrix,
    /// `A(x)` at the current coefficients.
    pub reconstruction: QuaternionMatrix,
    /// `||A(x) - B - E||_F`.
    pub dual: f64,
}

impl NqmrState {
    /// All-zero start.
    pub fn initial(len: usize, rows: usize, cols: usize) -> Self {
        Self {
            x: QuaternionVector::zeros(len),
            error: QuaternionMatrix::zeros(rows, cols),
            multiplier: QuaternionMatrix::zeros(rows, cols),
            reconstruction: QuaternionMatrix::zeros(rows, cols),
            dual: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NqmrSolution {
    pub x: QuaternionVector,
    pub state: NqmrState,
    /// Dual residual after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Whether the dual-difference rule fired before `max_iter`.
    pub converged: bool,
}

/// Solver bound to one dictionary; the ridge factorization is computed once
/// and reused across queries.
#[derive(Clone, Debug)]
pub struct NqmrSolver<'a> {
    dictionary: &'a Dictionary,
    ridge: RidgeSystem,
    config: NqmrConfig,
}

impl<'a> NqmrSolver<'a> {
    pub fn new(dictionary: &'a Dictionary, config: NqmrConfig) -> Result<Self> {
        config.validate()?;
        let ridge = dictionary.ridge_system(config.lambda / config.mu)?;
        Ok(Self {
            dictionary,
            ridge,
            config,
        })
    }

    pub fn config(&self) -> &NqmrConfig {
        &self.config
    }

    pub fn ridge(&self) -> &RidgeSystem {
        &self.ridge
    }

    pub fn initial_state(&self) -> NqmrState {
        let (m, n) = self.dictionary.image_shape();
        NqmrState::initial(self.dictionary.len(), m, n)
    }

    /// The error-image prox target `A(x) - B + multiplier / mu`.
    pub fn error_target(&self, b: &QuaternionMatrix, state: &NqmrState) -> QuaternionMatrix {
        (&state.reconstruction - b).add_scaled(1.0 / self.config.mu, &state.multiplier)
    }

    /// One pass of the x, E and multiplier updates.
    pub fn iterate(&self, b: &QuaternionMatrix, state: &mut NqmrState) -> Result<()> {
        let mu = self.config.mu;

        let g = (b + &state.error).add_scaled(-1.0 / mu, &state.multiplier);
        state.x = self.dictionary.ridge_fit(&self.ridge, &g)?;
        state.reconstruction = self.dictionary.reconstruct(&state.x)?;

        let target = self.error_target(b, state);
        state.error = unembed_matrix(&svt_embedded(&target, 1.0 / mu));

        let residual = &(&state.reconstruction - b) - &state.error;
        state.multiplier = state.multiplier.add_scaled(mu, &residual);
        state.dual = residual.frobenius_norm();
        Ok(())
    }

    pub fn solve(&self, b: &QuaternionMatrix) -> Result<NqmrSolution> {
        let (m, n) = self.dictionary.image_shape();
        if b.shape() != (m, n) {
            return Err(shape_mismatch(format!("{m}x{n} query"), format!("{:?}", b.shape())));
        }
        if !b.is_finite() {
            return Err(QmrError::NonFinite {
                what: "query",
                iteration: 0,
            });
        }
        let mut state = self.initial_state();
        let mut trace = Vec::with_capacity(self.config.max_iter);
        let mut converged = false;
        for iteration in 1..=self.config.max_iter {
            self.iterate(b, &mut state)?;
            check_finite(&state, iteration)?;
            let previous = trace.last().copied();
            trace.push(state.dual);
            if let Some(p) = previous {
                if (p - state.dual).abs() < self.config.eps_rel {
                    converged = true;
                    break;
                }
            }
        }
        Ok(NqmrSolution {
            x: state.x.clone(),
            iterations: trace.len(),
            state,
            trace,
            converged,
        })
    }
}

fn svt_embedded(target: &QuaternionMatrix, gamma: f64) -> RealEmbedding {
    let shrunk = svt(embed_matrix(target).matrix(), gamma);
    RealEmbedding::new(shrunk).expect("embedding keeps dimensions divisible by 4")
}

fn check_finite(state: &NqmrState, iteration: usize) -> Result<()> {
    let what = if !state.x.is_finite() {
        "coefficients"
    } else if !state.error.is_finite() {
        "error image"
    } else if !state.multiplier.is_finite() || !state.dual.is_finite() {
        "multiplier"
    } else {
        return Ok(());
    };
    Err(QmrError::NonFinite { what, iteration })
}

/// Convenience wrapper building a one-off solver.
pub fn solve_nqmr(dictionary: &Dictionary, b: &QuaternionMatrix, config: &NqmrConfig) -> Result<NqmrSolution> {
    NqmrSolver::new(dictionary, *config)?.solve(b)
}
