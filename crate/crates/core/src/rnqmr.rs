//! Robust quaternion matrix regression.
//!
//! The residual `B - A(x)` is split into three parts: a low-rank term `E0`
//! penalized by the log-determinant surrogate `omega * sum log(s_i + eps)`,
//! a sparse term `E1` under the quaternion L1 norm, and a dense Gaussian term
//! `E2` under the squared Frobenius norm. The log surrogate is handled by
//! reweighting: each `E0` step is a weighted singular value thresholding
//! whose weights come from the previous iterate's spectrum.
//!
//! Sign convention: the constraint is `A(x) + E0 + E1 + E2 = B`.

use crate::dictionary::Dictionary;
use crate::error::{shape_mismatch, QmrError, Result};
use crate::linalg::{l21_shrink, weighted_svt_with_spectrum, RidgeSystem, WeightVector};
use crate::quat::{
    channel_stack, channel_unstack, embed_matrix, quadruple_representatives, unembed_matrix, QuaternionMatrix,
    QuaternionVector, RealEmbedding,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RnqmrConfig {
    /// Weight of the log-nuclear term on `E0`.
    pub omega: f64,
    /// Weight of the L1 term on `E1`.
    pub alpha: f64,
    /// Weight of the squared Frobenius term on `E2`.
    pub beta: f64,
    /// Ridge weight on the coefficients.
    pub eta: f64,
    pub mu: f64,
    /// The `eps` inside `log(s_i + eps)`.
    pub epsilon_log: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
}

impl Default for RnqmrConfig {
    fn default() -> Self {
        Self {
            omega: 0.1,
            alpha: 0.1,
            beta: 1.0,
            eta: 1.0,
            mu: 1.0,
            epsilon_log: 1e-2,
            eps_rel: 1e-4,
            max_iter: 100,
        }
    }
}

impl RnqmrConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("mu", self.mu),
            ("epsilon_log", self.epsilon_log),
            ("eps_rel", self.eps_rel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(QmrError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(QmrError::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Adaptive weights `(omega/mu) / (s_i + eps)` for a quaternion spectrum.
    pub fn weights_for_spectrum(&self, spectrum: &[f64]) -> WeightVector {
        let scale = self.omega / self.mu;
        WeightVector::new(spectrum.iter().map(|s| scale / (s + self.epsilon_log)).collect())
            .expect("weights from a nonnegative spectrum are nonnegative")
    }
}

#[derive(Clone, Debug)]
pub struct RnqmrState {
    pub x: QuaternionVector,
    /// `A(x)` at the current coefficients.
    pub reconstruction: QuaternionMatrix,
    /// Low-rank structured error.
    pub e0: QuaternionMatrix,
    /// Cached quaternion spectrum of `e0`; `None` forces recomputation.
    /// Must be reset whenever `e0` is replaced by hand.
    pub e0_spectrum: Option<Vec<f64>>,
    /// Sparse outliers.
    pub e1: QuaternionMatrix,
    /// Dense Gaussian noise.
    pub e2: QuaternionMatrix,
    pub multiplier: QuaternionMatrix,
    /// Weights used by the latest `E0` update.
    pub weights: WeightVector,
    /// Stopping quantity `||A(x) - B - E0 - E1 - E2||_F`.
    pub dual: f64,
    /// Constraint violation `||A(x) + E0 + E1 + E2 - B||_F`.
    pub residual: f64,
}

impl RnqmrState {
    pub fn initial(len: usize, rows: usize, cols: usize) -> Self {
        let zero = QuaternionMatrix::zeros(rows, cols);
        Self {
            x: QuaternionVector::zeros(len),
            reconstruction: zero.clone(),
            e0: zero.clone(),
            e0_spectrum: None,
            e1: zero.clone(),
            e2: zero.clone(),
            multiplier: zero,
            weights: WeightVector::default(),
            dual: 0.0,
            residual: 0.0,
        }
    }

    /// `B - A(x) - multiplier/mu` minus the error terms flagged in `terms`.
    fn partial_target(&self, b: &QuaternionMatrix, mu: f64, terms: [bool; 3]) -> QuaternionMatrix {
        let mut t = (b - &self.reconstruction).add_scaled(-1.0 / mu, &self.multiplier);
        for (include, e) in terms.into_iter().zip([&self.e0, &self.e1, &self.e2]) {
            if include {
                t = &t - e;
            }
        }
        t
    }
}

/// Coefficient step: ridge fit of `B - E0 - E1 - E2 - multiplier/mu`.
/// Returns the new coefficients and `A(x)`.
pub fn update_x(
    state: &RnqmrState,
    b: &QuaternionMatrix,
    dictionary: &Dictionary,
    ridge: &RidgeSystem,
    mu: f64,
) -> Result<(QuaternionVector, QuaternionMatrix)> {
    let y = (&(&(b - &state.e0) - &state.e1) - &state.e2).add_scaled(-1.0 / mu, &state.multiplier);
    let x = dictionary.ridge_fit(ridge, &y)?;
    let reconstruction = dictionary.reconstruct(&x)?;
    Ok((x, reconstruction))
}

/// Target of the `E0` prox step.
pub fn e0_target(state: &RnqmrState, b: &QuaternionMatrix, cfg: &RnqmrConfig) -> QuaternionMatrix {
    state.partial_target(b, cfg.mu, [false, true, true])
}

/// Low-rank step. Weights are computed from the spectrum of the current
/// (previous-iteration) `E0`, then applied quadruple-wise in the embedding.
pub fn update_e0(state: &RnqmrState, b: &QuaternionMatrix, cfg: &RnqmrConfig) -> (QuaternionMatrix, WeightVector) {
    let (e0, weights, _) = update_e0_with_spectrum(state, b, cfg);
    (e0, weights)
}

/// [`update_e0`] that also returns the quaternion spectrum of the new `E0`.
/// Thresholding keeps the embedded structure, so the spectrum is the
/// thresholded one and needs no further decomposition.
fn update_e0_with_spectrum(
    state: &RnqmrState,
    b: &QuaternionMatrix,
    cfg: &RnqmrConfig,
) -> (QuaternionMatrix, WeightVector, Vec<f64>) {
    let previous = match &state.e0_spectrum {
        Some(s) => s.clone(),
        None => state.e0.singular_values(),
    };
    let weights = cfg.weights_for_spectrum(&previous);
    let target = embed_matrix(&e0_target(state, b, cfg));
    let (shrunk, values) = weighted_svt_with_spectrum(target.matrix(), &weights.repeat_each(4));
    let e0 = unembed_matrix(&RealEmbedding::new(shrunk).expect("embedding dimensions are multiples of 4"));
    let mut spectrum = quadruple_representatives(values.as_slice());
    spectrum.sort_by(|a, b| b.total_cmp(a));
    (e0, weights, spectrum)
}

pub fn e1_target(state: &RnqmrState, b: &QuaternionMatrix, cfg: &RnqmrConfig) -> QuaternionMatrix {
    state.partial_target(b, cfg.mu, [true, false, true])
}

/// Sparse step: per-pixel shrinkage of the quaternion modulus by `alpha/mu`.
pub fn update_e1(state: &RnqmrState, b: &QuaternionMatrix, cfg: &RnqmrConfig) -> QuaternionMatrix {
    let target = e1_target(state, b, cfg);
    let shrunk = l21_shrink(&channel_stack(&target), cfg.alpha / cfg.mu);
    channel_unstack(&shrunk, target.rows(), target.cols()).expect("shape preserved by shrinkage")
}

pub fn e2_target(state: &RnqmrState, b: &QuaternionMatrix, cfg: &RnqmrConfig) -> QuaternionMatrix {
    state.partial_target(b, cfg.mu, [true, true, false])
}

/// Gaussian step: `mu / (beta + mu)` times its target.
pub fn update_e2(state: &RnqmrState, b: &QuaternionMatrix, cfg: &RnqmrConfig) -> QuaternionMatrix {
    e2_target(state, b, cfg).scale(cfg.mu / (cfg.beta + cfg.mu))
}

#[derive(Clone, Debug)]
pub struct RnqmrSolution {
    pub x: QuaternionVector,
    /// Weights produced by the last iteration.
    pub final_weights: WeightVector,
    pub state: RnqmrState,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl RnqmrSolution {
    /// Weights recomputed from the spectrum of the final `E0`, the
    /// alternative to [`RnqmrSolution::final_weights`].
    pub fn weights_from_final_e0(&self, cfg: &RnqmrConfig) -> WeightVector {
        cfg.weights_for_spectrum(&self.state.e0.singular_values())
    }
}

#[derive(Clone, Debug)]
pub struct RnqmrSolver<'a> {
    dictionary: &'a Dictionary,
    ridge: RidgeSystem,
    config: RnqmrConfig,
}

impl<'a> RnqmrSolver<'a> {
    pub fn new(dictionary: &'a Dictionary, config: RnqmrConfig) -> Result<Self> {
        config.validate()?;
        let ridge = dictionary.ridge_system(config.eta / config.mu)?;
        Ok(Self::with_ridge(dictionary, ridge, config))
    }

    /// Reuses an existing factorization; its regularizer must be `eta / mu`.
    pub fn with_ridge(dictionary: &'a Dictionary, ridge: RidgeSystem, config: RnqmrConfig) -> Self {
        debug_assert!((ridge.regularizer() - config.eta / config.mu).abs() <= 1e-12 * ridge.regularizer().max(1.0));
        Self {
            dictionary,
            ridge,
            config,
        }
    }

    pub fn config(&self) -> &RnqmrConfig {
        &self.config
    }

    pub fn ridge(&self) -> &RidgeSystem {
        &self.ridge
    }

    pub fn initial_state(&self) -> RnqmrState {
        let (m, n) = self.dictionary.image_shape();
        RnqmrState::initial(self.dictionary.len(), m, n)
    }

    pub fn iterate(&self, b: &QuaternionMatrix, state: &mut RnqmrState) -> Result<()> {
        let cfg = &self.config;
        let (x, reconstruction) = update_x(state, b, self.dictionary, &self.ridge, cfg.mu)?;
        state.x = x;
        state.reconstruction = reconstruction;

        let (e0, weights, spectrum) = update_e0_with_spectrum(state, b, cfg);
        state.e0 = e0;
        state.e0_spectrum = Some(spectrum);
        state.weights = weights;
        state.e1 = update_e1(state, b, cfg);
        state.e2 = update_e2(state, b, cfg);

        let errors = &(&state.e0 + &state.e1) + &state.e2;
        let fit = &state.reconstruction - b;
        let violation = &fit + &errors;
        state.multiplier = state.multiplier.add_scaled(cfg.mu, &violation);
        state.residual = violation.frobenius_norm();
        state.dual = (&fit - &errors).frobenius_norm();
        Ok(())
    }

    pub fn solve(&self, b: &QuaternionMatrix) -> Result<RnqmrSolution> {
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
        Ok(RnqmrSolution {
            x: state.x.clone(),
            final_weights: state.weights.clone(),
            iterations: trace.len(),
            state,
            trace,
            converged,
        })
    }
}

fn check_finite(state: &RnqmrState, iteration: usize) -> Result<()> {
    let what = if !state.x.is_finite() {
        "coefficients"
    } else if !state.e0.is_finite() {
        "low-rank error"
    } else if !state.e1.is_finite() {
        "sparse error"
    } else if !state.e2.is_finite() {
        "gaussian error"
    } else if !state.multiplier.is_finite() || !state.dual.is_finite() {
        "multiplier"
    } else {
        return Ok(());
    };
    Err(QmrError::NonFinite { what, iteration })
}

pub fn solve_rnqmr(dictionary: &Dictionary, b: &QuaternionMatrix, config: &RnqmrConfig) -> Result<RnqmrSolution> {
    RnqmrSolver::new(dictionary, *config)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nqmr::{NqmrConfig, NqmrSolver};
    use crate::quat::Quaternion;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pure(rng: &mut ChaCha8Rng, m: usize, n: usize) -> QuaternionMatrix {
        QuaternionMatrix::from_fn(m, n, |_, _| {
            Quaternion::pure(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))
        })
    }

    fn random_state(rng: &mut ChaCha8Rng, m: usize, n: usize, l: usize) -> RnqmrState {
        let mut s = RnqmrState::initial(l, m, n);
        s.reconstruction = random_pure(rng, m, n);
        s.e0 = random_pure(rng, m, n).scale(0.3);
        s.e1 = random_pure(rng, m, n).scale(0.3);
        s.e2 = random_pure(rng, m, n).scale(0.3);
        s.multiplier = random_pure(rng, m, n).scale(0.5);
        s
    }

    #[test]
    fn first_x_step_matches_nqmr() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let atoms: Vec<_> = (0..4).map(|_| random_pure(&mut rng, 4, 5)).collect();
        let dict = Dictionary::new(atoms).unwrap();
        let b = random_pure(&mut rng, 4, 5);
        let cfg = RnqmrConfig {
            eta: 0.7,
            ..Default::default()
        };
        let solver = RnqmrSolver::new(&dict, cfg).unwrap();
        let (x, _) = update_x(&solver.initial_state(), &b, &dict, solver.ridge(), cfg.mu).unwrap();

        let nq = NqmrSolver::new(
            &dict,
            NqmrConfig {
                lambda: 0.7,
                ..Default::default()
            },
        )
        .unwrap();
        let mut ns = nq.initial_state();
        nq.iterate(&b, &mut ns).unwrap();
        let diff: f64 = x.as_slice().iter().zip(ns.x.as_slice()).map(|(a, b)| (*a - *b).norm_sqr()).sum();
        assert!(diff.sqrt() < 1e-12);

        let (x0, _) = update_x(
            &solver.initial_state(),
            &QuaternionMatrix::zeros(4, 5),
            &dict,
            solver.ridge(),
            cfg.mu,
        )
        .unwrap();
        assert!(x0.l2_norm() < 1e-14);
    }

    #[test]
    fn e0_from_zero_is_uniform_svt() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = RnqmrConfig {
            omega: 0.01,
            ..Default::default()
        };
        let mut s = random_state(&mut rng, 4, 4, 2);
        s.e0 = QuaternionMatrix::zeros(4, 4);
        let (e0, w) = update_e0(&s, &random_pure(&mut rng, 4, 4), &cfg);
        let gamma = (cfg.omega / cfg.mu) / cfg.epsilon_log;
        assert!(w.as_slice().iter().all(|&v| (v - gamma).abs() < 1e-12));
        assert_eq!(w.len(), 4);
        assert!(e0.is_finite());

        let b = s.reconstruction.clone();
        let mut z = s.clone();
        z.e1 = QuaternionMatrix::zeros(4, 4);
        z.e2 = QuaternionMatrix::zeros(4, 4);
        z.multiplier = QuaternionMatrix::zeros(4, 4);
        let (e0, _) = update_e0(&z, &b, &cfg);
        assert_eq!(e0.frobenius_norm(), 0.0);
    }

    #[test]
    fn e0_weighted_diagonal_case() {
        // target diag(5, 2) as a real quaternion matrix; previous E0 chosen
        // so that the weights are exactly (1, 3)
        let cfg = RnqmrConfig {
            omega: 1.0,
            mu: 1.0,
            epsilon_log: 1e-2,
            ..Default::default()
        };
        let prev = [1.0 - cfg.epsilon_log, 1.0 / 3.0 - cfg.epsilon_log];
        let diag = |a: f64, b: f64| {
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a, b]));
            let z = DMatrix::zeros(2, 2);
            QuaternionMatrix::from_components([&d, &z, &z, &z]).unwrap()
        };
        let mut s = RnqmrState::initial(1, 2, 2);
        s.e0 = diag(prev[0], prev[1]);
        let (e0, w) = update_e0(&s, &diag(5.0, 2.0), &cfg);
        assert!((w.as_slice()[0] - 1.0).abs() < 1e-12);
        assert!((w.as_slice()[1] - 3.0).abs() < 1e-12);
        assert!((&e0 - &diag(4.0, 0.0)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn e1_pixel_shrinkage() {
        let cfg = RnqmrConfig {
            alpha: 2.0,
            mu: 1.0,
            ..Default::default()
        };
        let mut b = QuaternionMatrix::from_fn(3, 3, |_, _| Quaternion::pure(0.5, 0.5, 0.5));
        b.set(1, 2, Quaternion::pure(3.0, 4.0, 0.0));
        let s = RnqmrState::initial(1, 3, 3);
        let e1 = update_e1(&s, &b, &cfg);
        for r in 0..3 {
            for c in 0..3 {
                if (r, c) == (1, 2) {
                    let p = e1.get(r, c);
                    assert!((p.x - 1.8).abs() < 1e-12 && (p.y - 2.4).abs() < 1e-12);
                } else {
                    assert_eq!(e1.get(r, c), Quaternion::ZERO);
                }
            }
        }
        let big = RnqmrConfig { alpha: 10.0, ..cfg };
        assert_eq!(update_e1(&s, &b, &big).frobenius_norm(), 0.0);
    }

    #[test]
    fn e2_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_state(&mut rng, 3, 4, 2);
        let b = random_pure(&mut rng, 3, 4);
        let cfg = RnqmrConfig {
            beta: 1.0,
            mu: 1.0,
            ..Default::default()
        };
        let target = e2_target(&s, &b, &cfg);
        assert!((&update_e2(&s, &b, &cfg) - &target.scale(0.5)).frobenius_norm() < 1e-14);
        let tiny = RnqmrConfig { beta: 1e-12, ..cfg };
        assert!((&update_e2(&s, &b, &tiny) - &target).frobenius_norm() < 1e-10);
    }

    #[test]
    fn returns_last_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let atoms: Vec<_> = (0..3).map(|_| random_pure(&mut rng, 4, 4)).collect();
        let dict = Dictionary::new(atoms).unwrap();
        let b = random_pure(&mut rng, 4, 4);
        let sol = solve_rnqmr(&dict, &b, &RnqmrConfig::default()).unwrap();
        assert_eq!(sol.final_weights, sol.state.weights);
        assert_eq!(sol.final_weights.len(), 4);
        assert_eq!(sol.trace.len(), sol.iterations);
    }

    #[test]
    fn cached_spectrum_matches_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let atoms: Vec<_> = (0..4).map(|_| random_pure(&mut rng, 5, 4)).collect();
        let dict = Dictionary::new(atoms).unwrap();
        let b = random_pure(&mut rng, 5, 4);
        let solver = RnqmrSolver::new(&dict, RnqmrConfig::default()).unwrap();
        let mut state = solver.initial_state();
        for _ in 0..5 {
            solver.iterate(&b, &mut state).unwrap();
            let cached = state.e0_spectrum.clone().unwrap();
            let fresh = state.e0.singular_values();
            assert_eq!(cached.len(), fresh.len());
            for (c, f) in cached.iter().zip(&fresh) {
                assert!((c - f).abs() < 1e-9, "{c} vs {f}");
            }
        }
    }
}
