//! Real-valued spectral and proximal operators plus the cached ridge solver
//! shared by both ADMM loops.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};

use crate::error::{QmrError, Result};

/// Per-singular-value thresholds, indexed in the order of a nonincreasing
/// spectrum.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(QmrError::InvalidInput(format!("weight {w} is not a finite nonnegative number")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weight for position `i`; positions past the end reuse the last
    /// weight, an empty vector yields zero.
    pub fn get_padded(&self, i: usize) -> f64 {
        match self.0.get(i) {
            Some(&w) => w,
            None => self.0.last().copied().unwrap_or(0.0),
        }
    }

    /// Each weight repeated `factor` times, mapping quaternion-spectrum
    /// weights onto the embedded spectrum.
    pub fn repeat_each(&self, factor: usize) -> WeightVector {
        WeightVector(self.0.iter().flat_map(|&w| std::iter::repeat_n(w, factor)).collect())
    }
}

/// Thin SVD `U diag(s) V^T` with `s` nonincreasing.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    pub fn recompose(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (mut col, s) in us.column_iter_mut().zip(self.s.iter()) {
            col *= *s;
        }
        us * &self.v_t
    }

    fn transpose(self) -> ThinSvd {
        ThinSvd {
            u: self.v_t.transpose(),
            s: self.s,
            v_t: self.u.transpose(),
        }
    }
}

fn faer_thin_svd(m: &DMatrix<f64>) -> Option<ThinSvd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    let svd = faer::Mat::from_fn(r, c, |i, j| m[(i, j)]).thin_svd().ok()?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Some(ThinSvd {
        u: DMatrix::from_fn(r, k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v_t: DMatrix::from_fn(k, c, |i, j| v[(j, i)]),
    })
}

fn nalgebra_thin_svd(m: &DMatrix<f64>) -> Option<ThinSvd> {
    let svd = SVD::new(m.clone(), true, true);
    let out = ThinSvd {
        u: svd.u?,
        s: svd.singular_values,
        v_t: svd.v_t?,
    };
    let tolerance = 1e-12 * (m.nrows().max(m.ncols()) as f64) * out.s.max().max(f64::MIN_POSITIVE);
    ((out.recompose() - m).amax() <= tolerance).then_some(out)
}

/// Thin SVD of a finite matrix.
///
/// Real embeddings of quaternion matrices have every singular value four
/// times over, which trips up both pure-Rust backends now and then:
/// nalgebra may return factors that recompose with errors near 1e-4, and
/// faer's bidiagonal iteration may report non-convergence. The faster
/// nalgebra result is kept only if it recomposes the input; otherwise faer
/// is tried on the matrix and then on its transpose.
pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let (r, c) = m.shape();
    if r.min(c) == 0 {
        return ThinSvd {
            u: DMatrix::zeros(r, 0),
            s: DVector::zeros(0),
            v_t: DMatrix::zeros(0, c),
        };
    }
    assert!(m.iter().all(|v| v.is_finite()), "SVD of non-finite matrix");
    nalgebra_thin_svd(m)
        .or_else(|| faer_thin_svd(m))
        .or_else(|| faer_thin_svd(&m.transpose()).map(ThinSvd::transpose))
        .expect("no SVD backend produced an accurate decomposition")
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    assert!(m.iter().all(|v| v.is_finite()), "SVD of non-finite matrix");
    let faer_values = |m: &DMatrix<f64>| {
        faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
            .singular_values()
            .ok()
            .map(DVector::from_vec)
    };
    faer_values(m)
        .or_else(|| faer_values(&m.transpose()))
        .unwrap_or_else(|| thin_svd(m).s)
}

/// Sum of singular values of a real matrix.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).sum()
}

/// Sum of column Euclidean norms.
pub fn l21_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

/// Returns the shrunk matrix together with its singular values (in the
/// order of the input spectrum).
fn shrink_spectrum(m: &DMatrix<f64>, threshold: impl Fn(usize) -> f64) -> (DMatrix<f64>, DVector<f64>) {
    if m.is_empty() {
        return (m.clone(), DVector::zeros(0));
    }
    let mut svd = thin_svd(m);
    for (i, s) in svd.s.iter_mut().enumerate() {
        *s = (*s - threshold(i)).max(0.0);
    }
    (svd.recompose(), svd.s)
}

/// Singular value thresholding `U diag(max(s - gamma, 0)) V^T`, the proximal
/// operator of `gamma * ||.||_*`.
pub fn svt(m: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    assert!(gamma >= 0.0, "svt threshold must be nonnegative, got {gamma}");
    shrink_spectrum(m, |_| gamma).0
}

/// Weighted singular value thresholding: singular value `i` is reduced by
/// `weights[i]` and clipped at zero.
pub fn weighted_svt(m: &DMatrix<f64>, weights: &WeightVector) -> DMatrix<f64> {
    shrink_spectrum(m, |i| weights.get_padded(i)).0
}

/// [`weighted_svt`] that also returns the thresholded singular values.
pub fn weighted_svt_with_spectrum(m: &DMatrix<f64>, weights: &WeightVector) -> (DMatrix<f64>, DVector<f64>) {
    shrink_spectrum(m, |i| weights.get_padded(i))
}

/// Columnwise shrinkage, the proximal operator of `t * ||.||_{2,1}`.
pub fn l21_shrink(z: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    assert!(threshold >= 0.0, "l21 threshold must be nonnegative, got {threshold}");
    let mut out = z.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm > threshold {
            col *= (norm - threshold) / norm;
        } else {
            col.fill(0.0);
        }
    }
    out
}

/// Ridge regression `min ||H x - g||^2 + reg ||x||^2` with the normal matrix
/// factored once.
#[derive(Clone, Debug)]
pub struct RidgeSystem {
    design: DMatrix<f64>,
    regularizer: f64,
    factor: Cholesky<f64, Dyn>,
}

impl RidgeSystem {
    pub fn build(design: DMatrix<f64>, regularizer: f64) -> Result<Self> {
        if !(regularizer >= 0.0) || !regularizer.is_finite() {
            return Err(QmrError::InvalidInput(format!(
                "ridge regularizer must be finite and nonnegative, got {regularizer}"
            )));
        }
        let mut normal = design.tr_mul(&design);
        for i in 0..normal.nrows() {
            normal[(i, i)] += regularizer;
        }
        let factor = Cholesky::new(normal).ok_or(QmrError::FactorizationFailure { regularizer })?;
        // Cholesky only rejects nonpositive pivots; reject numerically
        // singular systems as well.
        let diag = factor.l_dirty().diagonal();
        let max = diag.max();
        if diag.iter().any(|&d| d <= max * 1e-7) {
            return Err(QmrError::FactorizationFailure { regularizer });
        }
        Ok(Self {
            design,
            regularizer,
            factor,
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    pub fn solve(&self, g: &DVector<f64>) -> DVector<f64> {
        assert_eq!(g.len(), self.design.nrows(), "ridge rhs length mismatch");
        let rhs = self.design.tr_mul(g);
        self.factor.solve(&rhs)
    }
}

pub fn build_ridge(design: DMatrix<f64>, regularizer: f64) -> Result<RidgeSystem> {
    RidgeSystem::build(design, regularizer)
}

pub fn ridge_solve(system: &RidgeSystem, g: &DVector<f64>) -> DVector<f64> {
    system.solve(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_direction(rng: &mut ChaCha8Rng, r: usize, c: usize, norm: f64) -> DMatrix<f64> {
        let d = random_matrix(rng, r, c);
        let n = d.norm();
        d * (norm / n)
    }

    #[test]
    fn svt_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let out = svt(&m, 2.0);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 5, 3);
        assert!((svt(&m, 0.0) - &m).norm() < 1e-10);
        assert!((weighted_svt(&m, &WeightVector::uniform(0.0, 3).unwrap()) - &m).norm() < 1e-10);
    }

    #[test]
    fn svt_beats_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 3, 3);
        let gamma = 0.5;
        let out = svt(&m, gamma);
        let objective = |x: &DMatrix<f64>| gamma * nuclear_norm(x) + 0.5 * (x - &m).norm_squared();
        let best = objective(&out);
        for _ in 0..1000 {
            let d = random_direction(&mut rng, 3, 3, 1e-3);
            assert!(objective(&(&out + d)) >= best - 1e-12);
        }
    }

    #[test]
    fn weighted_svt_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 2.0]));
        let out = weighted_svt(&m, &WeightVector::new(vec![1.0, 3.0]).unwrap());
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0]));
        assert!((out - expected).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 4, 6);
        let w = WeightVector::uniform(0.3, 4).unwrap();
        assert!((weighted_svt(&m, &w) - svt(&m, 0.3)).norm() < 1e-12);
    }

    #[test]
    fn weighted_svt_pads_with_last_weight() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 4.0, 3.0]));
        let out = weighted_svt(&m, &WeightVector::new(vec![1.0, 2.0]).unwrap());
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0, 1.0]));
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn weight_vector_rejects_negative() {
        assert!(WeightVector::new(vec![1.0, -0.1]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap().repeat_each(2);
        assert_eq!(w.as_slice(), &[1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn l21_examples() {
        let z = DMatrix::from_column_slice(4, 2, &[3.0, 4.0, 0.0, 0.0, 0.1, 0.1, 0.1, 0.1]);
        let out = l21_shrink(&z, 2.0);
        let expected = DMatrix::from_column_slice(4, 2, &[1.8, 2.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((out - expected).norm() < 1e-12);
        assert_eq!(l21_shrink(&z, 0.0), z);
        // exactly at the threshold the column is zeroed
        assert_eq!(l21_shrink(&z, 5.0).column(0).norm(), 0.0);
    }

    #[test]
    fn ridge_identity_design() {
        let g = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let sys = build_ridge(DMatrix::identity(4, 4), 1.0).unwrap();
        assert!((ridge_solve(&sys, &g) - &g / 2.0).norm() < 1e-14);
        let sys = build_ridge(DMatrix::identity(4, 4), 1e-12).unwrap();
        assert!((ridge_solve(&sys, &g) - &g).norm() < 1e-10);
    }

    #[test]
    fn ridge_singular_design_fails_at_zero_reg() {
        let design = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            build_ridge(design.clone(), 0.0),
            Err(QmrError::FactorizationFailure { .. })
        ));
        assert!(build_ridge(design, 0.1).is_ok());
        assert!(build_ridge(DMatrix::identity(2, 2), -1.0).is_err());
    }
}
