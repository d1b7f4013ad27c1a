//! The training dictionary `H = (vec(A_1), ..., vec(A_L))` and the linear map
//! `A(x) = A_1 x_1 + ... + A_L x_L`.

use nalgebra::DMatrix;

use crate::error::{shape_mismatch, QmrError, Result};
use crate::linalg::RidgeSystem;
use crate::quat::{embed_matrix, embed_vector, unembed_vector, Quaternion, QuaternionMatrix, QuaternionVector};

/// `A(x)` evaluated entry by entry in quaternion arithmetic.
///
/// Coefficients multiply from the right (`A_l x_l`), which is the product
/// realized by `P(H) Q(x)` in the embedded ridge step.
pub fn combine(atoms: &[QuaternionMatrix], x: &QuaternionVector) -> Result<QuaternionMatrix> {
    if atoms.len() != x.len() {
        return Err(shape_mismatch(format!("{} coefficients", atoms.len()), x.len()));
    }
    let Some(first) = atoms.first() else {
        return Err(QmrError::InvalidInput("empty dictionary".into()));
    };
    let (rows, cols) = first.shape();
    let mut out = QuaternionMatrix::zeros(rows, cols);
    for (atom, &coeff) in atoms.iter().zip(x.as_slice()) {
        if atom.shape() != (rows, cols) {
            return Err(shape_mismatch(format!("{rows}x{cols}"), format!("{:?}", atom.shape())));
        }
        for (o, &a) in out.as_mut_slice().iter_mut().zip(atom.as_slice()) {
            *o += a * coeff;
        }
    }
    Ok(out)
}

/// `L` same-shaped images together with their embedded stacking `P(H)`,
/// a `4MN x 4L` real matrix.
#[derive(Clone, Debug)]
pub struct Dictionary {
    rows: usize,
    cols: usize,
    atoms: Vec<QuaternionMatrix>,
    embedded: DMatrix<f64>,
}

impl Dictionary {
    pub fn new(atoms: Vec<QuaternionMatrix>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(QmrError::InvalidInput("dictionary needs at least one image".into()));
        };
        let (rows, cols) = first.shape();
        if rows == 0 || cols == 0 {
            return Err(QmrError::InvalidInput("dictionary images must be nonempty".into()));
        }
        if let Some(bad) = atoms.iter().find(|a| a.shape() != (rows, cols)) {
            return Err(shape_mismatch(format!("{rows}x{cols}"), format!("{:?}", bad.shape())));
        }
        let mn = rows * cols;
        let stacked = QuaternionMatrix::from_fn(mn, atoms.len(), |r, c| atoms[c].as_slice()[r]);
        let embedded = embed_matrix(&stacked).into_inner();
        Ok(Self {
            rows,
            cols,
            atoms,
            embedded,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Shape of each image.
    pub fn image_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn atoms(&self) -> &[QuaternionMatrix] {
        &self.atoms
    }

    pub fn embedded(&self) -> &DMatrix<f64> {
        &self.embedded
    }

    /// Factors `P(H)^T P(H) + reg I` for repeated coefficient updates.
    pub fn ridge_system(&self, regularizer: f64) -> Result<RidgeSystem> {
        RidgeSystem::build(self.embedded.clone(), regularizer)
    }

    /// `A(x)` through the embedding: `vec(A(x)) = Q^{-1}(P(H) Q(x))`.
    pub fn reconstruct(&self, x: &QuaternionVector) -> Result<QuaternionMatrix> {
        if x.len() != self.len() {
            return Err(shape_mismatch(format!("{} coefficients", self.len()), x.len()));
        }
        let v = &self.embedded * embed_vector(x);
        QuaternionMatrix::from_vector(self.rows, self.cols, unembed_vector(&v)?)
    }

    /// Coefficients minimizing `||A(x) - target||_F^2 + reg ||x||^2`.
    pub fn ridge_fit(&self, system: &RidgeSystem, target: &QuaternionMatrix) -> Result<QuaternionVector> {
        if target.shape() != (self.rows, self.cols) {
            return Err(shape_mismatch(
                format!("{}x{}", self.rows, self.cols),
                format!("{:?}", target.shape()),
            ));
        }
        let g = embed_vector(&target.vectorize());
        unembed_vector(&system.solve(&g))
    }
}

/// Unit real coefficient at position `k`.
pub fn unit_coefficients(len: usize, k: usize) -> QuaternionVector {
    let mut x = QuaternionVector::zeros(len);
    x[k] = Quaternion::ONE;
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(rng: &mut ChaCha8Rng) -> Quaternion {
        Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    fn random_atoms(rng: &mut ChaCha8Rng, l: usize, m: usize, n: usize) -> Vec<QuaternionMatrix> {
        (0..l)
            .map(|_| QuaternionMatrix::from_fn(m, n, |_, _| random_q(rng)))
            .collect()
    }

    #[test]
    fn unit_and_zero_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let atoms = random_atoms(&mut rng, 3, 2, 4);
        assert_eq!(combine(&atoms, &unit_coefficients(3, 1)).unwrap(), atoms[1]);
        assert_eq!(combine(&atoms, &QuaternionVector::zeros(3)).unwrap(), QuaternionMatrix::zeros(2, 4));
    }

    #[test]
    fn embedded_route_matches_direct_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let atoms = random_atoms(&mut rng, 4, 3, 5);
        let x: QuaternionVector = (0..4).map(|_| random_q(&mut rng)).collect();
        let direct = combine(&atoms, &x).unwrap();
        let dict = Dictionary::new(atoms).unwrap();
        let via = dict.reconstruct(&x).unwrap();
        assert!((&direct - &via).frobenius_norm() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let atoms = vec![QuaternionMatrix::zeros(2, 2), QuaternionMatrix::zeros(2, 3)];
        assert!(matches!(
            combine(&atoms, &QuaternionVector::zeros(2)),
            Err(QmrError::ShapeMismatch { .. })
        ));
        assert!(Dictionary::new(atoms).is_err());
        assert!(Dictionary::new(vec![]).is_err());
        let atoms = vec![QuaternionMatrix::zeros(2, 2)];
        assert!(combine(&atoms, &QuaternionVector::zeros(2)).is_err());
    }
}
