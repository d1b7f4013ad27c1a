//! Quaternion scalars, vectors and matrices, together with the real
//! embeddings used to move every optimization step into real arithmetic.
//!
//! Three embeddings are provided:
//!
//! * [`embed_matrix`]: `M x N` quaternion matrix to the structured `4M x 4N`
//!   real matrix whose block pattern encodes left multiplication,
//! * [`embed_vector`]: length-`N` quaternion vector to the stacked real
//!   vector `(q0, q1, q2, q3)` of length `4N`,
//! * [`channel_stack`]: `M x N` quaternion matrix to a `4 x MN` real matrix
//!   holding one column per pixel.
//!
//! A note on constants: the Frobenius norm of the matrix embedding is
//! `2 * ||Q||_F` (each component is copied four times), while the nuclear
//! norm scales by `4`. Only the nuclear-norm factor is used to derive
//! quaternion spectra.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};

use crate::error::{shape_mismatch, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    /// Pure quaternion `r i + g j + b k`, the encoding of one RGB pixel.
    pub const fn pure(r: f64, g: f64, b: f64) -> Self {
        Self::new(0.0, r, g, b)
    }

    pub fn components(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_components(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn modulus(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_pure(self) -> bool {
        self.w == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

/// Hamilton product; `i * j = k`, `j * i = -k`.
pub fn quat_mul(p: Quaternion, q: Quaternion) -> Quaternion {
    Quaternion::new(
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    )
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        quat_mul(self, rhs)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: f64) -> Quaternion {
        self.scale(rhs)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.w + rhs.w, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.w - rhs.w, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, rhs: Quaternion) {
        *self = *self + rhs;
    }
}

impl SubAssign for Quaternion {
    fn sub_assign(&mut self, rhs: Quaternion) {
        *self = *self - rhs;
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i{:+}j{:+}k", self.w, self.x, self.y, self.z)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuaternionVector {
    data: Vec<Quaternion>,
}

impl QuaternionVector {
    pub fn new(data: Vec<Quaternion>) -> Self {
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![Quaternion::ZERO; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Quaternion] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Quaternion] {
        &mut self.data
    }

    pub fn into_inner(self) -> Vec<Quaternion> {
        self.data
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|q| q.is_finite())
    }
}

impl std::ops::Index<usize> for QuaternionVector {
    type Output = Quaternion;
    fn index(&self, i: usize) -> &Quaternion {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for QuaternionVector {
    fn index_mut(&mut self, i: usize) -> &mut Quaternion {
        &mut self.data[i]
    }
}

impl FromIterator<Quaternion> for QuaternionVector {
    fn from_iter<I: IntoIterator<Item = Quaternion>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Dense quaternion matrix stored column-major, so that the storage order
/// coincides with `vec(Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuaternionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Quaternion>,
}

impl QuaternionMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Quaternion::ZERO; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Quaternion) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from column-major data.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<Quaternion>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_mismatch(
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Assembles `Q0 + Q1 i + Q2 j + Q3 k` from its four real components.
    pub fn from_components(parts: [&DMatrix<f64>; 4]) -> Result<Self> {
        let (rows, cols) = parts[0].shape();
        for p in &parts[1..] {
            if p.shape() != (rows, cols) {
                return Err(shape_mismatch(format!("{rows}x{cols}"), format!("{:?}", p.shape())));
            }
        }
        Ok(Self::from_fn(rows, cols, |r, c| {
            Quaternion::new(parts[0][(r, c)], parts[1][(r, c)], parts[2][(r, c)], parts[3][(r, c)])
        }))
    }

    /// Reshapes a vectorized matrix back to `rows x cols`.
    pub fn from_vector(rows: usize, cols: usize, v: QuaternionVector) -> Result<Self> {
        Self::from_column_major(rows, cols, v.into_inner())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> Quaternion {
        self.data[c * self.rows + r]
    }

    pub fn set(&mut self, r: usize, c: usize, q: Quaternion) {
        self.data[c * self.rows + r] = q;
    }

    /// Column-major entries, i.e. `vec(Q)`.
    pub fn as_slice(&self) -> &[Quaternion] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Quaternion] {
        &mut self.data
    }

    pub fn vectorize(&self) -> QuaternionVector {
        QuaternionVector::new(self.data.clone())
    }

    /// Real component `t` (0 = real part, 1..=3 = i, j, k parts).
    pub fn component(&self, t: usize) -> DMatrix<f64> {
        assert!(t < 4, "component index {t} out of range");
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).components()[t])
    }

    pub fn is_pure(&self) -> bool {
        self.data.iter().all(|q| q.is_pure())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|q| q.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(Quaternion) -> Quaternion) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&q| f(q)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|q| q.scale(s))
    }

    /// Entrywise `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &QuaternionMatrix) -> Self {
        assert_eq!(self.shape(), other.shape(), "add_scaled: shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b.scale(s))
                .collect(),
        }
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// Quaternion matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &QuaternionMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(shape_mismatch(
                format!("rhs with {} rows", self.cols),
                format!("{} rows", rhs.rows),
            ));
        }
        Ok(Self::from_fn(self.rows, rhs.cols, |r, c| {
            (0..self.cols).fold(Quaternion::ZERO, |acc, k| acc + self.get(r, k) * rhs.get(k, c))
        }))
    }

    /// Quaternion matrix-vector product `self * p`.
    pub fn mul_vector(&self, p: &QuaternionVector) -> Result<QuaternionVector> {
        if self.cols != p.len() {
            return Err(shape_mismatch(format!("vector of length {}", self.cols), p.len()));
        }
        Ok((0..self.rows)
            .map(|r| (0..self.cols).fold(Quaternion::ZERO, |acc, k| acc + self.get(r, k) * p[k]))
            .collect())
    }

    /// Sum of entry moduli.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|q| q.modulus()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Sum of quaternion singular values, computed as a quarter of the
    /// nuclear norm of the real embedding.
    pub fn nuclear_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        embed_matrix(self).singular_values().sum() / 4.0
    }

    /// Quaternion singular values in nonincreasing order, one per quadruple
    /// of the embedded spectrum.
    pub fn singular_values(&self) -> Vec<f64> {
        let embedded = embed_matrix(self).singular_values();
        quadruple_representatives(embedded.as_slice())
    }
}

/// Picks one value out of each group of four equal embedded singular
/// values. The input must be sorted in nonincreasing order.
pub fn quadruple_representatives(embedded: &[f64]) -> Vec<f64> {
    debug_assert!(embedded.len() % 4 == 0);
    let scale = embedded.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    embedded
        .chunks(4)
        .map(|quad| {
            debug_assert!(
                quad.iter().all(|&s| (s - quad[0]).abs() <= 1e-6 * scale),
                "embedded singular values are not grouped in quadruples: {quad:?}"
            );
            quad[0]
        })
        .collect()
}

impl Add for &QuaternionMatrix {
    type Output = QuaternionMatrix;
    fn add(self, rhs: &QuaternionMatrix) -> QuaternionMatrix {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &QuaternionMatrix {
    type Output = QuaternionMatrix;
    fn sub(self, rhs: &QuaternionMatrix) -> QuaternionMatrix {
        self.add_scaled(-1.0, rhs)
    }
}

/// Real `4M x 4N` embedding of an `M x N` quaternion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RealEmbedding(DMatrix<f64>);

impl RealEmbedding {
    /// Wraps an arbitrary real matrix. Its dimensions must be multiples of
    /// four; it need not carry the exact block structure.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r % 4 != 0 || c % 4 != 0 {
            return Err(shape_mismatch("dimensions divisible by 4", format!("{r}x{c}")));
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Dimensions of the quaternion matrix this embeds.
    pub fn quaternion_shape(&self) -> (usize, usize) {
        (self.0.nrows() / 4, self.0.ncols() / 4)
    }

    /// Singular values of the real matrix in nonincreasing order.
    pub fn singular_values(&self) -> DVector<f64> {
        crate::linalg::singular_values(&self.0)
    }
}

/// Component index and sign of block `(row, col)` in the embedding.
const BLOCK_PATTERN: [[(usize, f64); 4]; 4] = [
    [(0, 1.0), (1, -1.0), (2, -1.0), (3, -1.0)],
    [(1, 1.0), (0, 1.0), (3, -1.0), (2, 1.0)],
    [(2, 1.0), (3, 1.0), (0, 1.0), (1, -1.0)],
    [(3, 1.0), (2, -1.0), (1, 1.0), (0, 1.0)],
];

pub fn embed_matrix(q: &QuaternionMatrix) -> RealEmbedding {
    let (m, n) = q.shape();
    let mut out = DMatrix::zeros(4 * m, 4 * n);
    for c in 0..n {
        for r in 0..m {
            let comps = q.get(r, c).components();
            for (bi, pattern_row) in BLOCK_PATTERN.iter().enumerate() {
                for (bj, &(t, sign)) in pattern_row.iter().enumerate() {
                    out[(bi * m + r, bj * n + c)] = sign * comps[t];
                }
            }
        }
    }
    RealEmbedding(out)
}

/// Inverse of [`embed_matrix`]. Each component is the signed average of its
/// four occurrences, which is the orthogonal projection onto the image of
/// the embedding; the inverse is exact on structured input.
pub fn unembed_matrix(e: &RealEmbedding) -> QuaternionMatrix {
    let (m, n) = e.quaternion_shape();
    let a = &e.0;
    QuaternionMatrix::from_fn(m, n, |r, c| {
        let mut acc = [0.0; 4];
        for (bi, pattern_row) in BLOCK_PATTERN.iter().enumerate() {
            for (bj, &(t, sign)) in pattern_row.iter().enumerate() {
                acc[t] += sign * a[(bi * m + r, bj * n + c)];
            }
        }
        Quaternion::from_components(acc.map(|v| v / 4.0))
    })
}

/// Stacks the four component vectors: `(q0, q1, q2, q3)`.
pub fn embed_vector(q: &QuaternionVector) -> DVector<f64> {
    let n = q.len();
    let mut out = DVector::zeros(4 * n);
    for (i, p) in q.as_slice().iter().enumerate() {
        for (t, v) in p.components().into_iter().enumerate() {
            out[t * n + i] = v;
        }
    }
    out
}

pub fn unembed_vector(v: &DVector<f64>) -> Result<QuaternionVector> {
    if v.len() % 4 != 0 {
        return Err(shape_mismatch("length divisible by 4", v.len()));
    }
    let n = v.len() / 4;
    Ok((0..n)
        .map(|i| Quaternion::new(v[i], v[n + i], v[2 * n + i], v[3 * n + i]))
        .collect())
}

/// `4 x MN` matrix whose row `t` is `vec(Q_t)`; column `j` is pixel `j`.
pub fn channel_stack(q: &QuaternionMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(4, q.len());
    for (j, p) in q.as_slice().iter().enumerate() {
        out.set_column(j, &nalgebra::Vector4::from(p.components()));
    }
    out
}

pub fn channel_unstack(stacked: &DMatrix<f64>, rows: usize, cols: usize) -> Result<QuaternionMatrix> {
    if stacked.nrows() != 4 || stacked.ncols() != rows * cols {
        return Err(shape_mismatch(
            format!("4x{}", rows * cols),
            format!("{}x{}", stacked.nrows(), stacked.ncols()),
        ));
    }
    Ok(QuaternionMatrix::from_fn(rows, cols, |r, c| {
        let j = c * rows + r;
        Quaternion::new(stacked[(0, j)], stacked[(1, j)], stacked[(2, j)], stacked[(3, j)])
    }))
}
