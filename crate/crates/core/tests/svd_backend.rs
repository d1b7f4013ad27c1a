//! Embedded spectra are exactly fourfold degenerate. These fixtures are
//! embeddings captured from solver runs on which one of the SVD backends
//! misbehaves; the wrapper must still decompose them accurately.

use nalgebra::DMatrix;
use qmr_core::linalg::{singular_values, svt, thin_svd};
use qmr_core::quat::{embed_matrix, quadruple_representatives, unembed_matrix};
use qmr_core::RealEmbedding;

fn fixture(name: &str) -> DMatrix<f64> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn check(m: &DMatrix<f64>) {
    let svd = thin_svd(m);
    let top = svd.s[0];
    assert!((svd.recompose() - m).amax() <= 1e-13 * top * 32.0);
    let k = svd.s.len();
    assert!((svd.u.tr_mul(&svd.u) - DMatrix::identity(k, k)).amax() < 1e-12);
    assert!((&svd.v_t * svd.v_t.transpose() - DMatrix::identity(k, k)).amax() < 1e-12);
    assert!(svd.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    for quad in svd.s.as_slice().chunks(4) {
        assert!(quad.iter().all(|s| (s - quad[0]).abs() <= 1e-12 * top), "{quad:?}");
    }
    assert!((singular_values(m) - &svd.s).amax() <= 1e-12 * top);
    // still a valid embedding after thresholding
    let shrunk = svt(m, svd.s[6]);
    let round_trip = embed_matrix(&unembed_matrix(&RealEmbedding::new(shrunk.clone()).unwrap()));
    assert!((round_trip.matrix() - &shrunk).norm() < 1e-10);
    quadruple_representatives(singular_values(&shrunk).as_slice());
}

#[test]
fn decomposes_matrix_with_nonconvergent_bidiagonal_iteration() {
    check(&fixture("faer_nonconvergent.txt"));
}

#[test]
fn decomposes_matrix_with_inaccurate_implicit_shift_factors() {
    check(&fixture("nalgebra_inaccurate.txt"));
}

#[test]
fn rectangular_and_empty() {
    let m = DMatrix::from_fn(3, 7, |i, j| ((i * 7 + j) as f64).sin());
    let svd = thin_svd(&m);
    assert_eq!((svd.u.shape(), svd.s.len(), svd.v_t.shape()), ((3, 3), 3, (3, 7)));
    assert!((svd.recompose() - &m).amax() < 1e-13);
    let svd = thin_svd(&m.transpose());
    assert!((svd.recompose() - m.transpose()).amax() < 1e-13);
    assert_eq!(thin_svd(&DMatrix::zeros(0, 4)).s.len(), 0);
    assert_eq!(singular_values(&DMatrix::zeros(4, 0)).len(), 0);
}
