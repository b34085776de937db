//! Shared fixtures for unit tests.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dissipator, hermitian_part, ComplexMatrix, SuperOperator};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
    hermitian_part(&random_matrix(n, n, seed))
}

/// Random full-rank density matrix.
pub fn random_density(n: usize, seed: u64) -> ComplexMatrix {
    let g = random_matrix(n, n, seed);
    let mut rho = &g * g.adjoint();
    let tr: C64 = (0..n).map(|i| rho[(i, i)]).sum();
    rho = &rho * faer::Scale(tr.inv());
    hermitian_part(&rho)
}

/// Hamiltonian plus two random jump operators; generically has a unique
/// steady state.
pub fn random_stable_liouvillian(n: usize, seed: u64) -> SuperOperator {
    let h = random_hermitian(n, seed);
    let mut l = SuperOperator::hamiltonian(&h).unwrap();
    for k in 0..2 {
        l += &dissipator(&random_matrix(n, n, seed * 31 + k + 1)).unwrap();
    }
    l
}

pub fn assert_mat_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()), "shape");
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let d = (a[(i, j)] - b[(i, j)]).norm();
            assert!(d <= tol, "entry ({i},{j}): {} vs {} (|diff| {d:e})", a[(i, j)], b[(i, j)]);
        }
    }
}

/// Pearson correlation coefficient.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
