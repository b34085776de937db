//! Dense complex linear algebra: Kronecker products, column-stacking
//! vectorization, superoperators, the biorthonormal eigendecomposition of
//! non-Hermitian generators and the matrix exponential.
//!
//! Matrices are `faer::Mat<C64>`. Vectorization stacks columns, so
//! `vec(A X B) = (B^T kron A) vec(X)`.

mod blocks;
mod eigen;
mod expm;
mod superop;

pub use blocks::{block_decompose, BlockDecomposition, ModeBlock, CLUSTER_RADIUS, PARALLEL_EIGENVECTORS};
pub use eigen::{bordered_null_state, eig_biorthonormal, eigenvalues, SpectralDecomposition, ZERO_TOLERANCE};
pub use expm::{expm, expm_unit};
pub use superop::{dissipator, SparseSuperOperator, SuperOperator};

use faer::{Col, Mat};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Dense complex matrix; carrier for operators, superoperators and states.
pub type ComplexMatrix = Mat<C64>;

/// Tolerance used by the Hermiticity checks on operators.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Kronecker product with block layout `(a kron b)[i*rb + k, j*cb + l] = a[i,j] b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Mat::zeros(a.nrows() * rb, a.ncols() * cb);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let aij = a[(i, j)];
            if aij == C64::ZERO {
                continue;
            }
            for l in 0..cb {
                for k in 0..rb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of an ordered list of factors.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    let mut it = factors.into_iter();
    let first = match it.next() {
        Some(m) => m.clone(),
        None => return Mat::identity(1, 1),
    };
    it.fold(first, |acc, m| kron(&acc, m))
}

/// Column-stacking vectorization of a square matrix.
pub fn vectorize(rho: &ComplexMatrix) -> Result<Col<C64>> {
    let n = ensure_square(rho)?;
    Ok(Col::from_fn(n * n, |k| rho[(k % n, k / n)]))
}

/// Inverse of [`vectorize`]; the length must be a perfect square.
pub fn unvectorize(v: &Col<C64>) -> Result<ComplexMatrix> {
    let len = v.nrows();
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::DimensionMismatch {
            what: "vectorized matrix length".into(),
            expected: n * n,
            got: len,
        });
    }
    Ok(Mat::from_fn(n, n, |i, j| v[j * n + i]))
}

pub fn identity(n: usize) -> ComplexMatrix {
    Mat::identity(n, n)
}

pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint().to_owned()
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Largest entrywise deviation `max |M - M^dagger|`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && hermiticity_defect(m) <= tol
}

/// `(M + M^dagger) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        (m[(i, j)] + m[(j, i)].conj()) * 0.5
    })
}

/// Largest entrywise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue_hermitian(m: &ComplexMatrix) -> Result<f64> {
    let h = hermitian_part(m);
    let vals = h
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

/// `|ket><bra|` from two coefficient vectors.
pub fn outer(ket: &[C64], bra: &[C64]) -> ComplexMatrix {
    Mat::from_fn(ket.len(), bra.len(), |i, j| ket[i] * bra[j].conj())
}

/// Solve `A X = B` by partial-pivot LU.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    use faer::linalg::solvers::Solve;
    a.partial_piv_lu().solve(b)
}

/// Inverse by partial-pivot LU.
pub fn inverse(a: &ComplexMatrix) -> ComplexMatrix {
    use faer::linalg::solvers::DenseSolveCore;
    a.partial_piv_lu().inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_mat_close, random_matrix};

    fn diag(vals: &[f64]) -> ComplexMatrix {
        Mat::from_fn(vals.len(), vals.len(), |i, j| {
            if i == j {
                c(vals[i], 0.0)
            } else {
                C64::ZERO
            }
        })
    }

    #[test]
    fn kron_identities() {
        assert_mat_close(&kron(&identity(2), &identity(3)), &identity(6), 0.0);
        let sz = diag(&[1.0, -1.0]);
        assert_mat_close(&kron(&sz, &identity(2)), &diag(&[1.0, 1.0, -1.0, -1.0]), 0.0);
    }

    #[test]
    fn kron_matches_index_formula() {
        let a = random_matrix(2, 2, 11);
        let b = random_matrix(3, 3, 12);
        let k = kron(&a, &b);
        assert_eq!((k.nrows(), k.ncols()), (6, 6));
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        assert_eq!(k[(3 * i + p, 3 * j + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
        let rect = kron(&random_matrix(2, 3, 1), &random_matrix(4, 5, 2));
        assert_eq!((rect.nrows(), rect.ncols()), (8, 15));
    }

    #[test]
    fn kron_is_associative() {
        let a = random_matrix(2, 2, 1);
        let b = random_matrix(3, 2, 2);
        let cc = random_matrix(2, 3, 3);
        assert_mat_close(&kron(&kron(&a, &b), &cc), &kron(&a, &kron(&b, &cc)), 1e-13);
    }

    #[test]
    fn vectorize_identity_and_roundtrip() {
        let v = vectorize(&identity(2)).unwrap();
        let expect = [1.0, 0.0, 0.0, 1.0];
        for (k, e) in expect.iter().enumerate() {
            assert_eq!(v[k], c(*e, 0.0));
        }
        let r = random_matrix(4, 4, 7);
        assert_mat_close(&unvectorize(&vectorize(&r).unwrap()).unwrap(), &r, 0.0);
        assert!(matches!(
            vectorize(&random_matrix(2, 3, 1)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn vec_of_product_uses_column_stacking() {
        for seed in 0..5 {
            let a = random_matrix(3, 3, 100 + seed);
            let x = random_matrix(3, 3, 200 + seed);
            let b = random_matrix(3, 3, 300 + seed);
            let lhs = vectorize(&(&a * &x * &b)).unwrap();
            let op = kron(&b.transpose().to_owned(), &a);
            let rhs = &op * vectorize(&x).unwrap();
            for k in 0..9 {
                assert!((lhs[k] - rhs[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_helpers() {
        let r = random_matrix(5, 5, 3);
        let h = hermitian_part(&r);
        assert!(is_hermitian(&h, 1e-15));
        assert!(!is_hermitian(&r, 1e-3));
        let m = min_eigenvalue_hermitian(&diag(&[0.3, -0.2, 1.0])).unwrap();
        assert!((m + 0.2).abs() < 1e-14);
    }
}
