use std::ops::{Add, AddAssign};

use faer::{Col, Mat};
use num_complex::Complex64 as C64;

use super::{ensure_square, identity, kron, unvectorize, vectorize, ComplexMatrix, I};
use crate::error::{Error, Result};

/// Linear map on `N x N` matrices, stored as an `N^2 x N^2` matrix acting on
/// column-stacked vectors.
#[derive(Clone, Debug)]
pub struct SuperOperator {
    dim: usize,
    matrix: ComplexMatrix,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        let n2 = dim * dim;
        if matrix.nrows() != n2 || matrix.ncols() != n2 {
            return Err(Error::DimensionMismatch {
                what: "superoperator matrix".into(),
                expected: n2,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { dim, matrix })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: Mat::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: Mat::identity(dim * dim, dim * dim),
        }
    }

    /// `X -> A X B`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self> {
        let n = ensure_square(a)?;
        let nb = ensure_square(b)?;
        if n != nb {
            return Err(Error::DimensionMismatch {
                what: "right factor".into(),
                expected: n,
                got: nb,
            });
        }
        Ok(Self {
            dim: n,
            matrix: kron(&b.transpose().to_owned(), a),
        })
    }

    /// `X -> A X`.
    pub fn left(a: &ComplexMatrix) -> Result<Self> {
        let n = ensure_square(a)?;
        Ok(Self {
            dim: n,
            matrix: kron(&identity(n), a),
        })
    }

    /// `X -> X B`.
    pub fn right(b: &ComplexMatrix) -> Result<Self> {
        let n = ensure_square(b)?;
        Ok(Self {
            dim: n,
            matrix: kron(&b.transpose().to_owned(), &identity(n)),
        })
    }

    /// Coherent part `rho -> i [rho, H]` with `H` in angular-frequency units.
    pub fn hamiltonian(h: &ComplexMatrix) -> Result<Self> {
        let right = Self::right(h)?;
        let left = Self::left(h)?;
        Ok(Self {
            dim: right.dim,
            matrix: (&right.matrix - &left.matrix) * faer::Scale(I),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            matrix: &self.matrix * faer::Scale(C64::new(s, 0.0)),
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "density matrix".into(),
                expected: self.dim,
                got: rho.nrows(),
            });
        }
        let v = &self.matrix * vectorize(rho)?;
        unvectorize(&v)
    }

    pub fn apply_vec(&self, v: &Col<C64>) -> Col<C64> {
        &self.matrix * v
    }

    /// Max over columns of `|sum_k M[(k,k), col]|`: how far the map is from
    /// annihilating the trace functional.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for col in 0..n * n {
            let s: C64 = (0..n).map(|k| self.matrix[(k * n + k, col)]).sum();
            worst = worst.max(s.norm());
        }
        worst
    }

    pub fn compose(&self, other: &SuperOperator) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn max_abs(&self) -> f64 {
        super::max_abs(&self.matrix)
    }

    fn check_dim(&self, other: &SuperOperator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                what: "superoperator".into(),
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    /// Compressed sparse form for repeated matrix-vector products.
    pub fn to_sparse(&self) -> SparseSuperOperator {
        SparseSuperOperator::from_dense(&self.matrix)
    }
}

impl Add for &SuperOperator {
    type Output = SuperOperator;

    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim, rhs.dim, "superoperator dimensions differ");
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl AddAssign<&SuperOperator> for SuperOperator {
    fn add_assign(&mut self, rhs: &SuperOperator) {
        assert_eq!(self.dim, rhs.dim, "superoperator dimensions differ");
        self.matrix += &rhs.matrix;
    }
}

/// Lindblad dissipator `D[d](rho) = d rho d^dagger - (d^dagger d rho + rho d^dagger d) / 2`.
pub fn dissipator(d: &ComplexMatrix) -> Result<SuperOperator> {
    let n = ensure_square(d)?;
    let dd = d.adjoint() * d;
    let jump = kron(&d.conjugate().to_owned(), d);
    let left = kron(&identity(n), &dd);
    let right = kron(&dd.transpose().to_owned(), &identity(n));
    let half = faer::Scale(C64::new(0.5, 0.0));
    Ok(SuperOperator {
        dim: n,
        matrix: jump - (left + right) * half,
    })
}

/// Row-compressed superoperator; the SME integrator applies the generator
/// millions of times and most entries vanish.
#[derive(Clone, Debug)]
pub struct SparseSuperOperator {
    size: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseSuperOperator {
    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let size = m.nrows();
        let mut row_ptr = Vec::with_capacity(size + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..size {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != C64::ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            size,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = M x`.
    pub fn mul_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.size);
        for (i, o) in out.iter_mut().enumerate().take(self.size) {
            let mut acc = C64::ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}
