use faer::Mat;
use log::debug;
use num_complex::Complex64 as C64;

use super::{hermitian_part, inverse, solve, trace, unvectorize, vectorize, ComplexMatrix, SuperOperator};
use crate::error::{Error, Result};

/// Relative cutoff (times `max |lambda|`) below which an eigenvalue counts as zero.
pub const ZERO_TOLERANCE: f64 = 1e-9;
/// Eigenvalues closer than this (relative) share a cluster for Gram-Schmidt.
const CLUSTER_TOLERANCE: f64 = 1e-9;
/// Largest accepted eigenvector condition number `max_j |l_j| |r_j|`.
const MAX_CONDITION: f64 = 1e8;
const BIORTHONORMAL_TOLERANCE: f64 = 1e-8;
/// Residual `|L vec(rho0)|` (relative to `|L|`) above which the null vector
/// is polished by a bordered solve.
const STEADY_STATE_POLISH: f64 = 1e-12;

/// Eigenvalues of a generic square matrix.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    super::ensure_square(m)?;
    m.eigenvalues()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Eigendecomposition of a Liouvillian with biorthonormal left and right
/// eigenvectors (`l_i^dagger r_j = delta_ij`) and the identified steady state.
///
/// The right eigenvector of the null eigenvalue is `vec(rho0)` with unit
/// trace, and the matching left eigenvector is the trace functional `vec(I)`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    dim: usize,
    eigenvalues: Vec<C64>,
    right: ComplexMatrix,
    left_adj: ComplexMatrix,
    null_index: usize,
    zero_tolerance: f64,
    condition: f64,
    steady_state: ComplexMatrix,
}

impl SpectralDecomposition {
    /// Hilbert-space dimension `N` (the superoperator is `N^2 x N^2`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    /// Right eigenvectors as columns.
    pub fn right(&self) -> &ComplexMatrix {
        &self.right
    }

    /// Left eigenvectors, conjugated, as rows: row `j` is `l_j^dagger`.
    pub fn left_adjoint(&self) -> &ComplexMatrix {
        &self.left_adj
    }

    pub fn null_index(&self) -> usize {
        self.null_index
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.zero_tolerance
    }

    /// `max_j |l_j| |r_j|`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn steady_state(&self) -> &ComplexMatrix {
        &self.steady_state
    }

    /// `sum_j lambda_j r_j l_j^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n2 = self.eigenvalues.len();
        let scaled = Mat::from_fn(n2, n2, |i, j| self.right[(i, j)] * self.eigenvalues[j]);
        &scaled * &self.left_adj
    }

    /// Largest `|l_i^dagger r_j - delta_ij|`.
    pub fn biorthonormality_defect(&self) -> f64 {
        let p = &self.left_adj * &self.right;
        let mut worst = 0.0f64;
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                let target = if i == j { C64::ONE } else { C64::ZERO };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// Full biorthonormal eigendecomposition of `l`.
///
/// Fails when the null space is not one-dimensional, when an eigenvalue has a
/// positive real part beyond tolerance, or when the eigenvector basis is too
/// ill-conditioned (near-defective) to biorthonormalize.
pub fn eig_biorthonormal(l: &SuperOperator) -> Result<SpectralDecomposition> {
    let m = l.matrix();
    let n2 = m.nrows();
    let evd = m
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S();
    let values: Vec<C64> = (0..n2).map(|i| s[i]).collect();
    let mut right = evd.U().to_owned();
    for j in 0..n2 {
        normalize_column(&mut right, j);
    }

    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::NonUniqueSteadyState {
            count: n2,
            tolerance: 0.0,
        });
    }
    let tol = ZERO_TOLERANCE * scale;
    let zeros: Vec<usize> = (0..n2).filter(|&j| values[j].norm() < tol).collect();
    let null_index = match zeros.len() {
        1 => zeros[0],
        0 => {
            let smallest = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            return Err(Error::NoSteadyState(smallest));
        }
        count => return Err(Error::NonUniqueSteadyState { count, tolerance: tol }),
    };
    if let Some(bad) = values.iter().find(|v| v.re > tol) {
        return Err(Error::Eigensolver(format!(
            "eigenvalue {bad} has positive real part; generator is not stable"
        )));
    }

    orthonormalize_clusters(&values, &mut right, CLUSTER_TOLERANCE * scale)?;

    let dim = l.dim();
    let mut rho0 = unvectorize(&right.col(null_index).to_owned())?;
    let tr = trace(&rho0);
    rho0 = hermitian_part(&(&rho0 * faer::Scale(tr.inv())));
    let residual = (l.apply_vec(&vectorize(&rho0)?)).norm_l2();
    if residual > STEADY_STATE_POLISH * m.norm_l2() {
        debug!("polishing steady state (residual {residual:e})");
        rho0 = bordered_null_state(l, 0)?;
    }
    let v0 = vectorize(&rho0)?;
    for i in 0..n2 {
        right[(i, null_index)] = v0[i];
    }

    let mut left_adj = inverse(&right);
    // Left null vector is the trace functional.
    for col in 0..n2 {
        let on_diag = col % (dim + 1) == 0;
        left_adj[(null_index, col)] = if on_diag { C64::ONE } else { C64::ZERO };
    }

    let mut condition = 0.0f64;
    for j in 0..n2 {
        if j == null_index {
            continue;
        }
        let ln = left_adj.row(j).norm_l2();
        condition = condition.max(ln * right.col(j).norm_l2());
    }
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::NotDiagonalizable(format!(
            "eigenvector condition number {condition:e} exceeds {MAX_CONDITION:e}"
        )));
    }

    let decomp = SpectralDecomposition {
        dim,
        eigenvalues: values,
        right,
        left_adj,
        null_index,
        zero_tolerance: tol,
        condition,
        steady_state: rho0,
    };
    let defect = decomp.biorthonormality_defect();
    if defect > BIORTHONORMAL_TOLERANCE {
        return Err(Error::NotDiagonalizable(format!(
            "biorthonormality defect {defect:e}"
        )));
    }
    debug!(
        "eigendecomposition: {n2} modes, condition {:.3e}, biorthonormality {:.1e}",
        decomp.condition, defect
    );
    Ok(decomp)
}

/// Null vector of `l` normalized to unit trace, found by replacing the row
/// of diagonal entry `(k, k)` with the trace functional.
///
/// Valid because the diagonal rows of a trace-preserving generator sum to
/// zero, so any one of them is redundant.
pub fn bordered_null_state(l: &SuperOperator, k: usize) -> Result<ComplexMatrix> {
    let n = l.dim();
    let n2 = n * n;
    let row = k * n + k;
    let mut a = l.matrix().clone();
    for col in 0..n2 {
        a[(row, col)] = if col % (n + 1) == 0 { C64::ONE } else { C64::ZERO };
    }
    let mut b = Mat::<C64>::zeros(n2, 1);
    b[(row, 0)] = C64::ONE;
    let x = solve(&a, &b);
    let rho = unvectorize(&x.col(0).to_owned())?;
    Ok(hermitian_part(&rho))
}

fn normalize_column(m: &mut ComplexMatrix, j: usize) {
    let norm = m.col(j).norm_l2();
    if norm > 0.0 {
        for i in 0..m.nrows() {
            m[(i, j)] /= norm;
        }
    }
}

/// Modified Gram-Schmidt on the right eigenvectors of each cluster of
/// (numerically) equal eigenvalues.
fn orthonormalize_clusters(values: &[C64], right: &mut ComplexMatrix, tol: f64) -> Result<()> {
    let n = values.len();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let cluster: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && (values[j] - values[i]).norm() < tol)
            .collect();
        for &j in &cluster {
            assigned[j] = true;
        }
        if cluster.len() < 2 {
            continue;
        }
        for (pos, &j) in cluster.iter().enumerate() {
            for &prev in &cluster[..pos] {
                let proj: C64 = (0..right.nrows())
                    .map(|r| right[(r, prev)].conj() * right[(r, j)])
                    .sum();
                for r in 0..right.nrows() {
                    let p = right[(r, prev)];
                    right[(r, j)] -= proj * p;
                }
            }
            let norm = right.col(j).norm_l2();
            if norm < 1e-8 {
                return Err(Error::NotDiagonalizable(format!(
                    "eigenvalue cluster near {} of size {} is defective",
                    values[i],
                    cluster.len()
                )));
            }
            normalize_column(right, j);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, dissipator, max_abs, outer};
    use crate::testutil::random_stable_liouvillian;

    fn decay(gamma: f64) -> SuperOperator {
        let d = outer(&[c(1.0, 0.0), C64::ZERO], &[C64::ZERO, c(1.0, 0.0)]);
        dissipator(&d).unwrap().scaled(gamma)
    }

    fn sorted_by_re(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        v
    }

    #[test]
    fn two_level_decay_spectrum() {
        let gamma = 0.7;
        let dec = eig_biorthonormal(&decay(gamma)).unwrap();
        let vals = sorted_by_re(dec.eigenvalues().to_vec());
        let expect = [0.0, -gamma / 2.0, -gamma / 2.0, -gamma];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - c(e, 0.0)).norm() < 1e-12, "{v} vs {e}");
        }
        let rho0 = dec.steady_state();
        assert!((rho0[(0, 0)] - C64::ONE).norm() < 1e-12);
        assert!(rho0[(1, 1)].norm() < 1e-12);
        assert!(dec.biorthonormality_defect() < 1e-8);
    }

    #[test]
    fn reconstruction_on_random_generators() {
        for seed in 0..5 {
            let l = random_stable_liouvillian(3, 1000 + seed);
            let dec = eig_biorthonormal(&l).unwrap();
            let rec = dec.reconstruct();
            let diff = max_abs(&(&rec - l.matrix()));
            assert!(diff < 1e-8, "seed {seed}: {diff:e}");
            assert!(dec.biorthonormality_defect() < 1e-8);
            assert!(dec
                .eigenvalues()
                .iter()
                .all(|v| v.re <= dec.zero_tolerance()));
        }
    }

    #[test]
    fn zero_generator_is_rejected() {
        let err = eig_biorthonormal(&SuperOperator::zero(2)).unwrap_err();
        assert!(matches!(err, Error::NonUniqueSteadyState { .. }));
    }

    #[test]
    fn bordered_solve_agrees_with_eigenvector() {
        let l = random_stable_liouvillian(3, 77);
        let dec = eig_biorthonormal(&l).unwrap();
        for k in 0..3 {
            let rho = bordered_null_state(&l, k).unwrap();
            assert!(max_abs(&(&rho - dec.steady_state())) < 1e-10);
        }
    }
}
