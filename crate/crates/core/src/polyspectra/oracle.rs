//! Slow reference paths that avoid the eigendecomposition: steady state by a
//! bordered linear solve, resolvents by LU, moments by matrix exponentials
//! and the fourth-order integrals by adaptive quadrature.

use std::f64::consts::TAU;

use faer::{Col, Mat};
use num_complex::Complex64 as C64;

use super::engine::{permutations4, S4Terms};
use super::quadrature::{integrate_real_line, QuadratureOptions};
use crate::error::{Error, Result};
use crate::linalg::{
    bordered_null_state, expm, max_abs, min_eigenvalue_hermitian, solve, trace, vectorize,
    BlockDecomposition, ComplexMatrix, SuperOperator, I,
};
use crate::model::{measurement_superop, modified_measurement_superop, LiouvillianModel};

/// Residual `|L vec(rho0)|` allowed relative to `|L|` (Frobenius).
pub const STEADY_STATE_RESIDUAL: f64 = 1e-10;

/// Unit-trace Hermitian null vector of the Liouvillian.
///
/// Solved twice with different bordering rows; disagreement or a large
/// residual means the null space is not one-dimensional.
pub fn steady_state(model: &LiouvillianModel) -> Result<ComplexMatrix> {
    let l = model.liouvillian();
    let n = l.dim();
    let first = bordered_null_state(l, 0)?;
    let norm_l = l.matrix().norm_l2();
    let residual = |rho: &ComplexMatrix| -> Result<f64> {
        Ok(l.apply_vec(&vectorize(rho)?).norm_l2())
    };
    let r1 = residual(&first)?;
    let finite = (0..n).all(|j| (0..n).all(|i| first[(i, j)].is_finite()));
    if !finite || r1 > STEADY_STATE_RESIDUAL * norm_l {
        return Err(Error::NonUniqueSteadyState {
            count: 2,
            tolerance: STEADY_STATE_RESIDUAL * norm_l,
        });
    }
    if n > 1 {
        let second = bordered_null_state(l, n - 1)?;
        let diff = max_abs(&(&first - &second));
        if !(diff < 1e-8) {
            return Err(Error::NonUniqueSteadyState {
                count: 2,
                tolerance: diff,
            });
        }
    }
    Ok(first)
}

/// Checks of a candidate steady state: residual relative to `|L|`, trace
/// and smallest eigenvalue.
#[derive(Clone, Copy, Debug)]
pub struct SteadyStateReport {
    pub relative_residual: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

pub fn steady_state_report(model: &LiouvillianModel, rho0: &ComplexMatrix) -> Result<SteadyStateReport> {
    let l = model.liouvillian();
    let res = l.apply_vec(&vectorize(rho0)?).norm_l2() / l.matrix().norm_l2();
    Ok(SteadyStateReport {
        relative_residual: res,
        trace: trace(rho0).re,
        min_eigenvalue: min_eigenvalue_hermitian(rho0)?,
    })
}

/// `G'(w) = V diag(-(T_b + i w)^{-1}) V^{-1}` with the null block zeroed,
/// assembled densely.
pub fn g_prime(decomp: &BlockDecomposition, w: f64) -> SuperOperator {
    let k = decomp.eigenvalues().len();
    let mut g = Mat::<C64>::zeros(k, k);
    for b in decomp.blocks() {
        if b.start() == decomp.null_index() {
            continue;
        }
        let (s, p) = (b.start(), b.len());
        for j in 0..p {
            for i in (0..=j).rev() {
                let mut acc = if i == j { -C64::ONE } else { C64::ZERO };
                for m in i + 1..=j {
                    acc -= b.at(i, m) * g[(s + m, s + j)];
                }
                g[(s + i, s + j)] = acc / (b.at(i, i) + I * w);
            }
        }
    }
    SuperOperator::from_matrix(decomp.dim(), decomp.right() * &g * decomp.left_adjoint()).expect("square")
}

/// Resolvent form `G'(w) = -(L - P0 + i w)^{-1} (1 - P0)` with
/// `P0 = vec(rho0) vec(I)^dagger`, evaluated by LU.
pub struct Resolvent {
    l: ComplexMatrix,
    p0: ComplexMatrix,
    complement: ComplexMatrix,
    dim: usize,
}

impl Resolvent {
    pub fn new(l: &SuperOperator, rho0: &ComplexMatrix) -> Result<Self> {
        let n = l.dim();
        let k = n * n;
        let v = vectorize(rho0)?;
        let p0 = Mat::from_fn(k, k, |i, j| if j % (n + 1) == 0 { v[i] } else { C64::ZERO });
        let complement = Mat::<C64>::identity(k, k) - &p0;
        Ok(Self {
            l: l.matrix() - &p0,
            p0,
            complement,
            dim: n,
        })
    }

    pub fn projector(&self) -> &ComplexMatrix {
        &self.p0
    }

    pub fn matrix(&self, w: f64) -> ComplexMatrix {
        let k = self.l.nrows();
        let shifted = Mat::from_fn(k, k, |i, j| self.l[(i, j)] + if i == j { I * w } else { C64::ZERO });
        solve(&shifted, &self.complement) * faer::Scale(C64::new(-1.0, 0.0))
    }

    /// `G'(w) x` for a single vector.
    pub fn apply(&self, w: f64, x: &Col<C64>) -> Col<C64> {
        let k = self.l.nrows();
        let shifted = Mat::from_fn(k, k, |i, j| self.l[(i, j)] + if i == j { I * w } else { C64::ZERO });
        let rhs = Mat::from_fn(k, 1, |i, _| x[i]) - &self.p0 * Mat::from_fn(k, 1, |i, _| x[i]);
        let y = solve(&shifted, &rhs);
        Col::from_fn(k, |i| -y[(i, 0)])
    }

    pub fn superoperator(&self, w: f64) -> SuperOperator {
        SuperOperator::from_matrix(self.dim, self.matrix(w)).expect("square")
    }
}

/// `beta^{2n} Tr(A G(t_n - t_{n-1}) A ... G(t_2 - t_1) A rho0)` for
/// strictly increasing times, `1 <= n <= 4`.
pub fn moments_oracle(model: &LiouvillianModel, times: &[f64]) -> Result<C64> {
    if times.is_empty() || times.len() > 4 {
        return Err(Error::InvalidParameter {
            name: "times".into(),
            reason: format!("need between 1 and 4 times, got {}", times.len()),
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::UnorderedTimes);
    }
    let rho0 = steady_state(model)?;
    let a = measurement_superop(model.measurement_op())?;
    let mut v = a.apply_vec(&vectorize(&rho0)?);
    for w in times.windows(2) {
        let g = expm(model.liouvillian().matrix(), w[1] - w[0])?;
        v = a.apply_vec(&(&g * &v));
    }
    let n = model.dim();
    let tr: C64 = (0..n).map(|i| v[i * n + i]).sum();
    Ok(tr * model.beta2().powi(times.len() as i32))
}

/// Fourth-order cut terms at `(w1, w2, -w1, -w2)` with the convolution
/// integrals done by adaptive quadrature over resolvents. Only practical for
/// small models.
pub fn s4_terms_quadrature(
    model: &LiouvillianModel,
    w1: f64,
    w2: f64,
    opts: QuadratureOptions,
) -> Result<S4Terms> {
    let rho0 = steady_state(model)?;
    let res = Resolvent::new(model.liouvillian(), &rho0)?;
    let ap = modified_measurement_superop(model.measurement_op(), &rho0)?;
    let n = model.dim();
    let k = n * n;
    // Row vector vec(I)^T A'.
    let trace_row: Vec<C64> = (0..k)
        .map(|col| (0..n).map(|d| ap.matrix()[(d * n + d, col)]).sum())
        .collect();
    let v0 = ap.apply_vec(&vectorize(&rho0)?);
    let dot = |row: &[C64], col: &Col<C64>| -> C64 { row.iter().enumerate().map(|(i, r)| r * col[i]).sum() };
    // row * G'(w) via the transpose solve: (G'(w)^T row^T)^T.
    let row_times = |row: &[C64], w: f64| -> Vec<C64> {
        let g = res.matrix(w);
        (0..k).map(|j| (0..k).map(|i| row[i] * g[(i, j)]).sum()).collect()
    };
    let scale = max_abs(model.liouvillian().matrix()).max(1.0);
    let ws = [w1, w2, -w1, -w2];
    let mut out = S4Terms::default();
    for [kk, _, m, nn] in permutations4() {
        let wn = ws[nn];
        let big_w = ws[m] + ws[nn];
        let wp = -ws[kk];
        let p = row_times(&trace_row, wn);
        let apg = {
            let gp = res.matrix(wp);
            let a_gv = ap.apply_vec(&(&gp * &v0));
            let g_big = res.matrix(big_w);
            let pa: Vec<C64> = {
                let pm = Mat::from_fn(1, k, |_, j| p[j]);
                let r = &pm * ap.matrix();
                (0..k).map(|j| r[(0, j)]).collect()
            };
            dot(&pa, &(&g_big * &a_gv))
        };
        out.triple += apg;

        let q = res.apply(wp, &v0);
        let first = integrate_real_line(
            |w| dot(&p, &res.apply(big_w - w, &v0)) * dot(&trace_row, &res.apply(w, &q)),
            scale,
            opts,
        )?;
        let p2 = row_times(&p, wp);
        let second = integrate_real_line(
            |w| dot(&p2, &res.apply(big_w - w, &v0)) * dot(&trace_row, &res.apply(w, &v0)),
            scale,
            opts,
        )?;
        out.first_integral += first.value / TAU;
        out.second_integral += second.value / TAU;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block_decompose, c, outer};
    use crate::model::spin::{sx, sz};
    use crate::model::{build_continuous_model, build_lindblad, single_spin_system, spin::spin_factor};
    use crate::polyspectra::SpectralEngine;
    use crate::testutil::assert_mat_close;

    fn dephased(w: f64, b2: f64) -> LiouvillianModel {
        build_continuous_model(&single_spin_system(w).unwrap(), &sz(), b2).unwrap()
    }

    #[test]
    fn steady_states() {
        let d = outer(&[c(1.0, 0.0), C64::ZERO], &[C64::ZERO, c(1.0, 0.0)]);
        let decay = build_lindblad(
            vec![spin_factor("q")],
            Mat::zeros(2, 2),
            vec![crate::model::JumpTerm::new("decay", 0.9, d).unwrap()],
            Mat::zeros(2, 2),
            0.0,
        )
        .unwrap();
        let rho = steady_state(&decay).unwrap();
        assert_mat_close(&rho, &outer(&[C64::ONE, C64::ZERO], &[C64::ONE, C64::ZERO]), 1e-12);

        let rho = steady_state(&dephased(1.3, 0.4)).unwrap();
        assert_mat_close(&rho, &(crate::linalg::identity(2) * faer::Scale(c(0.5, 0.0))), 1e-12);
        let rep = steady_state_report(&dephased(1.3, 0.4), &rho).unwrap();
        assert!(rep.relative_residual < 1e-14 && (rep.trace - 1.0).abs() < 1e-14);

        // Pure precession has a two-dimensional null space.
        let free = build_lindblad(vec![spin_factor("q")], sx(), vec![], sz(), 0.0).unwrap();
        assert!(matches!(steady_state(&free), Err(Error::NonUniqueSteadyState { .. })));
    }

    #[test]
    fn g_prime_two_routes_agree() {
        let m = dephased(2.0, 0.5);
        let dec = block_decompose(m.liouvillian()).unwrap();
        let res = Resolvent::new(m.liouvillian(), dec.steady_state()).unwrap();
        for w in [-3.0, 0.0, 0.7, 25.0] {
            let a = g_prime(&dec, w);
            let b = res.superoperator(w);
            assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-10);
        }
        // Decays like 1/w.
        let far = max_abs(g_prime(&dec, 1e6).matrix());
        assert!(far < 2e-6 && far > 1e-8);
    }

    #[test]
    fn single_mode_resolvent_norm() {
        let gamma = 0.8;
        let d = outer(&[c(1.0, 0.0), C64::ZERO], &[C64::ZERO, c(1.0, 0.0)]);
        let m = build_lindblad(
            vec![spin_factor("q")],
            Mat::zeros(2, 2),
            vec![crate::model::JumpTerm::new("decay", gamma, d).unwrap()],
            Mat::zeros(2, 2),
            0.0,
        )
        .unwrap();
        let dec = block_decompose(m.liouvillian()).unwrap();
        let g0 = g_prime(&dec, 0.0);
        // The excited population mode (lambda = -gamma) is mapped to -1/lambda = 1/gamma.
        let rho = outer(&[C64::ZERO, C64::ONE], &[C64::ZERO, C64::ONE]) - outer(&[C64::ONE, C64::ZERO], &[C64::ONE, C64::ZERO]);
        let out = g0.apply(&rho).unwrap();
        assert_mat_close(&out, &(rho * faer::Scale(c(1.0 / gamma, 0.0))), 1e-12);
    }

    #[test]
    fn moments_basic() {
        let m = dephased(2.0, 0.5);
        let one = moments_oracle(&m, &[0.3]).unwrap();
        assert!(one.norm() < 1e-14);
        assert!(matches!(moments_oracle(&m, &[1.0, 0.5]), Err(Error::UnorderedTimes)));
        assert!(moments_oracle(&m, &[1.0, 1.0]).is_err());
        // Biased model: long separation factorizes.
        let mut sys = single_spin_system(2.0).unwrap();
        sys.jumps.push(crate::model::JumpTerm::new("relax", 0.5, crate::model::spin::lowering()).unwrap());
        let m = build_continuous_model(&sys, &sz(), 0.5).unwrap();
        let mean = moments_oracle(&m, &[0.0]).unwrap();
        let far = moments_oracle(&m, &[0.0, 200.0]).unwrap();
        assert!((far - mean * mean).norm() < 1e-10 * mean.norm_sqr());
        let e = SpectralEngine::new(&m).unwrap();
        assert!((mean.re - e.mean_output()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_terms_match_closed_form_at_one_point() {
        let mut sys = single_spin_system(2.0).unwrap();
        sys.jumps.push(crate::model::JumpTerm::new("relax", 0.5, crate::model::spin::lowering()).unwrap());
        let m = build_continuous_model(&sys, &sz(), 0.8).unwrap();
        let e = SpectralEngine::new(&m).unwrap();
        let closed = e.s4_terms_grid(&[1.1], &[-0.4])[0];
        let quad = s4_terms_quadrature(&m, 1.1, -0.4, QuadratureOptions::default()).unwrap();
        for (a, b) in [
            (closed.triple, quad.triple),
            (closed.first_integral, quad.first_integral),
            (closed.second_integral, quad.second_integral),
        ] {
            assert!((a - b).norm() < 1e-7 * b.norm(), "{a} vs {b}");
        }
    }
}
