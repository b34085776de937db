//! Random-time probing: Poisson-arriving photons pass an interaction region
//! `a` and are detected in a region `b` behind a polarizing splitter.
//!
//! Full space is `system ⊗ a ⊗ b`, both photon factors ordered
//! `(+, -, V)`: two circular polarizations and the vacuum.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{build_lindblad, check_rate, HilbertFactor, JumpTerm, LiouvillianModel, SystemSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, identity, kron, kron_all, outer, ComplexMatrix, HERMITIAN_TOLERANCE};

pub const INTERACTION: &str = "a";
pub const DETECTOR: &str = "b";
const PLUS: usize = 0;
const MINUS: usize = 1;
const VAC: usize = 2;

/// Rates in 1/ns; `g` in rad/ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomTimeParams {
    pub g: f64,
    pub gamma_p: f64,
    pub gamma_out: f64,
    pub gamma_det: f64,
    pub beta2: f64,
}

impl RandomTimeParams {
    /// Single-spin probe settings: strong coupling, fast photon escape and a
    /// sparse photon stream.
    pub fn single_spin() -> Self {
        Self {
            g: 100.0,
            gamma_p: 0.5,
            gamma_out: 100.0,
            gamma_det: 100.0,
            beta2: 1e4,
        }
    }

    pub fn two_spin() -> Self {
        Self {
            g: 50.0,
            gamma_p: 5.0,
            ..Self::single_spin()
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.g.is_finite() {
            return Err(Error::InvalidParameter {
                name: "g".into(),
                reason: format!("must be finite, got {}", self.g),
            });
        }
        check_rate("gamma_p", self.gamma_p)?;
        check_rate("gamma_out", self.gamma_out)?;
        check_rate("gamma_det", self.gamma_det)?;
        check_rate("beta2", self.beta2)
    }
}

fn photon_factor(label: &str) -> HilbertFactor {
    HilbertFactor::new(label, &["+", "-", "V"]).expect("static basis")
}

fn ket(coeffs: [C64; 2]) -> [C64; 3] {
    [coeffs[0], coeffs[1], C64::ZERO]
}

fn vac() -> [C64; 3] {
    let mut v = [C64::ZERO; 3];
    v[VAC] = C64::ONE;
    v
}

/// Circular polarization basis `(+, -)`.
pub fn circular_basis() -> [[C64; 2]; 2] {
    [[C64::ONE, C64::ZERO], [C64::ZERO, C64::ONE]]
}

/// Linear basis `0 = (+ + -)/sqrt2`, `90 = (+ - -)/sqrt2`.
pub fn linear_basis() -> [[C64; 2]; 2] {
    let h = c(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// `sum_k |a_V><a_k| ⊗ |b_k><b_V|` on `a ⊗ b` (9x9) for the polarization
/// basis whose rows give each state's `(+, -)` coefficients. Independent of
/// the basis as long as it is orthonormal.
pub fn polarization_transfer(basis: &[[C64; 2]; 2]) -> ComplexMatrix {
    let mut d = Mat::<C64>::zeros(9, 9);
    for k in basis {
        d += kron(&outer(&vac(), &ket(*k)), &outer(&ket(*k), &vac()));
    }
    d
}

/// `|b_V><b_k|` on the detector factor for each state of `basis`.
pub fn detector_emptying(basis: &[[C64; 2]; 2]) -> [ComplexMatrix; 2] {
    [outer(&vac(), &ket(basis[0])), outer(&vac(), &ket(basis[1]))]
}

/// `L = i[rho, H_s + g s_c ⊗ a_z ⊗ 1] + gamma_p D[d_a] + gamma_out D[d_ab]
///  + gamma_det (D[d_be,0] + D[d_be,90]) + beta^2 D[A] + system jumps`.
pub fn build_random_time_model(
    system: &SystemSpec,
    coupling: &ComplexMatrix,
    p: &RandomTimeParams,
) -> Result<LiouvillianModel> {
    p.validate()?;
    let ds = system.dim();
    if coupling.nrows() != ds || coupling.ncols() != ds {
        return Err(Error::DimensionMismatch {
            what: "probe coupling operator".into(),
            expected: ds,
            got: coupling.nrows(),
        });
    }
    let defect = hermiticity_defect(coupling);
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian("probe coupling operator".into(), defect));
    }
    let is = identity(ds);
    let i3 = identity(3);
    let on_photons = |ab: &ComplexMatrix| kron(&is, ab);

    let a_z = Mat::from_fn(3, 3, |i, j| match (i, j) {
        (PLUS, PLUS) => c(0.5, 0.0),
        (MINUS, MINUS) => c(-0.5, 0.0),
        _ => C64::ZERO,
    });
    let h_int = kron_all([coupling, &a_z, &i3]) * faer::Scale(c(p.g, 0.0));
    let h = kron(&system.hamiltonian, &identity(9)) + h_int;

    let a45 = [c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2), C64::ZERO];
    let d_a = kron_all([&is, &outer(&a45, &vac()), &i3]);
    let d_ab = on_photons(&polarization_transfer(&circular_basis()));
    let [e0, e90] = detector_emptying(&linear_basis());

    let lin = linear_basis();
    let proj = |k: usize| outer(&ket(lin[k]), &ket(lin[k]));
    let readout = (proj(0) - proj(1)) * faer::Scale(c(0.5, 0.0));
    let a = kron_all([&is, &i3, &readout]);

    let mut jumps = vec![
        JumpTerm::new("photon in", p.gamma_p, d_a)?,
        JumpTerm::new("interaction to detector", p.gamma_out, d_ab)?,
        JumpTerm::new("detector empty 0", p.gamma_det, kron_all([&is, &i3, &e0]))?,
        JumpTerm::new("detector empty 90", p.gamma_det, kron_all([&is, &i3, &e90]))?,
    ];
    for j in &system.jumps {
        jumps.push(JumpTerm::new(&j.label, j.rate, kron(&j.operator, &identity(9)))?);
    }

    let mut factors = system.factors.clone();
    factors.push(photon_factor(INTERACTION));
    factors.push(photon_factor(DETECTOR));
    let mut model = build_lindblad(factors, h, jumps, a, p.beta2)?;
    model.set_system_factors(system.factors.len());
    let params = model.params_mut();
    params.extend(system.params.iter().map(|(k, v)| (k.clone(), *v)));
    for (k, v) in [
        ("g", p.g),
        ("gamma_p", p.gamma_p),
        ("gamma_out", p.gamma_out),
        ("gamma_det", p.gamma_det),
        ("beta2", p.beta2),
    ] {
        params.insert(k.to_string(), v);
    }
    Ok(model)
}
