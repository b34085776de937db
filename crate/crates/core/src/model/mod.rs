//! Lindblad models: generic assembly, the continuous-measurement model and
//! the three-factor random-time photon-probe model.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{
    c, dissipator, hermiticity_defect, identity, kron_all, trace, ComplexMatrix, SuperOperator,
    HERMITIAN_TOLERANCE,
};

mod random_time;
pub mod presets;
pub mod spec;
pub mod spin;

pub use random_time::{
    build_random_time_model, polarization_transfer, RandomTimeParams, DETECTOR, INTERACTION,
};
pub use spec::{MeasurementSpec, ModelSpec, OperatorSpec, SystemDef};
pub use spin::{single_spin_system, two_spin_system};

/// Tolerance on `|Tr L(x)|` for every basis element `x`.
pub const TRACE_TOLERANCE: f64 = 1e-10;

/// One tensor factor of the full Hilbert space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertFactor {
    pub label: String,
    pub basis_labels: Vec<String>,
}

impl HilbertFactor {
    pub fn new(label: &str, basis: &[&str]) -> Result<Self> {
        let f = Self {
            label: label.to_string(),
            basis_labels: basis.iter().map(|s| s.to_string()).collect(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.basis_labels.len()
    }

    pub fn index_of(&self, basis_label: &str) -> Option<usize> {
        self.basis_labels.iter().position(|b| b == basis_label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.basis_labels.is_empty() {
            return Err(Error::ModelSpec(format!("factor '{}' has no basis states", self.label)));
        }
        for (i, b) in self.basis_labels.iter().enumerate() {
            if self.basis_labels[..i].contains(b) {
                return Err(Error::ModelSpec(format!(
                    "factor '{}' repeats basis label '{b}'",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

pub fn total_dim(factors: &[HilbertFactor]) -> usize {
    factors.iter().map(HilbertFactor::dim).product()
}

/// `gamma D[d]` with `d` acting on the full space.
#[derive(Clone, Debug)]
pub struct JumpTerm {
    pub label: String,
    pub rate: f64,
    pub operator: ComplexMatrix,
}

impl JumpTerm {
    pub fn new(label: &str, rate: f64, operator: ComplexMatrix) -> Result<Self> {
        check_rate(label, rate)?;
        Ok(Self {
            label: label.to_string(),
            rate,
            operator,
        })
    }
}

pub(crate) fn check_rate(name: &str, rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: name.into(),
            reason: format!("rate must be finite and non-negative, got {rate}"),
        })
    }
}

/// A closed-plus-dissipative system before any measurement is attached.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub factors: Vec<HilbertFactor>,
    pub hamiltonian: ComplexMatrix,
    pub jumps: Vec<JumpTerm>,
    pub params: BTreeMap<String, f64>,
}

impl SystemSpec {
    pub fn dim(&self) -> usize {
        total_dim(&self.factors)
    }

    /// Operator on factor `label`, identity elsewhere.
    pub fn local(&self, label: &str, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        let k = self
            .factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::ModelSpec(format!("unknown factor '{label}'")))?;
        let dims: Vec<usize> = self.factors.iter().map(HilbertFactor::dim).collect();
        if op.nrows() != dims[k] || op.ncols() != dims[k] {
            return Err(Error::DimensionMismatch {
                what: format!("operator on factor '{label}'"),
                expected: dims[k],
                got: op.nrows(),
            });
        }
        Ok(embed(op, k, &dims))
    }
}

/// `1 ⊗ ... ⊗ op ⊗ ... ⊗ 1` with `op` in slot `k`.
pub fn embed(op: &ComplexMatrix, k: usize, dims: &[usize]) -> ComplexMatrix {
    let parts: Vec<ComplexMatrix> = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| if i == k { op.clone() } else { identity(d) })
        .collect();
    kron_all(parts.iter())
}

/// Liouvillian `L[beta] rho = i[rho, H] + sum_j gamma_j D[d_j] rho + beta^2 D[A] rho`
/// together with the pieces it was assembled from.
#[derive(Clone, Debug)]
pub struct LiouvillianModel {
    factors: Vec<HilbertFactor>,
    system_factors: usize,
    hamiltonian: ComplexMatrix,
    jumps: Vec<JumpTerm>,
    measurement_op: ComplexMatrix,
    beta2: f64,
    liouvillian: SuperOperator,
    params: BTreeMap<String, f64>,
}

/// Assemble a Lindblad model. `H` is in angular-frequency units (already
/// divided by hbar) and must be Hermitian.
pub fn build_lindblad(
    factors: Vec<HilbertFactor>,
    hamiltonian: ComplexMatrix,
    jumps: Vec<JumpTerm>,
    measurement_op: ComplexMatrix,
    beta2: f64,
) -> Result<LiouvillianModel> {
    for f in &factors {
        f.validate()?;
    }
    let n = total_dim(&factors);
    let check = |what: &str, m: &ComplexMatrix| -> Result<()> {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: what.to_string(),
                expected: n,
                got: if m.nrows() != n { m.nrows() } else { m.ncols() },
            });
        }
        Ok(())
    };
    check("Hamiltonian", &hamiltonian)?;
    check("measurement operator", &measurement_op)?;
    for j in &jumps {
        check(&format!("jump operator '{}'", j.label), &j.operator)?;
        check_rate(&j.label, j.rate)?;
    }
    let defect = hermiticity_defect(&hamiltonian);
    if defect > HERMITIAN_TOLERANCE * crate::linalg::max_abs(&hamiltonian).max(1.0) {
        return Err(Error::NotHermitian("Hamiltonian".into(), defect));
    }
    check_rate("beta2", beta2)?;

    let system_factors = factors.len();
    let liouvillian = assemble(&hamiltonian, &jumps, &measurement_op, beta2)?;
    let mut params = BTreeMap::new();
    params.insert("beta2".to_string(), beta2);
    let model = LiouvillianModel {
        factors,
        system_factors,
        hamiltonian,
        jumps,
        measurement_op,
        beta2,
        liouvillian,
        params,
    };
    let td = model.liouvillian.trace_defect();
    if td > TRACE_TOLERANCE * model.liouvillian.max_abs().max(1.0) {
        return Err(Error::ModelSpec(format!("assembled Liouvillian is not trace preserving (defect {td:e})")));
    }
    Ok(model)
}

fn assemble(
    h: &ComplexMatrix,
    jumps: &[JumpTerm],
    a: &ComplexMatrix,
    beta2: f64,
) -> Result<SuperOperator> {
    let mut l = SuperOperator::hamiltonian(h)?;
    for j in jumps {
        if j.rate > 0.0 {
            l += &dissipator(&j.operator)?.scaled(j.rate);
        }
    }
    if beta2 > 0.0 {
        l += &dissipator(a)?.scaled(beta2);
    }
    Ok(l)
}

/// Continuous measurement of `a_sys` on a bare system.
pub fn build_continuous_model(
    system: &SystemSpec,
    a_sys: &ComplexMatrix,
    beta2: f64,
) -> Result<LiouvillianModel> {
    let defect = hermiticity_defect(a_sys);
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian("measurement operator".into(), defect));
    }
    let mut m = build_lindblad(
        system.factors.clone(),
        system.hamiltonian.clone(),
        system.jumps.clone(),
        a_sys.clone(),
        beta2,
    )?;
    m.params.extend(system.params.iter().map(|(k, v)| (k.clone(), *v)));
    m.params.insert("beta2".into(), beta2);
    Ok(m)
}

impl LiouvillianModel {
    pub fn dim(&self) -> usize {
        self.liouvillian.dim()
    }

    pub fn factors(&self) -> &[HilbertFactor] {
        &self.factors
    }

    /// Dimension of the leading factors that make up the probed system.
    pub fn system_dim(&self) -> usize {
        total_dim(&self.factors[..self.system_factors])
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[JumpTerm] {
        &self.jumps
    }

    pub fn measurement_op(&self) -> &ComplexMatrix {
        &self.measurement_op
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn beta(&self) -> f64 {
        self.beta2.sqrt()
    }

    pub fn liouvillian(&self) -> &SuperOperator {
        &self.liouvillian
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub(crate) fn set_system_factors(&mut self, k: usize) {
        self.system_factors = k;
    }

    pub(crate) fn params_mut(&mut self) -> &mut BTreeMap<String, f64> {
        &mut self.params
    }

    /// Operator on the system factors, extended by identity on the rest.
    pub fn lift_system_op(&self, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        let ds = self.system_dim();
        if op.nrows() != ds || op.ncols() != ds {
            return Err(Error::DimensionMismatch {
                what: "system operator".into(),
                expected: ds,
                got: op.nrows(),
            });
        }
        let rest = self.dim() / ds;
        Ok(crate::linalg::kron(op, &identity(rest)))
    }

    /// `A` as the superoperator `x -> (A x + x A^dagger) / 2`.
    pub fn measurement_superop(&self) -> SuperOperator {
        measurement_superop(&self.measurement_op).expect("square by construction")
    }

    /// Largest entry of (stored L) minus (L reassembled from the pieces).
    pub fn reassembly_defect(&self) -> f64 {
        let again = assemble(&self.hamiltonian, &self.jumps, &self.measurement_op, self.beta2)
            .expect("validated on construction");
        crate::linalg::max_abs(&(self.liouvillian.matrix() - again.matrix()))
    }

    /// Largest rate or frequency scale in the generator: `beta^2`, jump rates
    /// times `|d|^2`, and the Hamiltonian's entries.
    pub fn fastest_rate(&self) -> f64 {
        let mut r = self.beta2 * op_norm_sq(&self.measurement_op);
        for j in &self.jumps {
            r = r.max(j.rate * op_norm_sq(&j.operator));
        }
        r.max(crate::linalg::max_abs(&self.hamiltonian) * 2.0)
    }

    /// Short stable hash of the dimension, parameters and generator entries.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        for (k, v) in &self.params {
            h.update(k.as_bytes());
            h.update(v.to_le_bytes());
        }
        let m = self.liouvillian.matrix();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

// Largest |entry| squared of d^dagger d, a cheap bound on the decay scale.
fn op_norm_sq(d: &ComplexMatrix) -> f64 {
    crate::linalg::max_abs(&(d.adjoint() * d))
}

/// `x -> (A x + x A^dagger) / 2`.
pub fn measurement_superop(a: &ComplexMatrix) -> Result<SuperOperator> {
    let left = SuperOperator::left(a)?;
    let right = SuperOperator::right(&a.adjoint().to_owned())?;
    Ok((&left + &right).scaled(0.5))
}

/// `x -> A(x) - Tr(A(rho0)) x`.
pub fn modified_measurement_superop(a: &ComplexMatrix, rho0: &ComplexMatrix) -> Result<SuperOperator> {
    let sup = measurement_superop(a)?;
    let mean = trace(&sup.apply(rho0)?);
    let n2 = sup.matrix().nrows();
    let shift = Mat::from_fn(n2, n2, |i, j| if i == j { mean } else { C64::ZERO });
    SuperOperator::from_matrix(sup.dim(), sup.matrix() - shift)
}

/// Matrix with a single unit entry, `|i><j|`.
pub fn transition(n: usize, i: usize, j: usize) -> ComplexMatrix {
    Mat::from_fn(n, n, |r, s| if (r, s) == (i, j) { c(1.0, 0.0) } else { C64::ZERO })
}

#[cfg(test)]
mod tests {
    use super::spin::{sx, sz};
    use super::*;
    use crate::linalg::{eig_biorthonormal, eigenvalues, hermitian_part, max_abs, vectorize};
    use crate::testutil::{random_density, random_hermitian, random_matrix};

    fn qubit() -> Vec<HilbertFactor> {
        vec![spin::spin_factor("s")]
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn empty_model_is_zero() {
        let z = Mat::<C64>::zeros(2, 2);
        let m = build_lindblad(qubit(), z.clone(), vec![], z, 0.0).unwrap();
        assert_eq!(m.liouvillian().max_abs(), 0.0);
    }

    #[test]
    fn precession_spectrum() {
        let w = 3.0;
        let h = &sx() * faer::Scale(c(w, 0.0));
        let m = build_lindblad(qubit(), h, vec![], sz(), 0.0).unwrap();
        let ev = sorted(eigenvalues(m.liouvillian().matrix()).unwrap());
        let want = sorted(vec![c(0.0, -w), C64::ZERO, C64::ZERO, c(0.0, w)]);
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dephasing_shift() {
        let b2 = 0.8;
        let m = build_lindblad(qubit(), Mat::zeros(2, 2), vec![], sz(), b2).unwrap();
        let ev = sorted(eigenvalues(m.liouvillian().matrix()).unwrap());
        let want = [c(-b2 / 2.0, 0.0), c(-b2 / 2.0, 0.0), C64::ZERO, C64::ZERO];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zeno_coherence_decay_grows_with_beta() {
        let h = &sx() * faer::Scale(c(1.0, 0.0));
        let mut prev = 0.0;
        for b2 in [0.1, 1.0, 10.0] {
            let m = build_lindblad(qubit(), h.clone(), vec![], sz(), b2).unwrap();
            let ev = eigenvalues(m.liouvillian().matrix()).unwrap();
            let fastest = ev.iter().map(|v| -v.re).fold(0.0, f64::max);
            assert!(fastest > prev);
            prev = fastest;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad_h = random_matrix(2, 2, 3);
        assert!(matches!(
            build_lindblad(qubit(), bad_h, vec![], sz(), 1.0),
            Err(Error::NotHermitian(..))
        ));
        assert!(build_lindblad(qubit(), Mat::zeros(3, 3), vec![], sz(), 1.0).is_err());
        assert!(JumpTerm::new("x", -1.0, sz()).is_err());
        assert!(build_lindblad(qubit(), Mat::zeros(2, 2), vec![], sz(), -1.0).is_err());
    }

    #[test]
    fn stored_pieces_reassemble_and_preserve_trace_and_hermiticity() {
        let h = random_hermitian(3, 4);
        let jumps = vec![
            JumpTerm::new("a", 0.3, random_matrix(3, 3, 5)).unwrap(),
            JumpTerm::new("b", 1.7, random_matrix(3, 3, 6)).unwrap(),
        ];
        let f = vec![HilbertFactor::new("q", &["0", "1", "2"]).unwrap()];
        let m = build_lindblad(f, h, jumps, random_hermitian(3, 7), 2.5).unwrap();
        assert!(m.reassembly_defect() < 1e-12);
        assert!(m.liouvillian().trace_defect() < 1e-10);
        let rho = random_density(3, 8);
        let out = m.liouvillian().apply(&rho).unwrap();
        assert!(max_abs(&(&out - &hermitian_part(&out))) < 1e-10);
    }

    #[test]
    fn measurement_superop_cases() {
        let id = measurement_superop(&identity(3)).unwrap();
        assert!(max_abs(&(id.matrix() - SuperOperator::identity(3).matrix())) < 1e-15);

        let half = identity(2) * faer::Scale(c(0.5, 0.0));
        let ap = modified_measurement_superop(&sz(), &half).unwrap();
        let a = measurement_superop(&sz()).unwrap();
        assert!(max_abs(&(ap.matrix() - a.matrix())) == 0.0);

        for seed in 0..5 {
            let a = random_matrix(3, 3, 20 + seed);
            let rho0 = random_density(3, 30 + seed);
            let ap = modified_measurement_superop(&a, &rho0).unwrap();
            assert!(trace(&ap.apply(&rho0).unwrap()).norm() < 1e-13);
            let x = random_matrix(3, 3, 40 + seed);
            let direct = (&a * &x + &x * a.adjoint()) * faer::Scale(c(0.5, 0.0));
            let via = measurement_superop(&a).unwrap().apply(&x).unwrap();
            assert!(max_abs(&(&via - &direct)) < 1e-13);
        }
    }

    #[test]
    fn continuous_dephased_spin_steady_state_is_mixed() {
        let sys = single_spin_system(2.0).unwrap();
        let m = build_continuous_model(&sys, &sz(), 0.5).unwrap();
        let dec = eig_biorthonormal(m.liouvillian()).unwrap();
        let half = identity(2) * faer::Scale(c(0.5, 0.0));
        assert!(max_abs(&(dec.steady_state() - &half)) < 1e-12);
        assert_eq!(m.param("omega_l"), Some(2.0));
        let v = vectorize(dec.steady_state()).unwrap();
        assert!(m.liouvillian().apply_vec(&v).norm_l2() < 1e-12);
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let sys = single_spin_system(2.0).unwrap();
        let a = build_continuous_model(&sys, &sz(), 0.5).unwrap();
        let b = build_continuous_model(&sys, &sz(), 0.5).unwrap();
        let c2 = build_continuous_model(&sys, &sz(), 0.6).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c2.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }
}
