//! JSON model definitions.
//!
//! ```json
//! {
//!   "system": { "kind": "single-spin", "omega_l": 6.283185307179586 },
//!   "measurement": { "scheme": "random-time", "g": 100, "gamma_p": 0.5,
//!                    "gamma_out": 100, "gamma_det": 100, "beta2": 10000 }
//! }
//! ```
//!
//! Custom systems list their factors and build operators as sums of products
//! of named single-factor operators:
//!
//! ```json
//! { "kind": "custom",
//!   "factors": [ { "label": "q", "basis_labels": ["up", "down"] } ],
//!   "hamiltonian": [ { "coeff": 3.0, "ops": [ { "op": "spin", "factor": "q", "axis": "x" } ] } ],
//!   "jumps": [ { "label": "decay", "rate": 0.1,
//!                "operator": [ { "ops": [ { "op": "lowering", "factor": "q" } ] } ] } ] }
//! ```
//!
//! Frequencies are angular (rad/ns), rates in 1/ns.

use serde::{Deserialize, Serialize};

use super::spin::{lowering, raising, sx, sy, sz};
use super::{
    build_continuous_model, build_random_time_model, check_rate, single_spin_system, transition,
    two_spin_system, HilbertFactor, JumpTerm, LiouvillianModel, RandomTimeParams, SystemSpec,
};
use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub system: SystemDef,
    pub measurement: MeasurementSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemDef {
    SingleSpin {
        omega_l: f64,
    },
    TwoSpin {
        omega_l1: f64,
        omega_l2: f64,
        g_c: f64,
        phi: f64,
        gamma_s: f64,
    },
    Custom {
        factors: Vec<HilbertFactor>,
        #[serde(default)]
        hamiltonian: Vec<TermSpec>,
        #[serde(default)]
        jumps: Vec<JumpSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasurementSpec {
    /// Photon-probe scheme. `coupling` defaults to `s_z` on the first factor.
    RandomTime {
        g: f64,
        gamma_p: f64,
        gamma_out: f64,
        gamma_det: f64,
        beta2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coupling: Option<Vec<TermSpec>>,
    },
    /// Direct weak measurement. `operator` defaults to `s_z` on the first factor.
    Continuous {
        beta2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        operator: Option<Vec<TermSpec>>,
    },
}

/// `(coeff + i coeff_im) * op_1 op_2 ...`, each `op_k` lifted to the full
/// system space. An empty product is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "one")]
    pub coeff: f64,
    #[serde(default)]
    pub coeff_im: f64,
    #[serde(default)]
    pub ops: Vec<OperatorSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub label: String,
    pub rate: f64,
    pub operator: Vec<TermSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Named single-factor operator. `pauli`, `spin`, `raising` and `lowering`
/// need a two-state factor (first basis state is "up").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity { factor: String },
    Pauli { factor: String, axis: Axis },
    Spin { factor: String, axis: Axis },
    Raising { factor: String },
    Lowering { factor: String },
    Projector { factor: String, state: String },
    Transition { factor: String, to: String, from: String },
}

impl OperatorSpec {
    fn factor(&self) -> &str {
        match self {
            Self::Identity { factor }
            | Self::Pauli { factor, .. }
            | Self::Spin { factor, .. }
            | Self::Raising { factor }
            | Self::Lowering { factor }
            | Self::Projector { factor, .. }
            | Self::Transition { factor, .. } => factor,
        }
    }

    fn local(&self, f: &HilbertFactor) -> Result<ComplexMatrix> {
        let n = f.dim();
        let need_qubit = || {
            if n == 2 {
                Ok(())
            } else {
                Err(Error::ModelSpec(format!(
                    "operator {self:?} needs a two-state factor, '{}' has {n}",
                    f.label
                )))
            }
        };
        let state = |s: &str| {
            f.index_of(s).ok_or_else(|| {
                Error::ModelSpec(format!("factor '{}' has no basis state '{s}'", f.label))
            })
        };
        let spin = |axis: Axis| match axis {
            Axis::X => sx(),
            Axis::Y => sy(),
            Axis::Z => sz(),
        };
        Ok(match self {
            Self::Identity { .. } => crate::linalg::identity(n),
            Self::Pauli { axis, .. } => {
                need_qubit()?;
                spin(*axis) * faer::Scale(c(2.0, 0.0))
            }
            Self::Spin { axis, .. } => {
                need_qubit()?;
                spin(*axis)
            }
            Self::Raising { .. } => {
                need_qubit()?;
                raising()
            }
            Self::Lowering { .. } => {
                need_qubit()?;
                lowering()
            }
            Self::Projector { state: s, .. } => {
                let k = state(s)?;
                transition(n, k, k)
            }
            Self::Transition { to, from, .. } => transition(n, state(to)?, state(from)?),
        })
    }
}

/// Sum of terms on the space spanned by `factors`.
pub fn operator_from_terms(factors: &[HilbertFactor], terms: &[TermSpec]) -> Result<ComplexMatrix> {
    let dims: Vec<usize> = factors.iter().map(HilbertFactor::dim).collect();
    let n: usize = dims.iter().product();
    let mut total = ComplexMatrix::zeros(n, n);
    for t in terms {
        if !t.coeff.is_finite() || !t.coeff_im.is_finite() {
            return Err(Error::ModelSpec("non-finite term coefficient".into()));
        }
        let mut prod = crate::linalg::identity(n);
        for op in &t.ops {
            let k = factors
                .iter()
                .position(|f| f.label == op.factor())
                .ok_or_else(|| Error::ModelSpec(format!("unknown factor '{}'", op.factor())))?;
            prod = prod * super::embed(&op.local(&factors[k])?, k, &dims);
        }
        total += prod * faer::Scale(c(t.coeff, t.coeff_im));
    }
    Ok(total)
}

fn first_spin_z(factors: &[HilbertFactor]) -> Vec<TermSpec> {
    vec![TermSpec {
        coeff: 1.0,
        coeff_im: 0.0,
        ops: vec![OperatorSpec::Spin {
            factor: factors.first().map(|f| f.label.clone()).unwrap_or_default(),
            axis: Axis::Z,
        }],
    }]
}

impl SystemDef {
    pub fn build(&self) -> Result<SystemSpec> {
        match self {
            Self::SingleSpin { omega_l } => single_spin_system(*omega_l),
            Self::TwoSpin {
                omega_l1,
                omega_l2,
                g_c,
                phi,
                gamma_s,
            } => two_spin_system(*omega_l1, *omega_l2, *g_c, *phi, *gamma_s),
            Self::Custom {
                factors,
                hamiltonian,
                jumps,
            } => {
                if factors.is_empty() {
                    return Err(Error::ModelSpec("custom system needs at least one factor".into()));
                }
                for (i, f) in factors.iter().enumerate() {
                    f.validate()?;
                    if factors[..i].iter().any(|g| g.label == f.label) {
                        return Err(Error::ModelSpec(format!("duplicate factor label '{}'", f.label)));
                    }
                }
                let h = operator_from_terms(factors, hamiltonian)?;
                let mut built = Vec::new();
                for j in jumps {
                    check_rate(&j.label, j.rate)?;
                    built.push(JumpTerm::new(&j.label, j.rate, operator_from_terms(factors, &j.operator)?)?);
                }
                Ok(SystemSpec {
                    factors: factors.clone(),
                    hamiltonian: h,
                    jumps: built,
                    params: Default::default(),
                })
            }
        }
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<LiouvillianModel> {
        let system = self.system.build()?;
        match &self.measurement {
            MeasurementSpec::RandomTime {
                g,
                gamma_p,
                gamma_out,
                gamma_det,
                beta2,
                coupling,
            } => {
                let terms = coupling.clone().unwrap_or_else(|| first_spin_z(&system.factors));
                let s_c = operator_from_terms(&system.factors, &terms)?;
                let p = RandomTimeParams {
                    g: *g,
                    gamma_p: *gamma_p,
                    gamma_out: *gamma_out,
                    gamma_det: *gamma_det,
                    beta2: *beta2,
                };
                build_random_time_model(&system, &s_c, &p)
            }
            MeasurementSpec::Continuous { beta2, operator } => {
                let terms = operator.clone().unwrap_or_else(|| first_spin_z(&system.factors));
                let a = operator_from_terms(&system.factors, &terms)?;
                build_continuous_model(&system, &a, *beta2)
            }
        }
    }

    /// The probe-only reference for background subtraction: `g = 0`, so the
    /// detector output no longer depends on the system, which is replaced by
    /// a single idle level (an undamped spin would leave the steady state
    /// non-unique). `None` for continuous models.
    pub fn uncoupled(&self) -> Option<Self> {
        self.idle_probe(Some(0.0), 1.0)
    }

    /// Reference with the system frozen into one idle level whose coupling
    /// operator is the constant `value`, probed at the original `g`. With
    /// `value` matched to the mean output it keeps the detector-shaped
    /// background a nonzero mean produces and drops the system dynamics.
    /// `None` for continuous models.
    pub fn frozen(&self, value: f64) -> Option<Self> {
        self.idle_probe(None, value)
    }

    fn idle_probe(&self, coupling_strength: Option<f64>, value: f64) -> Option<Self> {
        let MeasurementSpec::RandomTime { .. } = &self.measurement else {
            return None;
        };
        let mut s = self.clone();
        s.system = SystemDef::Custom {
            factors: vec![HilbertFactor::new("idle", &["0"]).expect("static basis")],
            hamiltonian: Vec::new(),
            jumps: Vec::new(),
        };
        if let MeasurementSpec::RandomTime { g, coupling, .. } = &mut s.measurement {
            if let Some(strength) = coupling_strength {
                *g = strength;
            }
            *coupling = Some(vec![TermSpec {
                coeff: value,
                coeff_im: 0.0,
                ops: Vec::new(),
            }]);
        }
        Some(s)
    }

    /// The probe coupling operator on the system space.
    pub fn coupling_operator(&self) -> Result<Option<ComplexMatrix>> {
        let MeasurementSpec::RandomTime { coupling, .. } = &self.measurement else {
            return Ok(None);
        };
        let system = self.system.build()?;
        let terms = coupling.clone().unwrap_or_else(|| first_spin_z(&system.factors));
        operator_from_terms(&system.factors, &terms).map(Some)
    }
}
