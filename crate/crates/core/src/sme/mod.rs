//! Stochastic master equation trajectories and detector records.
//!
//! Explicit Ito-Euler in the column-stacked representation:
//! `rho' = rho + L rho dt + beta S[A] rho dW` with
//! `S[A] rho = A rho + rho A^dagger - Tr[(A + A^dagger) rho] rho`, followed by
//! Hermitization and trace renormalization. The detector record uses the same
//! increment: `z_k = beta^2 Tr[rho_k (A + A^dagger)/2] + beta xi_k / (2 sqrt(dt))`
//! with `dW_k = xi_k sqrt(dt)`.
//!
//! Euler drifts out of the positive cone once the conditioned state is close
//! to pure. [`Scheme::Kraus`] instead applies the first-order Kraus form
//! `rho' ~ M rho M^dagger + dt sum_j gamma_j d_j rho d_j^dagger` with
//! `M = 1 - (iH + K/2) dt + beta A dy + beta^2 A^2 (dy^2 - dt) / 2`,
//! `K = sum_j gamma_j d_j^dagger d_j + beta^2 A^dagger A` and
//! `dy = beta Tr[(A + A^dagger) rho] dt + dW`, which keeps `rho` positive for
//! any `dt`.

mod io;

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use io::{read_binary, write_binary, write_csv, Sidecar};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{min_eigenvalue_hermitian, ComplexMatrix, SparseSuperOperator, SuperOperator};
use crate::model::{embed, spin, LiouvillianModel};
use crate::polyspectra::steady_state;

/// Default bound on `dt * fastest_rate`.
pub const STABILITY_LIMIT: f64 = 0.05;
/// Abort when the trace before renormalization falls below this.
pub const TRACE_FLOOR: f64 = 1e-6;
/// Abort when the smallest eigenvalue of `rho` falls below this.
pub const POSITIVITY_FLOOR: f64 = -1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Euler,
    Kraus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step (ns).
    pub dt: f64,
    /// Record length (ns).
    pub duration: f64,
    pub seed: u64,
    /// Observables `Tr(O rho(t))` to record, as `sx:LABEL`, `sy:LABEL`,
    /// `sz:LABEL` on a two-state factor, or `A` for the measurement operator.
    #[serde(default)]
    pub record_observables: Vec<String>,
    #[serde(default = "yes")]
    pub renormalize: bool,
    /// Steps averaged into one recorded sample; 1 records every step.
    #[serde(default = "one")]
    pub record_stride: usize,
    /// Largest allowed `dt * fastest_rate`.
    #[serde(default = "stability_limit")]
    pub stability_limit: f64,
    /// Steps between positivity checks (0 disables them).
    #[serde(default = "check_every")]
    pub positivity_check_every: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub execution: Execution,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn stability_limit() -> f64 {
    STABILITY_LIMIT
}
fn check_every() -> usize {
    100
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64, seed: u64) -> Self {
        Self {
            dt,
            duration,
            seed,
            record_observables: Vec::new(),
            renormalize: true,
            record_stride: 1,
            stability_limit: STABILITY_LIMIT,
            positivity_check_every: check_every(),
            scheme: Scheme::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_observables(mut self, names: &[&str]) -> Self {
        self.record_observables = names.iter().map(|s| s.to_string()).collect();
        self
    }

    /// Number of integration steps; errors unless it is a positive multiple
    /// of the stride.
    pub fn steps(&self) -> Result<u64> {
        let bad = |reason: String| Error::InvalidParameter {
            name: "sim".into(),
            reason,
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(bad(format!("duration must be positive, got {}", self.duration)));
        }
        if self.record_stride == 0 {
            return Err(bad("record_stride must be at least 1".into()));
        }
        let n = (self.duration / self.dt).round();
        if (n * self.dt - self.duration).abs() > 1e-9 * self.duration {
            return Err(bad(format!("duration {} is not a multiple of dt {}", self.duration, self.dt)));
        }
        let n = n as u64;
        if n % self.record_stride as u64 != 0 {
            return Err(bad(format!("{n} steps not divisible by record_stride {}", self.record_stride)));
        }
        Ok(n)
    }

    /// Checks `dt * fastest_rate <= stability_limit`.
    pub fn check_stability(&self, model: &LiouvillianModel) -> Result<()> {
        let p = self.dt * model.fastest_rate();
        if p > self.stability_limit * (1.0 + 1e-9) {
            return Err(Error::StabilityGuard(p, self.stability_limit));
        }
        Ok(())
    }
}

/// Uniformly sampled detector record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Sample spacing of `samples` (ns), `record_stride * integration_dt`.
    pub dt: f64,
    pub integration_dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    #[serde(default)]
    pub observables: BTreeMap<String, Vec<f64>>,
    pub model: String,
    /// Smallest eigenvalue of `rho` seen at the positivity checks.
    #[serde(default)]
    pub min_eigenvalue: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.dt).collect()
    }
}

/// Resolves an observable name against the model's factors.
pub fn observable(model: &LiouvillianModel, name: &str) -> Result<ComplexMatrix> {
    if name == "A" {
        return Ok(model.measurement_op().clone());
    }
    let bad = |reason: &str| Error::InvalidParameter {
        name: format!("observable '{name}'"),
        reason: reason.into(),
    };
    let (axis, label) = name.split_once(':').ok_or_else(|| bad("expected AXIS:FACTOR or A"))?;
    let op = match axis {
        "sx" => spin::sx(),
        "sy" => spin::sy(),
        "sz" => spin::sz(),
        _ => return Err(bad("axis must be sx, sy or sz")),
    };
    let dims: Vec<usize> = model.factors().iter().map(|f| f.dim()).collect();
    let k = model
        .factors()
        .iter()
        .position(|f| f.label == label)
        .ok_or_else(|| bad("no factor with that label"))?;
    if dims[k] != 2 {
        return Err(bad("spin observables need a two-state factor"));
    }
    Ok(embed(&op, k, &dims))
}

/// Reusable integrator state for one model and step size.
pub struct Stepper {
    n: usize,
    dt: f64,
    beta: f64,
    renormalize: bool,
    l: SparseSuperOperator,
    /// `rho -> A rho + rho A^dagger`.
    m: SparseSuperOperator,
    lr: Vec<C64>,
    mr: Vec<C64>,
    kraus: Option<KrausParts>,
}

/// Operators of the Kraus-form step, column-major `n x n`.
struct KrausParts {
    n: usize,
    /// `1 - (iH + K/2) dt`.
    m0: Vec<C64>,
    /// `beta A`.
    ba: Vec<C64>,
    /// `beta^2 A^2 / 2`.
    ba2: Vec<C64>,
    /// `sqrt(gamma_j dt) d_j`.
    jumps: Vec<Vec<C64>>,
    m: Vec<C64>,
    tmp: Vec<C64>,
    out: Vec<C64>,
}

/// `out = x y` (`adj`: `out = x y^dagger`).
fn matmul(n: usize, x: &[C64], y: &[C64], adj: bool, out: &mut [C64]) {
    out.fill(C64::ZERO);
    for j in 0..n {
        for k in 0..n {
            let ykj = if adj { y[k * n + j].conj() } else { y[j * n + k] };
            if ykj == C64::ZERO {
                continue;
            }
            let col = &x[k * n..k * n + n];
            for (o, xv) in out[j * n..j * n + n].iter_mut().zip(col) {
                *o += xv * ykj;
            }
        }
    }
}

impl KrausParts {
    fn new(model: &LiouvillianModel, dt: f64) -> Self {
        let n = model.dim();
        let a = model.measurement_op();
        let b2 = model.beta2();
        let mut k = a.adjoint() * a * faer::Scale(C64::new(b2, 0.0));
        let mut jumps = Vec::new();
        for j in model.jumps().iter().filter(|j| j.rate > 0.0) {
            k += j.operator.adjoint() * &j.operator * faer::Scale(C64::new(j.rate, 0.0));
            jumps.push(to_vec(&(&j.operator * faer::Scale(C64::new((j.rate * dt).sqrt(), 0.0)))));
        }
        let gen = model.hamiltonian() * faer::Scale(C64::new(0.0, 1.0)) + k * faer::Scale(C64::new(0.5, 0.0));
        let m0 = Mat::<C64>::identity(n, n) - gen * faer::Scale(C64::new(dt, 0.0));
        Self {
            n,
            m0: to_vec(&m0),
            ba: to_vec(&(a * faer::Scale(C64::new(model.beta(), 0.0)))),
            ba2: to_vec(&(a * a * faer::Scale(C64::new(b2 / 2.0, 0.0)))),
            jumps,
            m: vec![C64::ZERO; n * n],
            tmp: vec![C64::ZERO; n * n],
            out: vec![C64::ZERO; n * n],
        }
    }

    /// `rho <- M rho M^dagger + sum_j J_j rho J_j^dagger`, unnormalized.
    fn apply(&mut self, rho: &mut [C64], dy: f64, dt: f64) {
        let n = self.n;
        let c2 = dy * dy - dt;
        for (((m, m0), a), a2) in self.m.iter_mut().zip(&self.m0).zip(&self.ba).zip(&self.ba2) {
            *m = m0 + a * dy + a2 * c2;
        }
        matmul(n, &self.m, rho, false, &mut self.tmp);
        matmul(n, &self.tmp, &self.m, true, &mut self.out);
        for j in &self.jumps {
            matmul(n, j, rho, false, &mut self.tmp);
            matmul(n, &self.tmp, j, true, &mut self.m);
            for (o, v) in self.out.iter_mut().zip(&self.m) {
                *o += v;
            }
        }
        rho.copy_from_slice(&self.out);
    }
}

impl Stepper {
    pub fn new(model: &LiouvillianModel, dt: f64, renormalize: bool) -> Result<Self> {
        Self::with_scheme(model, dt, renormalize, Scheme::Euler)
    }

    pub fn with_scheme(model: &LiouvillianModel, dt: f64, renormalize: bool, scheme: Scheme) -> Result<Self> {
        let a = model.measurement_op();
        let m = SuperOperator::left(a)?.matrix() + SuperOperator::right(&a.adjoint().to_owned())?.matrix();
        let k = model.dim() * model.dim();
        Ok(Self {
            n: model.dim(),
            dt,
            beta: model.beta(),
            renormalize,
            l: model.liouvillian().to_sparse(),
            m: SparseSuperOperator::from_dense(&m),
            lr: vec![C64::ZERO; k],
            mr: vec![C64::ZERO; k],
            kraus: (scheme == Scheme::Kraus).then(|| KrausParts::new(model, dt)),
        })
    }

    fn trace_of(&self, v: &[C64]) -> C64 {
        (0..self.n).map(|i| v[i * self.n + i]).sum()
    }

    /// `Tr[(A + A^dagger) rho]`.
    pub fn measurement_expectation(&mut self, rho: &[C64]) -> f64 {
        self.m.mul_into(rho, &mut self.mr);
        self.trace_of(&self.mr).re
    }

    /// One step in place with Wiener increment `dw`; returns the trace before
    /// renormalization.
    pub fn step(&mut self, rho: &mut [C64], dw: f64) -> f64 {
        let mean = self.measurement_expectation(rho);
        self.advance(rho, dw, mean)
    }

    /// [`Stepper::step`] right after [`Stepper::measurement_expectation`] on
    /// the same `rho`, which left `A rho + rho A^dagger` in place.
    fn advance(&mut self, rho: &mut [C64], dw: f64, mean: f64) -> f64 {
        if let Some(k) = &mut self.kraus {
            k.apply(rho, self.beta * mean * self.dt + dw, self.dt);
            return self.finish(rho);
        }
        self.l.mul_into(rho, &mut self.lr);
        let kick = self.beta * dw;
        for ((r, l), m) in rho.iter_mut().zip(&self.lr).zip(&self.mr) {
            *r += *l * self.dt + (*m - *r * mean) * kick;
        }
        self.finish(rho)
    }

    /// Hermitizes and renormalizes; returns the trace before renormalizing.
    fn finish(&self, rho: &mut [C64]) -> f64 {
        let n = self.n;
        for j in 0..n {
            rho[j * n + j].im = 0.0;
            for i in j + 1..n {
                let h = (rho[j * n + i] + rho[i * n + j].conj()) * 0.5;
                rho[j * n + i] = h;
                rho[i * n + j] = h.conj();
            }
        }
        let tr = self.trace_of(rho).re;
        if self.renormalize && tr > 0.0 {
            for r in rho.iter_mut() {
                *r /= tr;
            }
        }
        tr
    }
}

fn to_vec(rho: &ComplexMatrix) -> Vec<C64> {
    let n = rho.nrows();
    (0..n * n).map(|k| rho[(k % n, k / n)]).collect()
}

fn to_mat(v: &[C64], n: usize) -> ComplexMatrix {
    Mat::from_fn(n, n, |i, j| v[j * n + i])
}

/// Single Ito-Euler step on a density matrix.
pub fn step(model: &LiouvillianModel, rho: &ComplexMatrix, dt: f64, dw: f64) -> Result<ComplexMatrix> {
    step_with(model, rho, dt, dw, Scheme::Euler)
}

pub fn step_with(model: &LiouvillianModel, rho: &ComplexMatrix, dt: f64, dw: f64, scheme: Scheme) -> Result<ComplexMatrix> {
    let mut s = Stepper::with_scheme(model, dt, true, scheme)?;
    let mut v = to_vec(rho);
    let tr = s.step(&mut v, dw);
    if !(tr >= TRACE_FLOOR) {
        return Err(Error::TraceCollapse { step: 0, trace: tr });
    }
    Ok(to_mat(&v, model.dim()))
}

/// The RNG of trajectory `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trajectory from `rho_init` on RNG stream `stream`; also returns the final
/// state.
pub fn simulate_from(
    model: &LiouvillianModel,
    cfg: &SimConfig,
    rho_init: &ComplexMatrix,
    stream: u64,
) -> Result<(Trajectory, ComplexMatrix)> {
    let steps = cfg.steps()?;
    cfg.check_stability(model)?;
    let n = model.dim();
    let obs: Vec<(String, SparseSuperOperator)> = cfg
        .record_observables
        .iter()
        .map(|name| {
            let o = observable(model, name)?;
            Ok((name.clone(), SparseSuperOperator::from_dense(&SuperOperator::left(&o)?.into_matrix())))
        })
        .collect::<Result<_>>()?;
    let mut stepper = Stepper::with_scheme(model, cfg.dt, cfg.renormalize, cfg.scheme)?;
    let mut rng = stream_rng(cfg.seed, stream);
    let mut rho = to_vec(rho_init);
    let stride = cfg.record_stride;
    let records = (steps / stride as u64) as usize;
    let mut samples = Vec::with_capacity(records);
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(records); obs.len()];
    let mut scratch = vec![C64::ZERO; n * n];
    let b2 = model.beta2();
    let noise = stepper.beta / (2.0 * cfg.dt.sqrt());
    let sqdt = cfg.dt.sqrt();
    let mut min_eig: Option<f64> = None;
    let mut acc = 0.0;
    for k in 0..steps {
        if k % stride as u64 == 0 {
            for (s, (_, o)) in series.iter_mut().zip(&obs) {
                o.mul_into(&rho, &mut scratch);
                s.push((0..n).map(|i| scratch[i * n + i].re).sum());
            }
        }
        let xi: f64 = StandardNormal.sample(&mut rng);
        let mean = stepper.measurement_expectation(&rho);
        acc += b2 * mean / 2.0 + noise * xi;
        if (k + 1) % stride as u64 == 0 {
            samples.push(acc / stride as f64);
            acc = 0.0;
        }
        let tr = stepper.advance(&mut rho, xi * sqdt, mean);
        if !(tr >= TRACE_FLOOR) || !rho.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::TraceCollapse { step: k, trace: tr });
        }
        if cfg.positivity_check_every > 0 && (k + 1) % cfg.positivity_check_every as u64 == 0 {
            let e = min_eigenvalue_hermitian(&to_mat(&rho, n))?;
            min_eig = Some(min_eig.map_or(e, |m| m.min(e)));
            if e < POSITIVITY_FLOOR {
                return Err(Error::PositivityLost {
                    step: k,
                    min_eigenvalue: e,
                });
            }
        }
    }
    let traj = Trajectory {
        dt: cfg.dt * stride as f64,
        integration_dt: cfg.dt,
        samples,
        seed: cfg.seed,
        stream,
        observables: obs.into_iter().map(|(name, _)| name).zip(series).collect(),
        model: model.fingerprint(),
        min_eigenvalue: min_eig,
    };
    Ok((traj, to_mat(&rho, n)))
}

/// Trajectory on stream 0, started in the steady state.
pub fn simulate(model: &LiouvillianModel, cfg: &SimConfig) -> Result<Trajectory> {
    let rho0 = steady_state(model)?;
    Ok(simulate_from(model, cfg, &rho0, 0)?.0)
}

/// `n_traj` trajectories on streams `0..n_traj`, all started in the steady
/// state.
pub fn spawn_ensemble(model: &LiouvillianModel, cfg: &SimConfig, n_traj: usize) -> Result<Vec<Trajectory>> {
    let rho0 = steady_state(model)?;
    cfg.execution
        .try_map_range(n_traj, |i| simulate_from(model, cfg, &rho0, i as u64).map(|r| r.0))
}

/// Average of the final states of `n_traj` trajectories from `rho_init`.
pub fn ensemble_mean_state(
    model: &LiouvillianModel,
    cfg: &SimConfig,
    rho_init: &ComplexMatrix,
    n_traj: usize,
) -> Result<ComplexMatrix> {
    let finals = cfg
        .execution
        .try_map_range(n_traj, |i| simulate_from(model, cfg, rho_init, i as u64).map(|r| r.1))?;
    let n = model.dim();
    let mut mean = Mat::<C64>::zeros(n, n);
    for f in &finals {
        mean += f;
    }
    Ok(mean * faer::Scale(C64::new(1.0 / n_traj as f64, 0.0)))
}
