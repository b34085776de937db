//! Experiment configuration.
//!
//! ```json
//! {
//!   "name": "single-spin",
//!   "model": { "preset": "single-spin-random-time" },
//!   "action": { "kind": "spectra", "grid": { "kind": "linear", "from_ghz": 0, "to_ghz": 3, "points": 601 },
//!               "background": "uncoupled" },
//!   "seed": 1,
//!   "output": { "format": "csv", "plots": true }
//! }
//! ```
//!
//! `model` is either `{ "preset": NAME }` (one of `polyspec::model::presets::NAMES`)
//! or `{ "inline": MODEL }` with a model definition as documented in
//! `polyspec::model::spec`. Grids are given in GHz (`omega / 2 pi`).
//!
//! Actions (`action.kind`):
//!
//! - `spectra`: `grid`, optional `grid2` (needed for orders 3 and 4),
//!   `orders` (default `[2]`), `background` (`none`, `uncoupled`, `frozen`).
//! - `compare`: as `spectra`, for the main model plus every entry of
//!   `with: [{ "label": ..., "model": ... }]`.
//! - `zeno-sweep`: `gamma_p` rates, `grid`, `background` (default
//!   `uncoupled`), `fit_linewidth`.
//! - `simulate`: `sim` (`dt`, `duration`, `stride`, `scheme`, `observables`,
//!   `positivity_check_every`), `trajectories`.
//! - `estimate`: `sim`, `trajectories`, `estimator` (see
//!   `polyspec::estimator::EstimatorConfig`), `orders`, `compare_analytic`.

use std::f64::consts::TAU;
use std::path::PathBuf;

use polyspec::estimator::EstimatorConfig;
use polyspec::model::presets;
use polyspec::model::{MeasurementSpec, ModelSpec};
use polyspec::polyspectra::{linspace, symmetric_grid};
use polyspec::sme::{Scheme, SimConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Free text copied into the summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub model: ModelRef,
    /// Label of the main model in file names; defaults to the preset name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub action: Action,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelRef {
    Preset(String),
    Inline(ModelSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labeled {
    pub label: String,
    pub model: ModelRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Grid {
    /// `points` evenly spaced frequencies on `[from_ghz, to_ghz]`.
    Linear { from_ghz: f64, to_ghz: f64, points: usize },
    /// `2 half_points + 1` frequencies `k step_ghz`, symmetric about zero.
    Symmetric { step_ghz: f64, half_points: usize },
}

impl Grid {
    /// Angular frequencies, rad/ns.
    pub fn omegas(&self) -> Vec<f64> {
        match *self {
            Grid::Linear { from_ghz, to_ghz, points } => linspace(TAU * from_ghz, TAU * to_ghz, points),
            Grid::Symmetric { step_ghz, half_points } => symmetric_grid(TAU * step_ghz, half_points),
        }
    }

    fn check(&self, field: &str) -> Result<(), CliError> {
        let ok = match *self {
            Grid::Linear { from_ghz, to_ghz, points } => {
                from_ghz.is_finite() && to_ghz.is_finite() && to_ghz > from_ghz && points >= 2
            }
            Grid::Symmetric { step_ghz, half_points } => step_ghz.is_finite() && step_ghz > 0.0 && half_points >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::config(field, "needs finite bounds, to > from (or step > 0) and at least 2 points"))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Background {
    #[default]
    None,
    /// Same probe with `g = 0`.
    Uncoupled,
    /// System frozen to a constant coupling matching the mean output.
    Frozen,
}

fn order_two() -> Vec<u8> {
    vec![2]
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraAction {
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid2: Option<Grid>,
    #[serde(default = "order_two")]
    pub orders: Vec<u8>,
    #[serde(default)]
    pub background: Background,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareAction {
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid2: Option<Grid>,
    #[serde(default = "order_two")]
    pub orders: Vec<u8>,
    /// Applied to the random-time models only.
    #[serde(default)]
    pub background: Background,
    pub with: Vec<Labeled>,
}

impl CompareAction {
    pub fn spectra(&self) -> SpectraAction {
        SpectraAction {
            grid: self.grid.clone(),
            grid2: self.grid2.clone(),
            orders: self.orders.clone(),
            background: self.background,
        }
    }
}

fn uncoupled() -> Background {
    Background::Uncoupled
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZenoAction {
    pub gamma_p: Vec<f64>,
    pub grid: Grid,
    #[serde(default = "uncoupled")]
    pub background: Background,
    /// HWHM of the Larmor peak per rate and a line through the origin.
    #[serde(default)]
    pub fit_linewidth: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<String>,
    /// 0 disables the positivity check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positivity_check_every: Option<usize>,
}

impl SimSettings {
    pub fn to_config(&self, seed: u64) -> SimConfig {
        let mut cfg = SimConfig::new(self.dt, self.duration, seed)
            .with_stride(self.stride)
            .with_scheme(self.scheme);
        cfg.record_observables = self.observables.clone();
        if let Some(n) = self.positivity_check_every {
            cfg.positivity_check_every = n;
        }
        cfg
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateAction {
    pub sim: SimSettings,
    #[serde(default = "one")]
    pub trajectories: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateAction {
    pub sim: SimSettings,
    #[serde(default = "one")]
    pub trajectories: usize,
    pub estimator: EstimatorConfig,
    #[serde(default = "order_two")]
    pub orders: Vec<u8>,
    #[serde(default = "yes")]
    pub compare_analytic: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    Spectra(SpectraAction),
    Compare(CompareAction),
    ZenoSweep(ZenoAction),
    Simulate(SimulateAction),
    Estimate(EstimateAction),
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Spectra(_) => "spectra",
            Action::Compare(_) => "compare",
            Action::ZenoSweep(_) => "zeno-sweep",
            Action::Simulate(_) => "simulate",
            Action::Estimate(_) => "estimate",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            plots: true,
            dir: None,
        }
    }
}

/// Parses `text`, reporting the failing field path and line/column.
pub fn parse(text: &str, origin: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Config(format!(
            "{origin}:{}:{}: field `{path}`: {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ModelRef {
    pub fn resolve(&self) -> Result<ModelSpec, CliError> {
        match self {
            ModelRef::Preset(name) => presets::named(name).ok_or_else(|| {
                CliError::config(
                    "model.preset",
                    &format!("unknown model preset `{name}`; known: {}", presets::NAMES.join(", ")),
                )
            }),
            ModelRef::Inline(spec) => Ok(spec.clone()),
        }
    }

    pub fn default_label(&self) -> String {
        match self {
            ModelRef::Preset(name) => name.clone(),
            ModelRef::Inline(_) => "model".into(),
        }
    }
}

fn check_orders(orders: &[u8], grid2: Option<&Grid>, field: &str) -> Result<(), CliError> {
    if orders.is_empty() {
        return Err(CliError::config(field, "list at least one order"));
    }
    if let Some(o) = orders.iter().find(|o| !(2..=4).contains(*o)) {
        return Err(CliError::config(field, &format!("order {o} is not 2, 3 or 4")));
    }
    if orders.iter().any(|&o| o > 2) && grid2.is_none() {
        return Err(CliError::config("action.grid2", "orders 3 and 4 need a second grid"));
    }
    Ok(())
}

fn is_random_time(spec: &ModelSpec) -> bool {
    matches!(spec.measurement, MeasurementSpec::RandomTime { .. })
}

fn check_sim(sim: &SimSettings, trajectories: usize) -> Result<(), CliError> {
    sim.to_config(0)
        .steps()
        .map_err(|e| CliError::config("action.sim", &e.to_string()))?;
    if trajectories == 0 {
        return Err(CliError::config("action.trajectories", "must be at least 1"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.model.default_label())
    }

    /// Checks everything that can be checked before any numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.trim().is_empty() {
            return Err(CliError::config("name", "must not be empty"));
        }
        let spec = self.model.resolve()?;
        match &self.action {
            Action::Spectra(a) => {
                a.grid.check("action.grid")?;
                if let Some(g) = &a.grid2 {
                    g.check("action.grid2")?;
                }
                check_orders(&a.orders, a.grid2.as_ref(), "action.orders")?;
                if a.background != Background::None && !is_random_time(&spec) {
                    return Err(CliError::config("action.background", "only random-time models have a probe background"));
                }
            }
            Action::Compare(c) => {
                let a = &c.spectra();
                a.grid.check("action.grid")?;
                if let Some(g) = &a.grid2 {
                    g.check("action.grid2")?;
                }
                check_orders(&a.orders, a.grid2.as_ref(), "action.orders")?;
                if c.with.is_empty() {
                    return Err(CliError::config("action.with", "list at least one model to compare with"));
                }
                let mut labels = vec![self.label()];
                for (k, other) in c.with.iter().enumerate() {
                    other.model.resolve()?;
                    if labels.contains(&other.label) {
                        return Err(CliError::config(&format!("action.with[{k}].label"), "labels must be distinct"));
                    }
                    labels.push(other.label.clone());
                }
            }
            Action::ZenoSweep(z) => {
                z.grid.check("action.grid")?;
                if !is_random_time(&spec) {
                    return Err(CliError::config("model", "a zeno sweep needs a random-time model"));
                }
                if z.gamma_p.is_empty() || z.gamma_p.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                    return Err(CliError::config("action.gamma_p", "list positive, finite rates"));
                }
                if z.fit_linewidth && z.gamma_p.len() < 3 {
                    return Err(CliError::config("action.gamma_p", "a linewidth fit needs at least 3 rates"));
                }
            }
            Action::Simulate(s) => check_sim(&s.sim, s.trajectories)?,
            Action::Estimate(e) => {
                check_sim(&e.sim, e.trajectories)?;
                check_orders(&e.orders, Some(&Grid::Symmetric { step_ghz: 1.0, half_points: 1 }), "action.orders")?;
                e.estimator
                    .validate()
                    .map_err(|err| CliError::config("action.estimator", &err.to_string()))?;
                let record = e.sim.dt * e.sim.stride as f64;
                let reach = e.orders.iter().map(|&o| o as usize - 1).max().unwrap_or(1);
                if let Some(w) = e.estimator.max_frequency {
                    let limit = std::f64::consts::PI / record / reach as f64;
                    if w > limit {
                        return Err(CliError::config(
                            "action.estimator.max_frequency",
                            &format!("{w} rad/ns exceeds {limit:.4} rad/ns (Nyquist / {reach} for order {})", reach + 1),
                        ));
                    }
                }
                let samples = (e.sim.duration / record).round() as usize;
                if e.estimator.segments_in(samples) * e.trajectories < polyspec::estimator::MIN_SEGMENTS {
                    return Err(CliError::config(
                        "action.estimator.segment_length",
                        &format!("traces of {samples} samples hold too few segments"),
                    ));
                }
            }
        }
        Ok(())
    }
}
