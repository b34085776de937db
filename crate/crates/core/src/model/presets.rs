//! Named model definitions for the single-spin, Zeno and two-spin studies.
//!
//! `omega_L / 2 pi = 1 GHz` for the single spin is a choice of this crate.

use std::f64::consts::{PI, TAU};

use super::spec::{MeasurementSpec, ModelSpec, SystemDef};
use super::RandomTimeParams;

/// Single-spin Larmor frequency, rad/ns.
pub const SINGLE_SPIN_OMEGA_L: f64 = TAU;
/// Measurement strength of the continuous comparison models, 1/ns.
pub const CONTINUOUS_BETA2: f64 = 0.5;
/// Spin relaxation rate of the two-spin model, 1/ns.
pub const TWO_SPIN_GAMMA_S: f64 = 0.05;

pub const NAMES: [&str; 5] = [
    "single-spin-random-time",
    "single-spin-uncoupled",
    "two-level-continuous",
    "two-spin-random-time",
    "two-spin-continuous",
];

fn random_time(p: RandomTimeParams) -> MeasurementSpec {
    MeasurementSpec::RandomTime {
        g: p.g,
        gamma_p: p.gamma_p,
        gamma_out: p.gamma_out,
        gamma_det: p.gamma_det,
        beta2: p.beta2,
        coupling: None,
    }
}

/// Photon-probed precessing spin at sampling rate `gamma_p`.
pub fn single_spin_random_time(gamma_p: f64) -> ModelSpec {
    ModelSpec {
        system: SystemDef::SingleSpin {
            omega_l: SINGLE_SPIN_OMEGA_L,
        },
        measurement: random_time(RandomTimeParams {
            gamma_p,
            ..RandomTimeParams::single_spin()
        }),
    }
}

/// `s_z` of a spin precessing at 1 GHz, measured continuously.
pub fn two_level_continuous() -> ModelSpec {
    ModelSpec {
        system: SystemDef::SingleSpin {
            omega_l: SINGLE_SPIN_OMEGA_L,
        },
        measurement: MeasurementSpec::Continuous {
            beta2: CONTINUOUS_BETA2,
            operator: None,
        },
    }
}

fn two_spin(gamma_s: f64) -> SystemDef {
    SystemDef::TwoSpin {
        omega_l1: 2.0 * PI * 1.5,
        omega_l2: 0.0,
        g_c: 2.0 * PI * 1.5,
        phi: PI / 6.0,
        gamma_s,
    }
}

pub fn two_spin_random_time(gamma_s: f64) -> ModelSpec {
    ModelSpec {
        system: two_spin(gamma_s),
        measurement: random_time(RandomTimeParams::two_spin()),
    }
}

/// `s_z` of the first spin measured continuously.
pub fn two_spin_continuous(gamma_s: f64) -> ModelSpec {
    ModelSpec {
        system: two_spin(gamma_s),
        measurement: MeasurementSpec::Continuous {
            beta2: CONTINUOUS_BETA2,
            operator: None,
        },
    }
}

/// Model presets by name, at their default parameters.
pub fn named(name: &str) -> Option<ModelSpec> {
    let gamma_p = RandomTimeParams::single_spin().gamma_p;
    Some(match name {
        "single-spin-random-time" => single_spin_random_time(gamma_p),
        "single-spin-uncoupled" => single_spin_random_time(gamma_p).uncoupled()?,
        "two-level-continuous" => two_level_continuous(),
        "two-spin-random-time" => two_spin_random_time(TWO_SPIN_GAMMA_S),
        "two-spin-continuous" => two_spin_continuous(TWO_SPIN_GAMMA_S),
        _ => return None,
    })
}
