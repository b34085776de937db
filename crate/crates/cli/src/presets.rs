//! Experiment presets compiled into the binary.

use crate::CliError;

pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    pub text: &'static str,
}

pub const ALL: &[Preset] = &[
    Preset {
        name: "single-spin-spectrum",
        about: "photon-probed spin: S2 with noise floor, broad component and Larmor peak",
        text: include_str!("../presets/single-spin-spectrum.json"),
    },
    Preset {
        name: "zeno-sweep",
        about: "S2 across sampling rates gamma_p = 0.5, 5, 50, 500 /ns (Zeno transition)",
        text: include_str!("../presets/zeno-sweep.json"),
    },
    Preset {
        name: "linewidth",
        about: "Larmor-peak HWHM for gamma_p = 0.05, 0.1, 0.2 /ns and a line through the origin",
        text: include_str!("../presets/linewidth.json"),
    },
    Preset {
        name: "two-spin-compare",
        about: "two coupled spins: S2/S3/S4 of random-time vs continuous measurement",
        text: include_str!("../presets/two-spin-compare.json"),
    },
    Preset {
        name: "two-level-simulate",
        about: "a few SME detector traces of a continuously measured spin",
        text: include_str!("../presets/two-level-simulate.json"),
    },
    Preset {
        name: "two-level-estimate",
        about: "S2 and S3 estimated from simulated traces and compared with the analytic spectra",
        text: include_str!("../presets/two-level-estimate.json"),
    },
];

pub fn text(name: &str) -> Result<&'static str, CliError> {
    ALL.iter().find(|p| p.name == name).map(|p| p.text).ok_or_else(|| {
        let names: Vec<&str> = ALL.iter().map(|p| p.name).collect();
        CliError::Config(format!("unknown preset `{name}`; known: {}", names.join(", ")))
    })
}
