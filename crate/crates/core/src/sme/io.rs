//! Trajectory files: `<base>.f64` holds the samples as little-endian `f64`,
//! `<base>.json` the sidecar. CSV has a `t,z` header followed by one column
//! per recorded observable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dt: f64,
    pub integration_dt: f64,
    pub seed: u64,
    pub stream: u64,
    pub model: String,
    pub len: usize,
    #[serde(default)]
    pub min_eigenvalue: Option<f64>,
    /// Observable name to the file holding its series.
    #[serde(default)]
    pub observables: BTreeMap<String, String>,
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_f64s(path: &Path, xs: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidParameter {
            name: path.display().to_string(),
            reason: format!("{} bytes is not a whole number of f64", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes `<base>.f64`, `<base>.<k>.f64` per observable, and `<base>.json`.
pub fn write_binary(traj: &Trajectory, base: &Path) -> Result<Sidecar> {
    write_f64s(&with_ext(base, "f64"), &traj.samples)?;
    let mut observables = BTreeMap::new();
    for (k, (name, series)) in traj.observables.iter().enumerate() {
        let path = with_ext(base, &format!("obs{k}.f64"));
        write_f64s(&path, series)?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        observables.insert(name.clone(), file);
    }
    let side = Sidecar {
        dt: traj.dt,
        integration_dt: traj.integration_dt,
        seed: traj.seed,
        stream: traj.stream,
        model: traj.model.clone(),
        len: traj.samples.len(),
        min_eigenvalue: traj.min_eigenvalue,
        observables,
    };
    fs::write(with_ext(base, "json"), serde_json::to_string_pretty(&side)?)?;
    Ok(side)
}

pub fn read_binary(base: &Path) -> Result<Trajectory> {
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(with_ext(base, "json"))?)?;
    let samples = read_f64s(&with_ext(base, "f64"))?;
    if samples.len() != side.len {
        return Err(Error::InvalidParameter {
            name: base.display().to_string(),
            reason: format!("sidecar says {} samples, file has {}", side.len, samples.len()),
        });
    }
    let dir = base.parent().unwrap_or(Path::new("."));
    let mut observables = BTreeMap::new();
    for (name, file) in &side.observables {
        observables.insert(name.clone(), read_f64s(&dir.join(file))?);
    }
    Ok(Trajectory {
        dt: side.dt,
        integration_dt: side.integration_dt,
        samples,
        seed: side.seed,
        stream: side.stream,
        observables,
        model: side.model,
        min_eigenvalue: side.min_eigenvalue,
    })
}

pub fn write_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut s = String::from("t,z");
    for name in traj.observables.keys() {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (k, z) in traj.samples.iter().enumerate() {
        let _ = write!(s, "{:.12e},{z:.12e}", k as f64 * traj.dt);
        for series in traj.observables.values() {
            let _ = write!(s, ",{:.12e}", series[k]);
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}
