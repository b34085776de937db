use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectrum values on a frequency grid (angular frequencies, rad/ns).
///
/// Order 2 is one-dimensional over `omega1`. Orders 3 and 4 are stored
/// row-major: `values[i * omega2.len() + j]` is the value at
/// `(omega1[i], omega2[j])`; for order 4 this is the cut
/// `(w1, w2, -w1, -w2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySpectrum {
    pub order: u8,
    pub omega1: Vec<f64>,
    #[serde(default)]
    pub omega2: Vec<f64>,
    pub values: Vec<C64>,
    pub beta2: f64,
    /// White detector-noise level `beta^2 / 4` (order 2 only, else 0).
    pub noise_floor: f64,
    pub includes_noise_floor: bool,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

impl PolySpectrum {
    pub fn new_1d(omega: Vec<f64>, values: Vec<C64>, beta2: f64) -> Self {
        Self {
            order: 2,
            omega1: omega,
            omega2: Vec::new(),
            values,
            beta2,
            noise_floor: beta2 / 4.0,
            includes_noise_floor: false,
            meta: BTreeMap::new(),
        }
    }

    pub fn new_2d(order: u8, omega1: Vec<f64>, omega2: Vec<f64>, values: Vec<C64>, beta2: f64) -> Self {
        debug_assert_eq!(values.len(), omega1.len() * omega2.len());
        Self {
            order,
            omega1,
            omega2,
            values,
            beta2,
            noise_floor: 0.0,
            includes_noise_floor: false,
            meta: BTreeMap::new(),
        }
    }

    pub fn is_2d(&self) -> bool {
        self.order > 2
    }

    pub fn shape(&self) -> (usize, usize) {
        if self.is_2d() {
            (self.omega1.len(), self.omega2.len())
        } else {
            (self.omega1.len(), 1)
        }
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        if self.is_2d() {
            self.values[i * self.omega2.len() + j]
        } else {
            self.values[i]
        }
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Largest `|Im| / max|Re|`.
    pub fn imaginary_ratio(&self) -> f64 {
        let re = self.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let im = self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        if re == 0.0 {
            if im == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            im / re
        }
    }

    pub fn with_noise_floor(mut self) -> Self {
        if !self.includes_noise_floor {
            for v in &mut self.values {
                v.re += self.noise_floor;
            }
            self.includes_noise_floor = true;
        }
        self
    }

    pub fn without_noise_floor(mut self) -> Self {
        if self.includes_noise_floor {
            for v in &mut self.values {
                v.re -= self.noise_floor;
            }
            self.includes_noise_floor = false;
        }
        self
    }

    pub fn same_grid(&self, other: &PolySpectrum) -> bool {
        self.order == other.order && self.omega1 == other.omega1 && self.omega2 == other.omega2
    }

    pub fn check_same_grid(&self, other: &PolySpectrum) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "order {} on {}x{} vs order {} on {}x{}",
                self.order,
                self.omega1.len(),
                self.omega2.len(),
                other.order,
                other.omega1.len(),
                other.omega2.len()
            )))
        }
    }

    /// Order 2: `omega,f_ghz,re,im[,err]`, one row per grid point with
    /// `f_ghz = omega / 2pi`.
    pub fn to_csv_1d(&self, errors: Option<&[f64]>) -> String {
        let mut s = String::from("omega,f_ghz,re,im");
        if errors.is_some() {
            s.push_str(",err");
        }
        s.push('\n');
        for (i, (&w, v)) in self.omega1.iter().zip(&self.values).enumerate() {
            let _ = write!(s, "{w:.12e},{:.12e},{:.12e},{:.12e}", w / TAU, v.re, v.im);
            if let Some(e) = errors {
                let _ = write!(s, ",{:.12e}", e[i]);
            }
            s.push('\n');
        }
        s
    }

    /// Orders 3 and 4: a matrix of one part. The first row is
    /// `omega1\omega2` followed by the `omega2` grid; each further row starts
    /// with its `omega1` value.
    pub fn to_csv_matrix(&self, part: Part) -> String {
        self.matrix_csv(|k| match part {
            Part::Re => self.values[k].re,
            Part::Im => self.values[k].im,
        })
    }

    /// Matrix layout of an arbitrary per-point quantity (e.g. error bars).
    pub fn matrix_csv<F: Fn(usize) -> f64>(&self, f: F) -> String {
        let mut s = String::from("omega1\\omega2");
        for w in &self.omega2 {
            let _ = write!(s, ",{w:.12e}");
        }
        s.push('\n');
        let n2 = self.omega2.len();
        for (i, w1) in self.omega1.iter().enumerate() {
            let _ = write!(s, "{w1:.12e}");
            for j in 0..n2 {
                let _ = write!(s, ",{:.12e}", f(i * n2 + j));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Pointwise `with - reference` on identical grids.
pub fn subtract_background(with: &PolySpectrum, reference: &PolySpectrum) -> Result<PolySpectrum> {
    with.check_same_grid(reference)?;
    let mut out = with.clone();
    for (v, r) in out.values.iter_mut().zip(&reference.values) {
        *v -= r;
    }
    if with.includes_noise_floor && reference.includes_noise_floor {
        out.includes_noise_floor = false;
    }
    let label = reference
        .meta
        .get("model")
        .cloned()
        .unwrap_or_else(|| "unlabelled reference".into());
    out.meta.insert("background_reference".into(), label);
    Ok(out)
}

/// Removes a constant: `spectrum - offset` at every point.
pub fn subtract_constant(spectrum: &PolySpectrum, offset: C64) -> PolySpectrum {
    let mut out = spectrum.clone();
    for v in &mut out.values {
        *v -= offset;
    }
    out.meta.insert("constant_background".into(), format!("{}", offset.re));
    out
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Grid symmetric about zero with `2 k + 1` points spaced `step`, computed
/// as `i * step` so that `-w` is exactly on the grid.
pub fn symmetric_grid(step: f64, k: usize) -> Vec<f64> {
    let k = k as i64;
    (-k..=k).map(|i| i as f64 * step).collect()
}
