//! Polyspectra of measured traces from segment-ensemble cumulants of windowed
//! Fourier coefficients.
//!
//! Each segment of `L` samples is mean-subtracted, windowed with `w_n` and
//! transformed as `z_s(w_k) = dt sum_n w_n z_n e^{i w_k n dt}` with
//! `w_k = 2 pi k / (L dt)`. The unbiased joint cumulant across segments of
//! `n` coefficients whose frequencies sum to zero estimates
//! `dt sum_n w_n^n S(n)`, which fixes the normalization.

mod cumulants;

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use cumulants::{jackknife, JackknifeEstimate, PowerSums};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::polyspectra::PolySpectrum;

pub const MIN_SEGMENT_LENGTH: usize = 64;
pub const MIN_SEGMENTS: usize = 8;
pub const MAX_OVERLAP: f64 = 0.75;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| {
                    let s = (std::f64::consts::PI * n as f64 / len as f64).sin();
                    s * s
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Samples per segment.
    pub segment_length: usize,
    #[serde(default)]
    pub window: Window,
    /// Fraction of a segment shared with the next one.
    #[serde(default)]
    pub overlap: f64,
    /// Largest |w| on the output grid (rad/ns). Defaults to the largest
    /// representable frequency.
    #[serde(default)]
    pub max_frequency: Option<f64>,
    /// Keep every `decimation`-th FFT bin.
    #[serde(default = "one")]
    pub decimation: usize,
    /// Segment groups for the jackknife.
    #[serde(default = "groups")]
    pub jackknife_groups: usize,
    /// When set, the order-2 estimate records the floor `beta^2 / 4`.
    #[serde(default)]
    pub beta2: Option<f64>,
    #[serde(default)]
    pub execution: Execution,
}

fn one() -> usize {
    1
}
fn groups() -> usize {
    20
}

impl EstimatorConfig {
    pub fn new(segment_length: usize) -> Self {
        Self {
            segment_length,
            window: Window::Hann,
            overlap: 0.0,
            max_frequency: None,
            decimation: 1,
            jackknife_groups: groups(),
            beta2: None,
            execution: Execution::default(),
        }
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn with_max_frequency(mut self, w: f64) -> Self {
        self.max_frequency = Some(w);
        self
    }

    pub fn with_decimation(mut self, d: usize) -> Self {
        self.decimation = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| Error::InvalidParameter {
            name: name.into(),
            reason,
        };
        if self.segment_length < MIN_SEGMENT_LENGTH {
            return Err(bad("segment_length", format!("{} < {MIN_SEGMENT_LENGTH}", self.segment_length)));
        }
        if !(0.0..=MAX_OVERLAP).contains(&self.overlap) {
            return Err(bad("overlap", format!("{} not in [0, {MAX_OVERLAP}]", self.overlap)));
        }
        if self.decimation == 0 {
            return Err(bad("decimation", "must be at least 1".into()));
        }
        if self.jackknife_groups < 2 {
            return Err(bad("jackknife_groups", "need at least 2".into()));
        }
        Ok(())
    }

    fn hop(&self) -> usize {
        ((self.segment_length as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    /// Segments available in a trace of `len` samples.
    pub fn segments_in(&self, len: usize) -> usize {
        if len < self.segment_length {
            0
        } else {
            (len - self.segment_length) / self.hop() + 1
        }
    }
}

/// Estimated spectrum with jackknife standard errors per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatedSpectrum {
    pub spectrum: PolySpectrum,
    pub segments: usize,
    pub errors_re: Vec<f64>,
    pub errors_im: Vec<f64>,
}

impl EstimatedSpectrum {
    /// Fraction of grid points with `|Re| < k sigma_re` and `|Im| < k sigma_im`.
    pub fn fraction_within(&self, k: f64) -> f64 {
        let inside = self
            .spectrum
            .values
            .iter()
            .zip(self.errors_re.iter().zip(&self.errors_im))
            .filter(|(v, (er, ei))| v.re.abs() <= k * **er && v.im.abs() <= k * **ei)
            .count();
        inside as f64 / self.spectrum.values.len() as f64
    }
}

/// Windowed Fourier coefficients of every segment on bins `-kmax..=kmax`.
struct Coefficients {
    /// `coef[s][k + kmax]`.
    coef: Vec<Vec<C64>>,
    kmax: usize,
    bin: f64,
    power: [f64; 5],
}

impl Coefficients {
    fn at(&self, s: usize, k: i64) -> C64 {
        self.coef[s][(k + self.kmax as i64) as usize]
    }
}

fn transform(traces: &[&[f64]], dt: f64, cfg: &EstimatorConfig, kmax: usize) -> Result<Coefficients> {
    let len = cfg.segment_length;
    let w = cfg.window.weights(len);
    let mut power = [0.0; 5];
    for (p, item) in power.iter_mut().enumerate() {
        *item = w.iter().map(|x| x.powi(p as i32)).sum::<f64>() * dt;
    }
    let hop = cfg.hop();
    let starts: Vec<(usize, usize)> = traces
        .iter()
        .enumerate()
        .flat_map(|(t, tr)| (0..cfg.segments_in(tr.len())).map(move |s| (t, s * hop)))
        .collect();
    if starts.len() < MIN_SEGMENTS {
        return Err(Error::TooFewSegments {
            got: starts.len(),
            need: MIN_SEGMENTS,
        });
    }
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(len);
    let coef = cfg.execution.map(&starts, |&(t, start)| {
        let seg = &traces[t][start..start + len];
        let mean = seg.iter().sum::<f64>() / len as f64;
        let mut buf: Vec<C64> = seg.iter().zip(&w).map(|(z, w)| C64::new((z - mean) * w * dt, 0.0)).collect();
        fft.process(&mut buf);
        // Negative bins are the conjugates of the positive ones for a real
        // trace; taking them that way keeps S2 exactly real and even.
        (-(kmax as i64)..=kmax as i64)
            .map(|k| {
                let v = buf[k.unsigned_abs() as usize % len];
                if k < 0 {
                    v.conj()
                } else {
                    v
                }
            })
            .collect()
    });
    Ok(Coefficients {
        coef,
        kmax,
        bin: std::f64::consts::TAU / (len as f64 * dt),
        power,
    })
}

/// Largest bin on the output grid, rounded down to a multiple of the
/// decimation. `reach` is how many output-grid extents must fit below Nyquist.
fn grid_extent(dt: f64, cfg: &EstimatorConfig, reach: usize) -> Result<usize> {
    cfg.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt".into(),
            reason: format!("must be positive, got {dt}"),
        });
    }
    let len = cfg.segment_length;
    let limit = len / 2 / reach;
    let bin = std::f64::consts::TAU / (len as f64 * dt);
    let k = match cfg.max_frequency {
        None => limit,
        Some(w) => {
            let k = (w / bin + 1e-9).floor() as usize;
            if k > limit {
                return Err(Error::Grid(format!(
                    "max_frequency {w} exceeds the representable {} for order {}",
                    limit as f64 * bin,
                    reach + 1
                )));
            }
            k
        }
    };
    let k = k / cfg.decimation * cfg.decimation;
    if k == 0 {
        return Err(Error::Grid("grid has no nonzero frequency".into()));
    }
    Ok(k)
}

fn grid_bins(k: usize, d: usize) -> Vec<i64> {
    let k = k as i64;
    let d = d as i64;
    (-k / d..=k / d).map(|i| i * d).collect()
}

fn groups_of(m: usize, g: usize) -> Vec<std::ops::Range<usize>> {
    let g = g.min(m);
    (0..g).map(|i| (i * m / g)..((i + 1) * m / g)).collect()
}

fn estimate_point<F: Fn(usize) -> [C64; 4]>(order: usize, m: usize, groups: usize, x: F) -> JackknifeEstimate {
    let parts: Vec<PowerSums> = groups_of(m, groups)
        .into_iter()
        .map(|r| {
            let mut p = PowerSums::new(order);
            for s in r {
                p.push(&x(s)[..order]);
            }
            p
        })
        .collect();
    jackknife(&parts).expect("at least MIN_SEGMENTS segments")
}

fn finish(
    mut spectrum: PolySpectrum,
    est: Vec<JackknifeEstimate>,
    norm: f64,
    segments: usize,
    cfg: &EstimatorConfig,
) -> EstimatedSpectrum {
    spectrum.values = est.iter().map(|e| e.value / norm).collect();
    spectrum.meta.insert("method".into(), "segment k-statistics".into());
    spectrum.meta.insert("segments".into(), segments.to_string());
    spectrum.meta.insert("window".into(), format!("{:?}", cfg.window).to_lowercase());
    EstimatedSpectrum {
        spectrum,
        segments,
        errors_re: est.iter().map(|e| e.error_re / norm).collect(),
        errors_im: est.iter().map(|e| e.error_im / norm).collect(),
    }
}

/// `S2(w) ~ k2(z(w), z(-w)) / (dt sum w^2)` on `-kmax..=kmax`.
pub fn estimate_s2(traces: &[&[f64]], dt: f64, cfg: &EstimatorConfig) -> Result<EstimatedSpectrum> {
    let kmax = grid_extent(dt, cfg, 1)?;
    let c = transform(traces, dt, cfg, kmax)?;
    let m = c.coef.len();
    let bins = grid_bins(kmax, cfg.decimation);
    let est = cfg.execution.map(&bins, |&k| {
        estimate_point(2, m, cfg.jackknife_groups, |s| [c.at(s, k), c.at(s, -k), C64::ZERO, C64::ZERO])
    });
    let omega: Vec<f64> = bins.iter().map(|&k| k as f64 * c.bin).collect();
    let beta2 = cfg.beta2.unwrap_or(0.0);
    let n = omega.len();
    let mut spec = PolySpectrum::new_1d(omega, vec![C64::ZERO; n], beta2);
    spec.includes_noise_floor = true;
    if cfg.beta2.is_none() {
        spec.noise_floor = 0.0;
    }
    Ok(finish(spec, est, c.power[2], m, cfg))
}

/// `S3(w1, w2) ~ k3(z(w1), z(w2), z(-w1-w2)) / (dt sum w^3)`.
pub fn estimate_s3(traces: &[&[f64]], dt: f64, cfg: &EstimatorConfig) -> Result<EstimatedSpectrum> {
    let kmax = grid_extent(dt, cfg, 2)?;
    let c = transform(traces, dt, cfg, 2 * kmax)?;
    let m = c.coef.len();
    let bins = grid_bins(kmax, cfg.decimation);
    let nb = bins.len();
    let est = cfg.execution.map_range(nb * nb, |p| {
        let (k1, k2) = (bins[p / nb], bins[p % nb]);
        estimate_point(3, m, cfg.jackknife_groups, |s| {
            [c.at(s, k1), c.at(s, k2), c.at(s, -k1 - k2), C64::ZERO]
        })
    });
    let omega: Vec<f64> = bins.iter().map(|&k| k as f64 * c.bin).collect();
    let spec = PolySpectrum::new_2d(3, omega.clone(), omega, vec![C64::ZERO; nb * nb], cfg.beta2.unwrap_or(0.0));
    Ok(finish(spec, est, c.power[3], m, cfg))
}

/// Cut `S4(w1, w2, -w1, -w2) ~ k4(z(w1), z(-w1), z(w2), z(-w2)) / (dt sum w^4)`.
pub fn estimate_s4(traces: &[&[f64]], dt: f64, cfg: &EstimatorConfig) -> Result<EstimatedSpectrum> {
    let kmax = grid_extent(dt, cfg, 1)?;
    let c = transform(traces, dt, cfg, kmax)?;
    let m = c.coef.len();
    let bins = grid_bins(kmax, cfg.decimation);
    let nb = bins.len();
    let est = cfg.execution.map_range(nb * nb, |p| {
        let (k1, k2) = (bins[p / nb], bins[p % nb]);
        estimate_point(4, m, cfg.jackknife_groups, |s| {
            [c.at(s, k1), c.at(s, -k1), c.at(s, k2), c.at(s, -k2)]
        })
    });
    let omega: Vec<f64> = bins.iter().map(|&k| k as f64 * c.bin).collect();
    let spec = PolySpectrum::new_2d(4, omega.clone(), omega, vec![C64::ZERO; nb * nb], cfg.beta2.unwrap_or(0.0));
    Ok(finish(spec, est, c.power[4], m, cfg))
}
