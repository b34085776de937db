//! Peak positions, widths and the linewidth-versus-rate fit used to
//! summarize spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    /// Grid frequency of the maximum sample.
    pub omega: f64,
    pub value: f64,
}

/// Largest sample (first one on ties); `None` for an empty or all-NaN input.
pub fn find_peak(omega: &[f64], values: &[f64]) -> Option<Peak> {
    let (index, &value) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold(None, |best: Option<(usize, &f64)>, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })?;
    Some(Peak {
        index,
        omega: omega[index],
        value,
    })
}

/// Interior local maxima whose prominence (height above the higher of the
/// two surrounding minima) exceeds `min_prominence * (max - min)`.
pub fn local_maxima(omega: &[f64], values: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let need = min_prominence * (hi - lo);
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        // Walk across a plateau so that flat tops count once.
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if j + 1 < n && values[i] > values[i - 1] && values[i] > values[j + 1] {
            let v = values[i];
            let left = values[..i].iter().rev().take_while(|&&x| x <= v).fold(v, |m, &x| m.min(x));
            let right = values[j + 1..].iter().take_while(|&&x| x <= v).fold(v, |m, &x| m.min(x));
            if v - left.max(right) > need {
                let mid = (i + j) / 2;
                out.push(Peak {
                    index: mid,
                    omega: omega[mid],
                    value: values[mid],
                });
            }
        }
        i = j + 1;
    }
    out
}

/// Parabola through three samples around a maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    /// Vertex position.
    pub omega: f64,
    /// Vertex height above the baseline.
    pub height: f64,
    /// Half width at half maximum of the Lorentzian with the same height
    /// and curvature, `sqrt(-height / curvature)`.
    pub hwhm: f64,
}

/// Local parabolic fit at `index` (a maximum of `values - baseline`).
///
/// Fails at the grid edge, on non-negative curvature, and when the width is
/// under two grid steps (a lone spike fits to one step).
pub fn parabolic_hwhm(omega: &[f64], values: &[f64], index: usize, baseline: f64) -> Result<PeakFit> {
    if index == 0 || index + 1 >= values.len() {
        return Err(Error::PeakUnresolved(format!("maximum at grid edge (index {index})")));
    }
    let (x0, x1, x2) = (omega[index - 1], omega[index], omega[index + 1]);
    let (y0, y1, y2) = (values[index - 1] - baseline, values[index] - baseline, values[index + 1] - baseline);
    // Newton form: y = y1 + d1 (x - x1) + a (x - x1)^2 through the three points.
    let s0 = (y1 - y0) / (x1 - x0);
    let s1 = (y2 - y1) / (x2 - x1);
    let a = (s1 - s0) / (x2 - x0);
    if !(a < 0.0) {
        return Err(Error::PeakUnresolved(format!("curvature {a:e} at {x1} is not negative")));
    }
    let d1 = s0 + a * (x1 - x0);
    let shift = -d1 / (2.0 * a);
    let height = y1 + d1 * shift + a * shift * shift;
    if !(height > 0.0) {
        return Err(Error::PeakUnresolved(format!("peak at {x1} does not rise above the baseline")));
    }
    let hwhm = (-height / a).sqrt();
    let step = (x2 - x0) / 2.0;
    if hwhm < 2.0 * step {
        return Err(Error::PeakUnresolved(format!("width {hwhm:e} under two grid steps of {step:e}")));
    }
    Ok(PeakFit {
        omega: x1 + shift,
        height,
        hwhm,
    })
}

/// Distance from `omega[center]` to the outermost point, on the side of
/// increasing `omega`, where `values` still reaches `level`; linearly
/// interpolated to the crossing. `None` if nothing beyond `center` falls
/// below `level`.
pub fn outer_half_width(omega: &[f64], values: &[f64], center: usize, level: f64) -> Option<f64> {
    let last = (center..values.len()).rev().find(|&i| values[i] >= level)?;
    if last + 1 >= values.len() {
        return None;
    }
    let (xa, xb, ya, yb) = (omega[last], omega[last + 1], values[last], values[last + 1]);
    let x = xa + (ya - level) / (ya - yb) * (xb - xa);
    Some(x - omega[center])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinewidthFit {
    /// Least-squares slope of `width = slope * rate`.
    pub slope: f64,
    /// `1 - SS_res / SS_tot` with `SS_tot` about the mean width.
    pub r_squared: f64,
}

/// Straight line through the origin for width versus rate.
pub fn linewidth_fit(rates: &[f64], widths: &[f64]) -> Result<LinewidthFit> {
    if rates.len() != widths.len() {
        return Err(Error::Fit(format!("{} rates but {} widths", rates.len(), widths.len())));
    }
    if rates.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 rates, got {}", rates.len())));
    }
    if rates.iter().chain(widths).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let sxx: f64 = rates.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all rates are zero".into()));
    }
    let slope = rates.iter().zip(widths).map(|(x, y)| x * y).sum::<f64>() / sxx;
    let mean = widths.iter().sum::<f64>() / widths.len() as f64;
    let ss_res: f64 = rates.iter().zip(widths).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let ss_tot: f64 = widths.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Fit("widths do not vary".into()));
    }
    Ok(LinewidthFit {
        slope,
        r_squared: 1.0 - ss_res / ss_tot,
    })
}
