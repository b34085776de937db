//! Globally adaptive Gauss-Kronrod (7/15) integration of complex integrands
//! over the whole real line.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights on XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 0.0,
            max_intervals: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> Piece {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let s = f(mid - dx) + f(mid + dx);
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    Piece {
        a,
        b,
        value: k * half,
        error: ((k - g) * half).norm(),
    }
}

/// `int_a^b f`, bisecting the worst interval until the summed error estimate
/// meets the tolerance.
pub fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<Estimate> {
    let initial = 8;
    let mut pieces: Vec<Piece> = (0..initial)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / initial as f64;
            let hi = a + (b - a) * (i + 1) as f64 / initial as f64;
            kronrod(&f, lo, hi)
        })
        .collect();
    loop {
        let value: C64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: "integrand".into(),
                reason: "non-finite value during quadrature".into(),
            });
        }
        if error <= opts.abs_tol.max(opts.rel_tol * value.norm()) {
            return Ok(Estimate {
                value,
                error,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::InvalidParameter {
                name: "quadrature".into(),
                reason: format!(
                    "no convergence after {} intervals (error {error:e}, value {value})",
                    pieces.len()
                ),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("non-empty");
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        pieces.push(kronrod(&f, p.a, m));
        pieces.push(kronrod(&f, m, p.b));
    }
}

/// `int_{-inf}^{inf} f(w) dw` through `w = scale t / (1 - t^2)`, `t in (-1, 1)`.
/// `scale` should match the width of the integrand's features.
pub fn integrate_real_line<F: Fn(f64) -> C64>(f: F, scale: f64, opts: QuadratureOptions) -> Result<Estimate> {
    let mapped = |t: f64| {
        let d = 1.0 - t * t;
        let w = scale * t / d;
        f(w) * (scale * (1.0 + t * t) / (d * d))
    };
    integrate(mapped, -1.0, 1.0, opts)
}
