use faer::Mat;
use num_complex::Complex64 as C64;

use super::{ensure_square, solve, ComplexMatrix};
use crate::error::{Error, Result};

// Degree-13 Pade coefficients and the matching 1-norm threshold.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `exp(M t)` for `t >= 0`.
pub fn expm(m: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t".into(),
            reason: format!("propagation time must be finite and non-negative, got {t}"),
        });
    }
    ensure_square(m)?;
    Ok(expm_unit(&(m * faer::Scale(C64::new(t, 0.0)))))
}

/// `exp(A)` by scaling and squaring with a degree-13 Pade approximant.
pub fn expm_unit(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * faer::Scale(C64::new(0.5f64.powi(squarings), 0.0));
    let id = Mat::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| faer::Scale(C64::new(PADE13[k], 0.0));

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = &a * (u_inner + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let v_inner = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = v_inner + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let mut r = solve(&(&v - &u), &(&v + &u));
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
