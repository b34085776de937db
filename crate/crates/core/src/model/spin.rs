//! Spin-1/2 operators (`s_i = sigma_i / 2`, basis order `|up>, |down>` in z)
//! and the single- and two-spin systems.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64 as C64;

use super::{embed, HilbertFactor, JumpTerm, SystemSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix};

pub fn sx() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| if i != j { c(0.5, 0.0) } else { C64::ZERO })
}

pub fn sy() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c(0.0, -0.5),
        (1, 0) => c(0.0, 0.5),
        _ => C64::ZERO,
    })
}

pub fn sz() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(0.5, 0.0),
        (1, 1) => c(-0.5, 0.0),
        _ => C64::ZERO,
    })
}

/// `|up><down|`.
pub fn raising() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| if (i, j) == (0, 1) { C64::ONE } else { C64::ZERO })
}

/// `|down><up|`.
pub fn lowering() -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| if (i, j) == (1, 0) { C64::ONE } else { C64::ZERO })
}

pub fn spin_factor(label: &str) -> HilbertFactor {
    HilbertFactor::new(label, &["up", "down"]).expect("static basis")
}

/// Spin precessing about x: `H_s = omega_L s_x`.
pub fn single_spin_system(omega_l: f64) -> Result<SystemSpec> {
    finite("omega_l", omega_l)?;
    let h = &sx() * faer::Scale(c(omega_l, 0.0));
    let mut params = BTreeMap::new();
    params.insert("omega_l".to_string(), omega_l);
    Ok(SystemSpec {
        factors: vec![spin_factor("s")],
        hamiltonian: h,
        jumps: Vec::new(),
        params,
    })
}

/// Two spins in a field tilted by `phi` from z towards x, with isotropic
/// exchange `g_c` and relaxation `(gamma_s / 2) D[d_s]` pushing spin 1 down.
pub fn two_spin_system(
    omega_l1: f64,
    omega_l2: f64,
    g_c: f64,
    phi: f64,
    gamma_s: f64,
) -> Result<SystemSpec> {
    for (name, v) in [("omega_l1", omega_l1), ("omega_l2", omega_l2), ("g_c", g_c), ("phi", phi)] {
        finite(name, v)?;
    }
    if !(gamma_s >= 0.0) || !gamma_s.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma_s".into(),
            reason: format!("must be finite and non-negative, got {gamma_s}"),
        });
    }
    let dims = [2, 2];
    let on = |op: &ComplexMatrix, k: usize| embed(op, k, &dims);
    let (s, cphi) = (phi.sin(), phi.cos());
    let zeeman = |k: usize, w: f64| {
        (on(&sx(), k) * faer::Scale(c(w * s, 0.0))) + (on(&sz(), k) * faer::Scale(c(w * cphi, 0.0)))
    };
    let exchange = &on(&sx(), 0) * &on(&sx(), 1)
        + &on(&sy(), 0) * &on(&sy(), 1)
        + &on(&sz(), 0) * &on(&sz(), 1);
    let h = zeeman(0, omega_l1) + zeeman(1, omega_l2) + exchange * faer::Scale(c(g_c, 0.0));

    let mut jumps = Vec::new();
    if gamma_s > 0.0 {
        jumps.push(JumpTerm::new("spin relaxation", gamma_s / 2.0, on(&lowering(), 0))?);
    }
    let params = BTreeMap::from([
        ("omega_l1".to_string(), omega_l1),
        ("omega_l2".to_string(), omega_l2),
        ("g_c".to_string(), g_c),
        ("phi".to_string(), phi),
        ("gamma_s".to_string(), gamma_s),
    ]);
    Ok(SystemSpec {
        factors: vec![spin_factor("s1"), spin_factor("s2")],
        hamiltonian: h,
        jumps,
        params,
    })
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: name.into(),
            reason: format!("must be finite, got {v}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, is_hermitian};
    use crate::testutil::assert_mat_close;
    use std::f64::consts::PI;

    #[test]
    fn spin_algebra() {
        // [s_x, s_y] = i s_z
        let comm = &sx() * &sy() - &sy() * &sx();
        assert_mat_close(&comm, &(&sz() * faer::Scale(c(0.0, 1.0))), 1e-15);
        assert_mat_close(&(&raising() + &lowering()), &(&sx() * faer::Scale(c(2.0, 0.0))), 0.0);
    }

    #[test]
    fn decoupled_two_spin_energies() {
        let (w1, w2) = (2.0, 0.6);
        let sys = two_spin_system(w1, w2, 0.0, 0.0, 0.0).unwrap();
        assert!(is_hermitian(&sys.hamiltonian, 1e-14));
        let mut e: Vec<f64> = eigenvalues(&sys.hamiltonian).unwrap().iter().map(|v| v.re).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = vec![];
        for a in [-0.5, 0.5] {
            for b in [-0.5, 0.5] {
                want.push(a * w1 + b * w2);
            }
        }
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in e.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(sys.jumps.is_empty());
    }

    #[test]
    fn default_two_spin_parameters_build() {
        let sys = two_spin_system(2.0 * PI * 1.5, 0.0, 2.0 * PI * 1.5, PI / 6.0, 0.05).unwrap();
        assert_eq!(sys.factors.len(), 2);
        assert_eq!(sys.jumps.len(), 1);
        assert!((sys.jumps[0].rate - 0.025).abs() < 1e-15);
        assert!(two_spin_system(1.0, 0.0, 0.0, 0.0, -1.0).is_err());
    }
}
