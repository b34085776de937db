//! Frozen-system references for random-time models.

use super::oracle::steady_state;
use crate::error::{Error, Result};
use crate::linalg::{trace, ComplexMatrix};
use crate::model::{measurement_superop, LiouvillianModel, ModelSpec};

/// `beta^2 Tr(A rho0)`.
fn mean_output(model: &LiouvillianModel) -> Result<f64> {
    let rho0 = steady_state(model)?;
    Ok(model.beta2() * trace(&measurement_superop(model.measurement_op())?.apply(&rho0)?).re)
}

fn expectation(op: &ComplexMatrix, rho: &ComplexMatrix) -> f64 {
    let n = rho.nrows();
    (0..n)
        .map(|i| (0..n).map(|k| op[(i, k)] * rho[(k, i)]).sum::<num_complex::Complex64>().re)
        .sum()
}

/// Frozen reference (`ModelSpec::frozen`) whose mean output equals that of
/// `spec`, and the coupling value that achieves it. Secant iteration from
/// the steady-state expectation of the coupling operator.
pub fn frozen_reference(spec: &ModelSpec) -> Result<(ModelSpec, f64)> {
    let not_random = || Error::InvalidParameter {
        name: "measurement".into(),
        reason: "a frozen reference needs a random-time model".into(),
    };
    let coupling = spec.coupling_operator()?.ok_or_else(not_random)?;
    let model = spec.build()?;
    let target = mean_output(&model)?;
    let start = expectation(&model.lift_system_op(&coupling)?, &steady_state(&model)?);
    let miss = |v: f64| -> Result<f64> {
        let m = spec.frozen(v).ok_or_else(not_random)?.build()?;
        Ok(mean_output(&m)? - target)
    };
    let scale = target.abs().max(1e-300);
    let (mut x0, mut f0) = (0.0, miss(0.0)?);
    let (mut x1, mut f1) = (start, miss(start)?);
    for _ in 0..60 {
        if f1.abs() <= 1e-12 * scale {
            return Ok((spec.frozen(x1).ok_or_else(not_random)?, x1));
        }
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        (x0, f0) = (x1, f1);
        x1 = x2;
        f1 = miss(x1)?;
    }
    Err(Error::Fit(format!("frozen reference: mean output off by {f1:e} at coupling {x1}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::{single_spin_random_time, two_level_continuous, two_spin_random_time};

    #[test]
    fn matches_the_mean_output() {
        let spec = two_spin_random_time(0.05);
        let (reference, value) = frozen_reference(&spec).unwrap();
        let want = mean_output(&spec.build().unwrap()).unwrap();
        let got = mean_output(&reference.build().unwrap()).unwrap();
        assert!((got - want).abs() < 1e-9 * want.abs(), "{got} {want}");
        assert!(value < 0.0 && value > -0.5, "{value}");
        assert_eq!(reference.build().unwrap().dim(), 9);
    }

    #[test]
    fn zero_mean_gives_zero_coupling() {
        let (_, value) = frozen_reference(&single_spin_random_time(0.5)).unwrap();
        assert!(value.abs() < 1e-9, "{value}");
        assert!(frozen_reference(&two_level_continuous()).is_err());
    }
}
