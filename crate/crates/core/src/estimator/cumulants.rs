//! Unbiased joint cumulants (k-statistics) of up to four complex variables
//! from power sums.
//!
//! `sums[mask]` is `sum_s prod_{i in mask} x_i(s)` over the sample, with
//! `sums[0] = n`. Sums are additive, so sub-samples (jackknife) are cheap.

use num_complex::Complex64 as C64;

/// Power sums over every subset of `order` variables.
#[derive(Clone, Debug)]
pub struct PowerSums {
    order: usize,
    sums: Vec<C64>,
}

impl PowerSums {
    pub fn new(order: usize) -> Self {
        assert!((1..=4).contains(&order), "order must be 1..=4");
        Self {
            order,
            sums: vec![C64::ZERO; 1 << order],
        }
    }

    pub fn count(&self) -> f64 {
        self.sums[0].re
    }

    /// Adds one observation of the `order` variables.
    pub fn push(&mut self, x: &[C64]) {
        debug_assert_eq!(x.len(), self.order);
        let mut prod = [C64::ONE; 16];
        for mask in 1..(1usize << self.order) {
            let low = mask.trailing_zeros() as usize;
            prod[mask] = prod[mask & (mask - 1)] * x[low];
        }
        self.sums[0] += 1.0;
        for (s, p) in self.sums.iter_mut().zip(&prod).skip(1) {
            *s += p;
        }
    }

    pub fn add(&mut self, other: &PowerSums) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
    }

    pub fn sub(&mut self, other: &PowerSums) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a -= b;
        }
    }

    /// Sample central moment of the variables in `mask`.
    fn central(&self, mask: usize) -> C64 {
        let n = self.count();
        let mean = |i: usize| self.sums[1 << i] / n;
        let raw = |m: usize| if m == 0 { C64::ONE } else { self.sums[m] / n };
        // Sum over subsets s of mask of (-1)^|s| prod_{i in s} mean_i * raw(mask \ s).
        let mut total = C64::ZERO;
        let mut s = mask;
        loop {
            let mut term = raw(mask & !s);
            let mut bits = s;
            while bits != 0 {
                term *= -mean(bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
            total += term;
            if s == 0 {
                break;
            }
            s = (s - 1) & mask;
        }
        total
    }

    /// Unbiased joint cumulant of all `order` variables; `None` when the
    /// sample is too small.
    pub fn k_statistic(&self) -> Option<C64> {
        let n = self.count();
        let full = (1usize << self.order) - 1;
        match self.order {
            1 => (n >= 1.0).then(|| self.sums[1] / n),
            2 => (n >= 2.0).then(|| self.central(full) * (n / (n - 1.0))),
            3 => (n >= 3.0).then(|| self.central(full) * (n * n / ((n - 1.0) * (n - 2.0)))),
            _ => {
                if n < 4.0 {
                    return None;
                }
                let pair = |a: usize, b: usize| self.central((1 << a) | (1 << b));
                let pairs = pair(0, 1) * pair(2, 3) + pair(0, 2) * pair(1, 3) + pair(0, 3) * pair(1, 2);
                let m4 = self.central(full);
                Some((m4 * (n + 1.0) - pairs * (n - 1.0)) * (n * n) / ((n - 1.0) * (n - 2.0) * (n - 3.0)))
            }
        }
    }
}

/// Joint cumulant estimate plus grouped-jackknife standard errors of the
/// real and imaginary parts.
#[derive(Clone, Copy, Debug)]
pub struct JackknifeEstimate {
    pub value: C64,
    pub error_re: f64,
    pub error_im: f64,
}

/// k-statistic of the pooled groups and its leave-one-group-out spread.
pub fn jackknife(groups: &[PowerSums]) -> Option<JackknifeEstimate> {
    let order = groups.first()?.order;
    let mut total = PowerSums::new(order);
    for g in groups {
        total.add(g);
    }
    let value = total.k_statistic()?;
    let k = groups.len();
    if k < 2 {
        return Some(JackknifeEstimate {
            value,
            error_re: f64::NAN,
            error_im: f64::NAN,
        });
    }
    let mut loo = Vec::with_capacity(k);
    for g in groups {
        let mut rest = total.clone();
        rest.sub(g);
        loo.push(rest.k_statistic()?);
    }
    let mean = loo.iter().sum::<C64>() / k as f64;
    let f = (k as f64 - 1.0) / k as f64;
    let var_re: f64 = loo.iter().map(|v| (v.re - mean.re).powi(2)).sum::<f64>() * f;
    let var_im: f64 = loo.iter().map(|v| (v.im - mean.im).powi(2)).sum::<f64>() * f;
    Some(JackknifeEstimate {
        value,
        error_re: var_re.sqrt(),
        error_im: var_im.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn real(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn univariate(xs: &[f64], order: usize) -> f64 {
        let mut p = PowerSums::new(order);
        for &x in xs {
            p.push(&vec![real(x); order]);
        }
        p.k_statistic().unwrap().re
    }

    #[test]
    fn matches_textbook_formulas() {
        let xs = [0.3, -1.2, 2.5, 0.7, 0.1, -0.4, 1.9];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
        let k2 = n / (n - 1.0) * m(2);
        let k3 = n * n / ((n - 1.0) * (n - 2.0)) * m(3);
        let k4 = n * n * ((n + 1.0) * m(4) - 3.0 * (n - 1.0) * m(2) * m(2)) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
        assert!((univariate(&xs, 1) - mean).abs() < 1e-14);
        assert!((univariate(&xs, 2) - k2).abs() < 1e-13);
        assert!((univariate(&xs, 3) - k3).abs() < 1e-13);
        assert!((univariate(&xs, 4) - k4).abs() < 1e-12);
    }

    #[test]
    fn unbiased_on_small_samples() {
        // Exp(1): cumulants k_n = (n-1)!.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reps = 100_000;
        let mut acc = [0.0; 3];
        for _ in 0..reps {
            let xs: Vec<f64> = (0..8).map(|_| Exp1.sample(&mut rng)).collect();
            for (a, order) in acc.iter_mut().zip(2..=4) {
                *a += univariate(&xs, order) / reps as f64;
            }
        }
        assert!((acc[0] - 1.0).abs() < 0.02, "{}", acc[0]);
        assert!((acc[1] - 2.0).abs() < 0.08, "{}", acc[1]);
        assert!((acc[2] - 6.0).abs() < 0.5, "{}", acc[2]);
    }

    #[test]
    fn joint_cumulant_of_independent_parts_vanishes() {
        // x and y independent: cum(x, x, y, y) = 0 while each k4 is not.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = PowerSums::new(4);
        for _ in 0..200_000 {
            let x: f64 = Exp1.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            p.push(&[real(x), real(x), real(y), real(y)]);
        }
        assert!(p.k_statistic().unwrap().norm() < 0.05);
    }

    #[test]
    fn jackknife_errors_match_sampling_spread() {
        // Var of the sample variance of N(0,1) is about 2 / N; one jackknife
        // estimate scatters by ~1/sqrt(2 (groups - 1)), so average 40 of them.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for per_group in [50, 800] {
            let mut mean_err = 0.0;
            for _ in 0..40 {
                let groups: Vec<PowerSums> = (0..20)
                    .map(|_| {
                        let mut p = PowerSums::new(2);
                        for _ in 0..per_group {
                            let x: f64 = StandardNormal.sample(&mut rng);
                            p.push(&[real(x), real(x)]);
                        }
                        p
                    })
                    .collect();
                let e = jackknife(&groups).unwrap();
                assert_eq!(e.error_im, 0.0);
                mean_err += e.error_re / 40.0;
            }
            let want = (2.0 / (20.0 * per_group as f64)).sqrt();
            assert!((mean_err / want - 1.0).abs() < 0.08, "{per_group}: {mean_err} vs {want}");
        }
    }
}
