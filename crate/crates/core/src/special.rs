//! Special functions and summation helpers used by the samplers and tests.

use libm::{exp, fabs, log, lgamma};

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

pub fn ln_gamma(x: f64) -> f64 {
    lgamma(x)
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`,
/// computed without cancellation in the upper tail.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if fabs(term) < fabs(sum) * EPS {
            break;
        }
    }
    sum * exp(-x + a * log(x) - ln_gamma(a))
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if fabs(delta - 1.0) < EPS {
            break;
        }
    }
    exp(-x + a * log(x) - ln_gamma(a)) * h
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    gamma_q(0.5 * dof, 0.5 * statistic)
}

/// Asymptotic Kolmogorov survival function `P(K > t)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        // The alternating series converges slowly here and the value is 1 to
        // machine precision anyway.
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = exp(-2.0 * kf * kf * t * t);
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if !t.is_finite() {
            self.sum = t;
            self.compensation = 0.0;
            return;
        }
        if fabs(self.sum) >= fabs(value) {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        if !self.sum.is_finite() {
            return self.sum;
        }
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::gamma as sg;

    #[test]
    fn incomplete_gamma_matches_statrs() {
        for &a in &[0.5, 1.0, 2.0, 3.5, 10.0, 50.0] {
            for &x in &[0.01, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0, 80.0] {
                let p = gamma_p(a, x);
                let q = gamma_q(a, x);
                assert_relative_eq!(p, sg::gamma_lr(a, x), max_relative = 1e-10, epsilon = 1e-14);
                assert_relative_eq!(q, sg::gamma_ur(a, x), max_relative = 1e-9, epsilon = 1e-300);
                assert_relative_eq!(p + q, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn compensated_sum_keeps_infinities() {
        assert_eq!(compensated_sum([1.0, f64::INFINITY, 2.0]), f64::INFINITY);
        assert!(compensated_sum([f64::INFINITY, f64::NEG_INFINITY]).is_nan());
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn exponential_tail_is_exact() {
        for &x in &[0.1, 1.0, 5.0, 20.0, 50.0] {
            assert_relative_eq!(gamma_q(1.0, x), libm::exp(-x), max_relative = 1e-12);
        }
    }

    #[test]
    fn chi_square_known_quantiles() {
        // 99th percentiles of chi-square with 1 and 9 dof.
        assert_relative_eq!(chi_square_sf(6.634_896_601_021_214, 1.0), 0.01, max_relative = 1e-8);
        assert_relative_eq!(chi_square_sf(21.665_994_333_461_924, 9.0), 0.01, max_relative = 1e-8);
    }

    #[test]
    fn kolmogorov_critical_value() {
        assert_relative_eq!(kolmogorov_sf(1.627_624_6), 0.01, max_relative = 1e-4);
        assert_relative_eq!(kolmogorov_sf(1.358_098_8), 0.05, max_relative = 1e-4);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(50.0), 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_relative_eq!(sigmoid(-3.0) + sigmoid(3.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(values), 2.0);
    }
}
