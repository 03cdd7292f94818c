//! Goodness-of-fit tests and convergence diagnostics used to validate the
//! simulator and the samplers.

use alloc::vec::Vec;

use libm::{exp, lgamma, log, sqrt};

use crate::special::{chi_square_sf, compensated_sum, kolmogorov_sf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: f64,
}

impl TestOutcome {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Pearson chi-square test of observed counts against expected counts.
/// `constrained` is the number of fitted constraints subtracted from the
/// degrees of freedom beyond the usual one.
pub fn chi_square_counts(observed: &[u64], expected: &[f64], constrained: usize) -> TestOutcome {
    assert_eq!(observed.len(), expected.len());
    let statistic = compensated_sum(observed.iter().zip(expected).map(|(&o, &e)| {
        let diff = o as f64 - e;
        diff * diff / e
    }));
    let dof = (observed.len() - 1 - constrained) as f64;
    TestOutcome {
        statistic,
        p_value: chi_square_sf(statistic, dof),
        dof,
    }
}

/// Chi-square test that `counts` are a draw from a uniform multinomial.
pub fn chi_square_uniform(counts: &[u64]) -> TestOutcome {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let expected = alloc::vec![e; counts.len()];
    chi_square_counts(counts, &expected, 0)
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    exp(kf * log(mean) - mean - lgamma(kf + 1.0))
}

/// Chi-square goodness of fit of integer samples against Poisson(`mean`).
///
/// Bins are `0, 1, ...` merged from both tails until every expected count is
/// at least 5; the final bin collects the upper tail.
pub fn chi_square_poisson(samples: &[u64], mean: f64) -> TestOutcome {
    let total = samples.len() as f64;
    let max_sample = samples.iter().copied().max().unwrap_or(0);
    let mut probs = Vec::new();
    let mut cumulative = 0.0;
    for k in 0..=max_sample {
        let p = poisson_pmf(k, mean);
        probs.push(p);
        cumulative += p;
    }
    // Upper tail beyond the largest observed value.
    if let Some(last) = probs.last_mut() {
        *last += (1.0 - cumulative).max(0.0);
    }
    let mut observed_raw = alloc::vec![0u64; probs.len()];
    for &s in samples {
        observed_raw[s as usize] += 1;
    }

    let mut bins_obs = Vec::new();
    let mut bins_exp = Vec::new();
    let mut acc_obs = 0u64;
    let mut acc_exp = 0.0;
    for (o, p) in observed_raw.iter().zip(&probs) {
        acc_obs += o;
        acc_exp += p * total;
        if acc_exp >= 5.0 {
            bins_obs.push(acc_obs);
            bins_exp.push(acc_exp);
            acc_obs = 0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0 {
        if let (Some(lo), Some(le)) = (bins_obs.last_mut(), bins_exp.last_mut()) {
            *lo += acc_obs;
            *le += acc_exp;
        } else {
            bins_obs.push(acc_obs);
            bins_exp.push(acc_exp);
        }
    }
    if bins_obs.len() < 2 {
        return TestOutcome {
            statistic: 0.0,
            p_value: 1.0,
            dof: 0.0,
        };
    }
    chi_square_counts(&bins_obs, &bins_exp, 0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, using the
/// Stephens small-sample correction of the asymptotic distribution.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> TestOutcome {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let upper = (i as f64 + 1.0) / n - f;
        let lower = f - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    let sn = sqrt(n);
    let t = (sn + 0.12 + 0.11 / sn) * d;
    TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf(t),
        dof: n,
    }
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() as f64 - 1.0)
}

/// Median of a slice (average of the two middle values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Potential scale reduction factor for equal-length chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * compensated_sum(means.iter().map(|x| (x - grand) * (x - grand)));
    let w = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let var_hat = (n - 1.0) / n * w + b / n;
    sqrt(var_hat / w)
}
