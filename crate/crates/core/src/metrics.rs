//! Filter-averaged distances between rate functions and the closed-form
//! Hellinger, Kullback-Leibler and variance discrepancies between the laws of
//! filtered Poisson processes.
//!
//! Every function takes the candidate rate first and the reference rate
//! second. For `kl_n` and `var_n` the reference is the data-generating rate.

use alloc::vec::Vec;

use libm::{expm1, fabs, log, sqrt};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{quadrature_with, GridField};
use crate::pointprocess::{simulate_nhpp, FilterBank};
use crate::special::{compensated_sum, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceReport {
    pub gamma_inf: f64,
    pub gamma_l2: f64,
    pub gamma_sqrt_l2: f64,
    pub hellinger: f64,
    pub kl: f64,
    pub variance: f64,
}

impl DistanceReport {
    pub const COLUMNS: [&'static str; 6] = ["gamma_inf", "gamma_l2", "gamma_sqrt_l2", "hellinger", "kl", "variance"];

    pub fn values(&self) -> [f64; 6] {
        [self.gamma_inf, self.gamma_l2, self.gamma_sqrt_l2, self.hellinger, self.kl, self.variance]
    }
}

fn check(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<()> {
    lam.grid().ensure_same(lam0.grid())?;
    lam.grid().ensure_same(filters.grid())?;
    if filters.is_empty() {
        return Err(Error::Precondition("distance needs at least one filter".into()));
    }
    Ok(())
}

fn check_nonnegative(f: &GridField, context: &'static str) -> Result<()> {
    if let Some(&value) = f.values().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::NegativeValue { value, context });
    }
    Ok(())
}

fn average<F: FnMut(&GridField) -> f64>(filters: &FilterBank, f: F) -> f64 {
    compensated_sum(filters.iter().map(f)) / filters.len() as f64
}

/// `(1/n) Σ_j max_k |λ γ_j − λ0 γ_j|`.
pub fn gamma_inf(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
    check(lam, lam0, filters)?;
    let (a, b) = (lam.values(), lam0.values());
    Ok(average(filters, |gamma| {
        gamma
            .values()
            .iter()
            .enumerate()
            .map(|(k, g)| fabs(a[k] * g - b[k] * g))
            .fold(0.0, f64::max)
    }))
}

/// `(1/n) Σ_j ‖λ γ_j − λ0 γ_j‖₂`.
pub fn gamma_l2(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
    check(lam, lam0, filters)?;
    let (a, b) = (lam.values(), lam0.values());
    let grid = *lam.grid();
    Ok(average(filters, |gamma| {
        let g = gamma.values();
        sqrt(quadrature_with(&grid, |k| {
            let diff = a[k] * g[k] - b[k] * g[k];
            diff * diff
        }))
    }))
}

/// Squared root-L2 distance `‖√(λγ_j) − √(λ0γ_j)‖₂²` for every filter.
pub fn sqrt_l2_squared_per_filter(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<Vec<f64>> {
    check(lam, lam0, filters)?;
    check_nonnegative(lam, "candidate rate under a square root")?;
    check_nonnegative(lam0, "reference rate under a square root")?;
    let (a, b) = (lam.values(), lam0.values());
    let grid = *lam.grid();
    Ok(filters
        .iter()
        .map(|gamma| {
            let g = gamma.values();
            quadrature_with(&grid, |k| {
                let diff = sqrt(a[k] * g[k]) - sqrt(b[k] * g[k]);
                diff * diff
            })
        })
        .collect())
}

/// `(1/n) Σ_j ‖√(λγ_j) − √(λ0γ_j)‖₂`.
pub fn gamma_sqrt_l2(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
    let sq = sqrt_l2_squared_per_filter(lam, lam0, filters)?;
    Ok(compensated_sum(sq.iter().map(|&v| sqrt(v))) / sq.len() as f64)
}

/// `h_n` with `h_n² = (1/n) Σ_j 2(1 − exp(−½‖√(λγ_j) − √(λ0γ_j)‖₂²))`.
pub fn hellinger_n(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
    let sq = sqrt_l2_squared_per_filter(lam, lam0, filters)?;
    let h2 = compensated_sum(sq.iter().map(|&q| -2.0 * expm1(-0.5 * q))) / sq.len() as f64;
    Ok(sqrt(h2))
}

/// Nodewise `λ0 γ log(λ0/λ)` raised to `power`, with `0·log 0 = 0` and `+∞`
/// when the candidate vanishes where the reference has mass.
fn log_ratio_term(l: f64, l0: f64, g: f64, power: i32) -> f64 {
    let w = l0 * g;
    if w == 0.0 {
        return 0.0;
    }
    if l == 0.0 {
        return f64::INFINITY;
    }
    let r = log(l0 / l);
    w * if power == 1 { r } else { r * r }
}

fn check_kl_inputs(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<()> {
    check(lam, lam0, filters)?;
    check_nonnegative(lam, "candidate rate in a log ratio")?;
    check_nonnegative(lam0, "reference rate in a log ratio")
}

/// `(1/n) Σ_j [∫ (λ − λ0) γ_j + ∫ λ0 γ_j log(λ0/λ)]`.
pub fn kl_n(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
    check_kl_inputs(lam, lam0, filters)?;
    let (a, b) = (lam.values(), lam0.values());
    let grid = *lam.grid();
    Ok(average(filters, |gamma| {
        let g = gamma.values();
        let linear = quadrature_with(&grid, |k| (a[k] - b[k]) * g[k]);
        let log_part = quadrature_with(&grid, |k| log_ratio_term(a[k], b[k], g[k], 1));
        linear + log_part
    }))
}

/// `(1/n) Σ_j ∫ λ0 γ_j log²(λ0/λ)`.
pub fn var_n(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
    check_kl_inputs(lam, lam0, filters)?;
    let (a, b) = (lam.values(), lam0.values());
    let grid = *lam.grid();
    Ok(average(filters, |gamma| {
        let g = gamma.values();
        quadrature_with(&grid, |k| log_ratio_term(a[k], b[k], g[k], 2))
    }))
}

pub fn distance_report(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<DistanceReport> {
    Ok(DistanceReport {
        gamma_inf: gamma_inf(lam, lam0, filters)?,
        gamma_l2: gamma_l2(lam, lam0, filters)?,
        gamma_sqrt_l2: gamma_sqrt_l2(lam, lam0, filters)?,
        hellinger: hellinger_n(lam, lam0, filters)?,
        kl: kl_n(lam, lam0, filters)?,
        variance: var_n(lam, lam0, filters)?,
    })
}

/// Both sides of the Hellinger sandwich
/// `(1/√2) avg(‖·‖ ∧ 1) <= h_n <= √2 avg(‖·‖ ∧ 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBounds {
    pub lower: f64,
    pub hellinger: f64,
    pub upper: f64,
}

pub fn hellinger_sandwich(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<SandwichBounds> {
    let sq = sqrt_l2_squared_per_filter(lam, lam0, filters)?;
    let avg = compensated_sum(sq.iter().map(|&q| sqrt(q).min(1.0))) / sq.len() as f64;
    Ok(SandwichBounds {
        lower: avg / core::f64::consts::SQRT_2,
        hellinger: hellinger_n(lam, lam0, filters)?,
        upper: core::f64::consts::SQRT_2 * avg,
    })
}

/// Right-hand side of `k_n <= 3 (1/n) Σ ‖√(λγ_j) − √(λ0γ_j)‖₂² + v_n`.
pub fn kl_upper_bound(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
    let sq = sqrt_l2_squared_per_filter(lam, lam0, filters)?;
    Ok(3.0 * compensated_sum(sq.iter().copied()) / sq.len() as f64 + var_n(lam, lam0, filters)?)
}

/// Both sides of
/// `(1/n) Σ ‖√(λγ_j) − √(λ0γ_j)‖₂² <= (1/4n) Σ ∫ γ_j (λ ∨ λ0) log²(λ/λ0)`.
pub fn log_bound(lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<(f64, f64)> {
    let sq = sqrt_l2_squared_per_filter(lam, lam0, filters)?;
    let lhs = compensated_sum(sq.iter().copied()) / sq.len() as f64;
    let (a, b) = (lam.values(), lam0.values());
    let grid = *lam.grid();
    let rhs = average(filters, |gamma| {
        let g = gamma.values();
        quadrature_with(&grid, |k| {
            if a[k] == b[k] || g[k] == 0.0 {
                return 0.0;
            }
            if a[k] == 0.0 || b[k] == 0.0 {
                return f64::INFINITY;
            }
            let r = log(a[k] / b[k]);
            g[k] * a[k].max(b[k]) * r * r
        })
    }) / 4.0;
    Ok((lhs, rhs))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Estimates `h_n²` from its expectation form by simulating each filtered
/// realisation from `λ0 γ_j` and averaging `2(1 − √(p_λ / p_λ0))`.
///
/// The rate fields are read at nearest nodes, so the estimate targets the
/// same per-cell-constant functions as [`hellinger_n`].
pub fn monte_carlo_hellinger<R: Rng + ?Sized>(
    lam: &GridField,
    lam0: &GridField,
    filters: &FilterBank,
    replications: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check(lam, lam0, filters)?;
    check_nonnegative(lam, "candidate rate")?;
    check_nonnegative(lam0, "reference rate")?;
    if replications == 0 {
        return Err(Error::Precondition("monte_carlo_hellinger needs replications >= 1".into()));
    }
    let grid = *lam.grid();
    let n = filters.len() as f64;
    // Per filter: generating rate λ0γ_j and the compensator difference ∫γ_j(λ − λ0).
    let per_filter: Vec<(GridField, f64)> = filters
        .iter()
        .map(|gamma| {
            let g = gamma.values();
            let rate = GridField::new(grid, lam0.values().iter().zip(g).map(|(l, g)| l * g).collect())
                .expect("same grid");
            let comp = quadrature_with(&grid, |k| g[k] * (lam.values()[k] - lam0.values()[k]));
            (rate, comp)
        })
        .collect();

    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    for _ in 0..replications {
        let mut value = 0.0;
        for (rate, comp) in &per_filter {
            let x = simulate_nhpp(rate, rng)?;
            let mut log_ratio = -comp;
            for p in x.iter() {
                let k = grid.nearest_node(p);
                let (l, l0) = (lam.values()[k], lam0.values()[k]);
                log_ratio += if l == 0.0 { f64::NEG_INFINITY } else { log(l / l0) };
            }
            value += 2.0 * (1.0 - libm::exp(0.5 * log_ratio));
        }
        value /= n;
        sum.add(value);
        sum_sq.add(value * value);
    }
    let r = replications as f64;
    let mean = sum.value() / r;
    let var = if replications > 1 {
        ((sum_sq.value() - r * mean * mean) / (r - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: sqrt(var / r),
    })
}
