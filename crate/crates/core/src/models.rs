//! SGCP and QGCP prior models, the λ* hyperprior and the filtered-data
//! log-likelihood.

use alloc::format;
use alloc::vec::Vec;

use libm::{exp, log, pow};

use crate::error::{Error, Result};
use crate::gp::{LengthscalePrior, DEFAULT_JITTER};
use crate::grid::{quadrature_with, GridField};
use crate::pointprocess::{FilterSpec, Realisation};
use crate::special::{compensated_sum, gamma_q, ln_gamma, sigmoid, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// `λ = λ* σ(g)`.
    Sgcp,
    /// `λ = g²`.
    Qgcp,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgcp => "sgcp",
            Self::Qgcp => "qgcp",
        }
    }
}

/// Gamma(shape, rate) distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::Precondition(format!(
                "Gamma prior needs shape, rate > 0, got {shape}, {rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * log(self.rate) - ln_gamma(self.shape) + (self.shape - 1.0) * log(x) - self.rate * x
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// `P(X > x)`.
    pub fn upper_tail(&self, x: f64) -> f64 {
        gamma_q(self.shape, self.rate * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lamstar_prior: Option<GammaPrior>,
    pub lengthscale_prior: LengthscalePrior,
    pub kernel_jitter: f64,
}

impl ModelSpec {
    pub fn sgcp(lamstar_prior: GammaPrior, lengthscale_prior: LengthscalePrior) -> Self {
        Self {
            kind: ModelKind::Sgcp,
            lamstar_prior: Some(lamstar_prior),
            lengthscale_prior,
            kernel_jitter: DEFAULT_JITTER,
        }
    }

    pub fn qgcp(lengthscale_prior: LengthscalePrior) -> Self {
        Self {
            kind: ModelKind::Qgcp,
            lamstar_prior: None,
            lengthscale_prior,
            kernel_jitter: DEFAULT_JITTER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.lamstar_prior) {
            (ModelKind::Sgcp, None) => Err(Error::Precondition("SGCP requires a λ* prior".into())),
            (ModelKind::Qgcp, Some(_)) => Err(Error::Precondition("QGCP does not take a λ* prior".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub g: GridField,
    pub l: f64,
    pub lamstar: Option<f64>,
}

impl LatentState {
    pub fn check(&self, model: &ModelSpec) -> Result<()> {
        if !(self.l > 0.0) {
            return Err(Error::InconsistentState(format!("inverse lengthscale {} is not positive", self.l)));
        }
        match (model.kind, self.lamstar) {
            (ModelKind::Sgcp, Some(v)) if v > 0.0 => Ok(()),
            (ModelKind::Sgcp, Some(v)) => Err(Error::InconsistentState(format!("λ* = {v} is not positive"))),
            (ModelKind::Sgcp, None) => Err(Error::InconsistentState("SGCP state without λ*".into())),
            (ModelKind::Qgcp, None) => Ok(()),
            (ModelKind::Qgcp, Some(_)) => Err(Error::InconsistentState("QGCP state carries λ*".into())),
        }
    }
}

/// Nodewise link from latent value to rate.
#[inline]
pub fn link_value(kind: ModelKind, g: f64, lamstar: f64) -> f64 {
    match kind {
        ModelKind::Sgcp => lamstar * sigmoid(g),
        ModelKind::Qgcp => g * g,
    }
}

pub fn link_rate(state: &LatentState, model: &ModelSpec) -> Result<GridField> {
    state.check(model)?;
    let lamstar = state.lamstar.unwrap_or(0.0);
    Ok(state.g.map(|g| link_value(model.kind, g, lamstar)))
}

/// Log-likelihood of filtered realisations under `rate`, dropping terms that
/// do not depend on the rate:
/// `Σ_j [ Σ_{x ∈ X_j} log(γ_j(x) λ(x)) − ∫ γ_j λ ]`.
///
/// Filters are evaluated at the exact point locations and the rate at the
/// nearest node.
pub fn log_likelihood(rate: &GridField, data: &[Realisation], filters: &[FilterSpec]) -> Result<f64> {
    if let Some(&value) = rate.values().iter().find(|v| **v < 0.0) {
        return Err(Error::NegativeValue {
            value,
            context: "rate in log-likelihood",
        });
    }
    let grid = *rate.grid();
    let mut total = CompensatedSum::new();
    for r in data {
        let gamma = filters.get(r.filter_index).ok_or(Error::IndexOutOfRange {
            index: r.filter_index,
            filters: filters.len(),
        })?;
        for x in r.observed.iter() {
            let v = gamma.eval(x) * rate.at(x);
            if v <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total.add(log(v));
        }
        let gamma_grid = gamma.on_grid(grid);
        let values = rate.values();
        total.add(-quadrature_with(&grid, |k| gamma_grid.values()[k] * values[k]));
    }
    Ok(total.value())
}

/// One row of a λ* tail check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub threshold: f64,
    pub tail: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    pub holds: bool,
    pub rows: Vec<TailRow>,
}

/// Checks `P(λ* > t) <= C0 exp(-c0 t^κ)` at every threshold `t`.
pub fn lamstar_tail_check(prior: GammaPrior, c0: f64, big_c0: f64, kappa: f64, thresholds: &[f64]) -> Result<TailCheck> {
    if !(c0 > 0.0 && big_c0 > 0.0 && kappa > 0.0) {
        return Err(Error::Precondition(format!(
            "tail constants must be positive, got c0 = {c0}, C0 = {big_c0}, κ = {kappa}"
        )));
    }
    let rows: Vec<TailRow> = thresholds
        .iter()
        .map(|&t| {
            let tail = prior.upper_tail(t);
            let bound = big_c0 * exp(-c0 * pow(t.max(0.0), kappa));
            TailRow {
                threshold: t,
                tail,
                bound,
                holds: tail <= bound * (1.0 + 1e-12),
            }
        })
        .collect();
    Ok(TailCheck {
        holds: rows.iter().all(|r| r.holds),
        rows,
    })
}

/// Per-node sufficient statistics of a dataset on a grid. With these the
/// log-likelihood of any rate field is `Σ_k c_k log λ_k − vol Σ_k e_k λ_k`
/// plus a rate-independent constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// Number of observed points whose nearest node is `k`.
    pub counts: Vec<u64>,
    /// `Σ_j γ_j(s_k)`.
    pub exposure: Vec<f64>,
    pub cell_volume: f64,
}

impl SufficientStats {
    pub fn new(grid: &crate::grid::Grid, data: &[Realisation], filters: &[FilterSpec]) -> Result<Self> {
        let n = grid.len();
        let mut counts = alloc::vec![0u64; n];
        for r in data {
            if r.filter_index >= filters.len() {
                return Err(Error::IndexOutOfRange {
                    index: r.filter_index,
                    filters: filters.len(),
                });
            }
            for x in r.observed.iter() {
                counts[grid.nearest_node(x)] += 1;
            }
        }
        let mut exposure = alloc::vec![0.0; n];
        let mut x = alloc::vec![0.0; grid.d()];
        for (k, e) in exposure.iter_mut().enumerate() {
            grid.node_into(k, &mut x);
            *e = compensated_sum(filters.iter().map(|f| f.eval(&x)));
        }
        Ok(Self {
            counts,
            exposure,
            cell_volume: grid.cell_volume(),
        })
    }

    pub fn log_likelihood(&self, rate: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for k in 0..rate.len() {
            let c = self.counts[k];
            if c > 0 {
                if rate[k] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc.add(c as f64 * log(rate[k]));
            }
            acc.add(-self.cell_volume * self.exposure[k] * rate[k]);
        }
        acc.value()
    }

    /// Same as [`log_likelihood`](Self::log_likelihood) with the rate given
    /// through the link of the latent values.
    pub fn log_likelihood_latent(&self, kind: ModelKind, g: &[f64], lamstar: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..g.len() {
            let rate = link_value(kind, g[k], lamstar);
            let c = self.counts[k];
            if c > 0 {
                if rate <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc += c as f64 * log(rate);
            }
            acc -= self.cell_volume * self.exposure[k] * rate;
        }
        acc
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }
}
