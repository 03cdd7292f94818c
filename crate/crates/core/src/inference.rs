//! Posterior sampling of `(g, l, λ*)` and simulation-based calibration.
//!
//! One iteration updates the latent field by elliptical slice sampling, the
//! inverse lengthscale by a log-scale random walk in whitened coordinates,
//! and (SGCP only) `λ*` by a log-scale random walk.

use alloc::format;
use alloc::vec::Vec;

use libm::{cos, exp, log, sin, sqrt};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::{sample_lengthscale, standard_normal_vec, GpFactor, KernelSpec};
use crate::grid::{Grid, GridField};
use crate::metrics::{gamma_sqrt_l2, hellinger_n};
use crate::models::{link_rate, LatentState, ModelKind, ModelSpec, SufficientStats};
use crate::pointprocess::{simulate_dataset, FilterBank, FilterSpec, Realisation};
use crate::rng::{derive_seed, stream, Purpose, StreamRng};
use crate::stats::{chi_square_uniform, TestOutcome};

/// Iterations per acceptance-monitoring window.
const WINDOW: usize = 500;
/// Iterations between step-size adaptations during burn-in.
const ADAPT_EVERY: usize = 50;
/// Target acceptance of the one-dimensional random walks.
const TARGET_ACCEPT: f64 = 0.44;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    /// Bracket shrinks allowed before an elliptical slice update gives up
    /// and keeps the current field.
    pub ellipse_max_shrink: usize,
    /// Initial standard deviation of the `log l` proposal.
    pub lengthscale_step: f64,
    /// Initial standard deviation of the `log λ*` proposal.
    pub lamstar_step: f64,
    pub seed: u64,
    /// Tune the random-walk steps during burn-in.
    pub adapt: bool,
    /// Disabling this freezes `l` at its initial value.
    pub update_lengthscale: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 10,
            chains: 4,
            ellipse_max_shrink: 100,
            lengthscale_step: 0.3,
            lamstar_step: 0.2,
            seed: 0,
            adapt: true,
            update_lengthscale: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Precondition(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.chains == 0 || self.ellipse_max_shrink == 0 {
            return Err(Error::Precondition("thin, chains and ellipse_max_shrink must be at least 1".into()));
        }
        if !(self.lengthscale_step > 0.0 && self.lamstar_step > 0.0) {
            return Err(Error::Precondition("random-walk steps must be positive".into()));
        }
        Ok(())
    }

    /// Samples kept per chain.
    pub fn kept_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Post burn-in acceptance rates of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcceptanceRates {
    /// Reciprocal of the mean number of ellipse proposals per update.
    pub ellipse: f64,
    pub lengthscale: f64,
    pub lamstar: Option<f64>,
    pub lengthscale_step: f64,
    pub lamstar_step: f64,
}

/// Output of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub chain: usize,
    pub samples: Vec<LatentState>,
    pub iterations: Vec<usize>,
    pub acceptance: AcceptanceRates,
}

/// Pooled posterior draws of all chains, in chain order.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub samples: Vec<LatentState>,
    pub chain_id: Vec<usize>,
    pub iteration: Vec<usize>,
    /// One entry per chain.
    pub acceptance: Vec<AcceptanceRates>,
}

impl PosteriorSamples {
    /// Concatenates chains in the order of their ids.
    pub fn merge(mut chains: Vec<ChainOutput>) -> Self {
        chains.sort_by_key(|c| c.chain);
        let mut out = PosteriorSamples {
            samples: Vec::new(),
            chain_id: Vec::new(),
            iteration: Vec::new(),
            acceptance: Vec::new(),
        };
        for c in chains {
            out.chain_id.extend(core::iter::repeat(c.chain).take(c.samples.len()));
            out.iteration.extend(c.iterations);
            out.samples.extend(c.samples);
            out.acceptance.push(c.acceptance);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Draws of chain `c` in iteration order.
    pub fn chain(&self, c: usize) -> impl Iterator<Item = &LatentState> {
        self.samples.iter().zip(&self.chain_id).filter(move |(_, id)| **id == c).map(|(s, _)| s)
    }

    pub fn chains(&self) -> usize {
        self.acceptance.len()
    }

    /// Nodewise posterior mean of the rate.
    pub fn mean_rate(&self, model: &ModelSpec) -> Result<GridField> {
        let first = self.samples.first().ok_or(Error::EmptySamples)?;
        let mut acc = alloc::vec![0.0; first.g.values().len()];
        for s in &self.samples {
            let r = link_rate(s, model)?;
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        let n = self.samples.len() as f64;
        GridField::new(*first.g.grid(), acc.into_iter().map(|v| v / n).collect())
    }
}

/// Mutable state of a running chain. `g = L(l) z` is kept in sync with `z`.
struct ChainState {
    z: Vec<f64>,
    g: Vec<f64>,
    l: f64,
    lamstar: f64,
    factor: GpFactor,
    loglik: f64,
}

struct Target<'a> {
    model: &'a ModelSpec,
    grid: &'a Grid,
    stats: &'a SufficientStats,
}

impl Target<'_> {
    fn loglik(&self, g: &[f64], lamstar: f64) -> f64 {
        self.stats.log_likelihood_latent(self.model.kind, g, lamstar)
    }

    fn factor(&self, l: f64) -> Result<GpFactor> {
        GpFactor::new(self.grid, KernelSpec::new(l, self.model.kernel_jitter)?)
    }
}

fn initial_state(target: &Target, rng: &mut StreamRng) -> Result<ChainState> {
    let d = target.grid.d();
    let l = target.model.lengthscale_prior.median(d);
    let lamstar = match target.model.kind {
        ModelKind::Sgcp => target.model.lamstar_prior.ok_or(Error::MissingConstant("lamstar prior"))?.mean(),
        ModelKind::Qgcp => 0.0,
    };
    let factor = target.factor(l)?;
    let z = standard_normal_vec(factor.dim(), rng);
    let g = factor.mul(&z);
    let loglik = target.loglik(&g, lamstar);
    if !loglik.is_finite() {
        return Err(Error::NonFiniteInitialization(format!(
            "log-likelihood {loglik} at l = {l}, lamstar = {lamstar}, g range [{}, {}]",
            g.iter().copied().fold(f64::INFINITY, f64::min),
            g.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        )));
    }
    Ok(ChainState {
        z,
        g,
        l,
        lamstar,
        factor,
        loglik,
    })
}

/// Elliptical slice update of `(z, g)`. Returns the number of proposals.
fn ellipse_update(state: &mut ChainState, target: &Target, max_shrink: usize, rng: &mut StreamRng) -> usize {
    let n = state.z.len();
    let xi = standard_normal_vec(n, rng);
    let nu = state.factor.mul(&xi);
    let u: f64 = rng.random();
    let threshold = state.loglik + log(u);
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut theta = rng.random::<f64>() * two_pi;
    let (mut lo, mut hi) = (theta - two_pi, theta);
    let mut g_new = alloc::vec![0.0; n];
    for attempt in 1..=max_shrink + 1 {
        let (c, s) = (cos(theta), sin(theta));
        for k in 0..n {
            g_new[k] = state.g[k] * c + nu[k] * s;
        }
        let ll = target.loglik(&g_new, state.lamstar);
        if ll > threshold {
            for k in 0..n {
                state.z[k] = state.z[k] * c + xi[k] * s;
            }
            core::mem::swap(&mut state.g, &mut g_new);
            state.loglik = ll;
            return attempt;
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
    max_shrink + 1
}

fn lengthscale_update(state: &mut ChainState, target: &Target, step: f64, rng: &mut StreamRng) -> Result<bool> {
    let d = target.grid.d();
    let prior = target.model.lengthscale_prior;
    let eps: f64 = StandardNormal.sample(rng);
    let l_new = state.l * exp(step * eps);
    let factor = target.factor(l_new)?;
    let g_new = factor.mul(&state.z);
    let ll = target.loglik(&g_new, state.lamstar);
    let log_ratio = ll + prior.ln_pdf(l_new, d) + log(l_new) - state.loglik - prior.ln_pdf(state.l, d) - log(state.l);
    let u: f64 = rng.random();
    if log(u) < log_ratio {
        state.l = l_new;
        state.factor = factor;
        state.g = g_new;
        state.loglik = ll;
        Ok(true)
    } else {
        Ok(false)
    }
}

fn lamstar_update(state: &mut ChainState, target: &Target, step: f64, rng: &mut StreamRng) -> Result<bool> {
    let prior = target.model.lamstar_prior.ok_or(Error::MissingConstant("lamstar prior"))?;
    let eps: f64 = StandardNormal.sample(rng);
    let new = state.lamstar * exp(step * eps);
    let ll = target.loglik(&state.g, new);
    let log_ratio = ll + prior.ln_pdf(new) + log(new) - state.loglik - prior.ln_pdf(state.lamstar) - log(state.lamstar);
    let u: f64 = rng.random();
    if log(u) < log_ratio {
        state.lamstar = new;
        state.loglik = ll;
        Ok(true)
    } else {
        Ok(false)
    }
}

fn adapt_step(step: f64, accepted: usize, tried: usize, round: usize) -> f64 {
    if tried == 0 {
        return step;
    }
    let rate = accepted as f64 / tried as f64;
    let gain = 1.0 / sqrt(round as f64);
    (step * exp(gain * (rate - TARGET_ACCEPT))).clamp(1e-4, 10.0)
}

/// Runs chain `chain` on precomputed sufficient statistics.
pub fn run_chain(
    stats: &SufficientStats,
    model: &ModelSpec,
    grid: &Grid,
    config: &McmcConfig,
    chain: usize,
) -> Result<ChainOutput> {
    config.validate()?;
    model.validate()?;
    if stats.counts.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: stats.counts.len(),
        });
    }
    let target = Target { model, grid, stats };
    let mut rng = stream(config.seed, Purpose::Chain, &[chain as u64]);
    let mut state = initial_state(&target, &mut rng)?;
    let sgcp = model.kind == ModelKind::Sgcp;

    let mut l_step = config.lengthscale_step;
    let mut s_step = config.lamstar_step;
    let (mut l_acc, mut l_try, mut s_acc, mut s_try) = (0usize, 0usize, 0usize, 0usize);
    let (mut post_l_acc, mut post_s_acc, mut post_proposals, mut post_iters) = (0usize, 0usize, 0usize, 0usize);
    let (mut win_l, mut win_s, mut win_e) = (0usize, 0usize, 0usize);
    let mut round = 0usize;

    let kept = config.kept_per_chain();
    let mut samples = Vec::with_capacity(kept);
    let mut iterations = Vec::with_capacity(kept);

    for it in 0..config.iterations {
        let proposals = ellipse_update(&mut state, &target, config.ellipse_max_shrink, &mut rng);
        let e_ok = proposals <= config.ellipse_max_shrink;
        let l_ok = if config.update_lengthscale {
            l_try += 1;
            let ok = lengthscale_update(&mut state, &target, l_step, &mut rng)?;
            l_acc += ok as usize;
            ok
        } else {
            false
        };
        let s_ok = if sgcp {
            s_try += 1;
            let ok = lamstar_update(&mut state, &target, s_step, &mut rng)?;
            s_acc += ok as usize;
            ok
        } else {
            false
        };
        win_e += e_ok as usize;
        win_l += l_ok as usize;
        win_s += s_ok as usize;

        if it < config.burn_in {
            if config.adapt && (it + 1) % ADAPT_EVERY == 0 {
                round += 1;
                l_step = adapt_step(l_step, l_acc, l_try, round);
                s_step = adapt_step(s_step, s_acc, s_try, round);
                (l_acc, l_try, s_acc, s_try) = (0, 0, 0, 0);
            }
        } else {
            post_iters += 1;
            post_proposals += proposals;
            post_l_acc += l_ok as usize;
            post_s_acc += s_ok as usize;
            let offset = it - config.burn_in + 1;
            if offset % config.thin == 0 {
                samples.push(LatentState {
                    g: GridField::new(*grid, state.g.clone())?,
                    l: state.l,
                    lamstar: sgcp.then_some(state.lamstar),
                });
                iterations.push(it);
            }
        }

        if (it + 1) % WINDOW == 0 {
            if win_e == 0 {
                log::warn!("chain {chain}: no accepted field update in iterations {}..{}", it + 1 - WINDOW, it + 1);
            }
            if config.update_lengthscale && win_l == 0 {
                log::warn!("chain {chain}: no accepted lengthscale move in iterations {}..{}", it + 1 - WINDOW, it + 1);
            }
            if sgcp && win_s == 0 {
                log::warn!("chain {chain}: no accepted lamstar move in iterations {}..{}", it + 1 - WINDOW, it + 1);
            }
            (win_e, win_l, win_s) = (0, 0, 0);
        }
    }

    let iters = post_iters.max(1) as f64;
    let acceptance = AcceptanceRates {
        ellipse: post_iters as f64 / post_proposals.max(1) as f64,
        lengthscale: post_l_acc as f64 / iters,
        lamstar: sgcp.then_some(post_s_acc as f64 / iters),
        lengthscale_step: l_step,
        lamstar_step: s_step,
    };
    Ok(ChainOutput {
        chain,
        samples,
        iterations,
        acceptance,
    })
}

/// Runs every chain in order and pools the draws.
pub fn run_mcmc(
    data: &[Realisation],
    filters: &[FilterSpec],
    model: &ModelSpec,
    grid: &Grid,
    config: &McmcConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let stats = SufficientStats::new(grid, data, filters)?;
    let chains = (0..config.chains)
        .map(|c| run_chain(&stats, model, grid, config, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSamples::merge(chains))
}

/// Distance used to measure posterior concentration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    GammaSqrtL2,
    Hellinger,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::GammaSqrtL2 => "gamma_sqrt_l2",
            Metric::Hellinger => "hellinger",
        }
    }

    pub fn distance(self, lam: &GridField, lam0: &GridField, filters: &FilterBank) -> Result<f64> {
        match self {
            Metric::GammaSqrtL2 => gamma_sqrt_l2(lam, lam0, filters),
            Metric::Hellinger => hellinger_n(lam, lam0, filters),
        }
    }
}

/// Distance of every posterior rate to `lambda0`.
pub fn posterior_distances(
    samples: &PosteriorSamples,
    model: &ModelSpec,
    lambda0: &GridField,
    filters: &FilterBank,
    metric: Metric,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    samples
        .samples
        .iter()
        .map(|s| metric.distance(&link_rate(s, model)?, lambda0, filters))
        .collect()
}

/// Fraction of distances at or beyond `radius`.
pub fn mass_outside(distances: &[f64], radius: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptySamples);
    }
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::NegativeValue {
            value: radius,
            context: "ball radius",
        });
    }
    Ok(distances.iter().filter(|&&d| d >= radius).count() as f64 / distances.len() as f64)
}

/// Posterior mass outside the ball of `radius` around `lambda0`.
pub fn posterior_mass_outside(
    samples: &PosteriorSamples,
    model: &ModelSpec,
    lambda0: &GridField,
    filters: &FilterBank,
    radius: f64,
    metric: Metric,
) -> Result<f64> {
    mass_outside(&posterior_distances(samples, model, lambda0, filters, metric)?, radius)
}

/// A draw from the full prior.
pub fn sample_prior_state(model: &ModelSpec, grid: &Grid, rng: &mut StreamRng) -> Result<LatentState> {
    model.validate()?;
    let l = sample_lengthscale(model.lengthscale_prior, grid.d(), rng);
    let factor = GpFactor::new(grid, KernelSpec::new(l, model.kernel_jitter)?)?;
    let z = standard_normal_vec(factor.dim(), rng);
    let g = GridField::new(*grid, factor.mul(&z))?;
    let lamstar = match model.kind {
        ModelKind::Sgcp => {
            let p = model.lamstar_prior.ok_or(Error::MissingConstant("lamstar prior"))?;
            let gamma = Gamma::new(p.shape, 1.0 / p.rate).map_err(|e| Error::Precondition(format!("{e}")))?;
            Some(gamma.sample(rng))
        }
        ModelKind::Qgcp => None,
    };
    Ok(LatentState { g, l, lamstar })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbcConfig {
    pub replications: usize,
    /// Posterior draws each truth is ranked against.
    pub draws: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for SbcConfig {
    fn default() -> Self {
        Self {
            replications: 200,
            draws: 99,
            bins: 10,
            seed: 0,
        }
    }
}

/// Rank statistics of one summary across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct RankHistogram {
    pub name: alloc::string::String,
    pub ranks: Vec<usize>,
    pub counts: Vec<u64>,
    pub test: TestOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbcResult {
    pub histograms: Vec<RankHistogram>,
    pub probe_nodes: [usize; 3],
}

impl SbcResult {
    pub fn get(&self, name: &str) -> Option<&RankHistogram> {
        self.histograms.iter().find(|h| h.name == name)
    }
}

fn summaries(state: &LatentState, model: &ModelSpec, probes: &[usize; 3]) -> Result<Vec<f64>> {
    let rate = link_rate(state, model)?;
    let mut out = alloc::vec![state.l];
    if let Some(s) = state.lamstar {
        out.push(s);
    }
    out.extend(probes.iter().map(|&k| rate.values()[k]));
    Ok(out)
}

fn summary_names(model: &ModelSpec, probes: &[usize; 3]) -> Vec<alloc::string::String> {
    let mut out = alloc::vec![alloc::string::String::from("l")];
    if model.kind == ModelKind::Sgcp {
        out.push("lamstar".into());
    }
    out.extend(probes.iter().map(|k| format!("rate[{k}]")));
    out
}

/// Ranks of one replication: draw `rep` from the prior, simulate, fit, and
/// count posterior draws below each true summary.
pub fn sbc_replication(
    model: &ModelSpec,
    grid: &Grid,
    filters: &[FilterSpec],
    mcmc: &McmcConfig,
    sbc: &SbcConfig,
    rep: usize,
) -> Result<Vec<usize>> {
    let probes = probe_nodes(grid);
    let mut rng = stream(sbc.seed, Purpose::PriorDraw, &[rep as u64]);
    let truth = sample_prior_state(model, grid, &mut rng)?;
    let rate = link_rate(&truth, model)?;
    let data = simulate_dataset(&rate, filters, derive_seed(sbc.seed, Purpose::SbcData, &[rep as u64]))?;
    let mut cfg = mcmc.clone();
    cfg.seed = derive_seed(sbc.seed, Purpose::SbcChain, &[rep as u64]);
    let post = run_mcmc(&data, filters, model, grid, &cfg)?;
    if post.len() < sbc.draws {
        return Err(Error::Precondition(format!(
            "{} posterior draws available, {} requested",
            post.len(),
            sbc.draws
        )));
    }
    let want = summaries(&truth, model, &probes)?;
    let mut ranks = alloc::vec![0usize; want.len()];
    for i in 0..sbc.draws {
        let s = &post.samples[i * post.len() / sbc.draws];
        for (r, (v, t)) in ranks.iter_mut().zip(summaries(s, model, &probes)?.iter().zip(&want)) {
            *r += (*v < *t) as usize;
        }
    }
    Ok(ranks)
}

/// Nodes `N/4`, `N/2` and `3N/4`.
pub fn probe_nodes(grid: &Grid) -> [usize; 3] {
    let n = grid.len();
    [n / 4, n / 2, (3 * n / 4).min(n - 1)]
}

/// Assembles per-replication ranks into histograms with a χ² uniformity test.
pub fn sbc_histograms(model: &ModelSpec, grid: &Grid, sbc: &SbcConfig, ranks: &[Vec<usize>]) -> Result<SbcResult> {
    let probes = probe_nodes(grid);
    let names = summary_names(model, &probes);
    let slots = sbc.draws + 1;
    if sbc.bins == 0 || slots % sbc.bins != 0 {
        return Err(Error::Precondition(format!("{} rank values do not split into {} bins", slots, sbc.bins)));
    }
    let per_bin = slots / sbc.bins;
    let histograms = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let r: Vec<usize> = ranks.iter().map(|row| row[i]).collect();
            let mut counts = alloc::vec![0u64; sbc.bins];
            for &v in &r {
                counts[v / per_bin] += 1;
            }
            let test = chi_square_uniform(&counts);
            RankHistogram { name, ranks: r, counts, test }
        })
        .collect();
    Ok(SbcResult {
        histograms,
        probe_nodes: probes,
    })
}

/// Simulation-based calibration run sequentially over replications.
pub fn simulation_based_calibration(
    model: &ModelSpec,
    grid: &Grid,
    filters: &[FilterSpec],
    mcmc: &McmcConfig,
    sbc: &SbcConfig,
) -> Result<SbcResult> {
    if sbc.replications < 100 {
        return Err(Error::Precondition(format!("SBC needs at least 100 replications, got {}", sbc.replications)));
    }
    let ranks = (0..sbc.replications)
        .map(|r| sbc_replication(model, grid, filters, mcmc, sbc, r))
        .collect::<Result<Vec<_>>>()?;
    sbc_histograms(model, grid, sbc, &ranks)
}
