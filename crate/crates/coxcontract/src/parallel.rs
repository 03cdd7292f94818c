//! Worker pool scheduling. Results are merged in index order, so output is
//! independent of the number of workers.

use anyhow::{Context, Result};
use coxcontract_core::contraction::{ContractionCurve, ContractionSetup};
use coxcontract_core::grid::Grid;
use coxcontract_core::inference::{
    run_chain, sbc_histograms, sbc_replication, McmcConfig, PosteriorSamples, SbcConfig, SbcResult,
};
use coxcontract_core::models::{ModelSpec, SufficientStats};
use coxcontract_core::pointprocess::{FilterSpec, Realisation};
use rayon::prelude::*;
use rayon::ThreadPool;

/// Pool with `workers` threads, or one per logical core when `None`.
pub fn pool(workers: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        anyhow::ensure!(w > 0, "--workers must be at least 1");
        b = b.num_threads(w);
    }
    b.build().context("building worker pool")
}

/// Runs every `(n, replication)` cell; one MCMC run per cell.
pub fn run_contraction(setup: &ContractionSetup, pool: &ThreadPool) -> Result<ContractionCurve> {
    setup.validate()?;
    let cells = pool.install(|| {
        (0..setup.cell_count())
            .into_par_iter()
            .map(|i| {
                let (n_index, rep) = setup.cell_coordinates(i);
                setup.run_cell(n_index, rep)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(setup.assemble(cells)?)
}

/// Chains in parallel, pooled in chain order.
pub fn run_mcmc(
    data: &[Realisation],
    filters: &[FilterSpec],
    model: &ModelSpec,
    grid: &Grid,
    config: &McmcConfig,
    pool: &ThreadPool,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let stats = SufficientStats::new(grid, data, filters)?;
    let chains = pool.install(|| {
        (0..config.chains)
            .into_par_iter()
            .map(|c| run_chain(&stats, model, grid, config, c))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(PosteriorSamples::merge(chains))
}

/// Simulation-based calibration with replications spread over the pool.
pub fn run_sbc(
    model: &ModelSpec,
    grid: &Grid,
    filters: &[FilterSpec],
    mcmc: &McmcConfig,
    sbc: &SbcConfig,
    pool: &ThreadPool,
) -> Result<SbcResult> {
    anyhow::ensure!(
        sbc.replications >= 100,
        "SBC needs at least 100 replications, got {}",
        sbc.replications
    );
    let ranks = pool.install(|| {
        (0..sbc.replications)
            .into_par_iter()
            .map(|r| sbc_replication(model, grid, filters, mcmc, sbc, r))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(sbc_histograms(model, grid, sbc, &ranks)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use coxcontract_core::gp::LengthscalePrior;
    use coxcontract_core::inference;
    use coxcontract_core::models::GammaPrior;
    use coxcontract_core::pointprocess::{simulate_dataset, FilterFamily, RateFamily};

    #[test]
    fn parallel_chains_match_sequential() {
        let grid = Grid::new(1, 8).unwrap();
        let lam = RateFamily::Constant(3.0).on_grid(grid).unwrap();
        let filters = FilterFamily::alternating(&[1.0, 0.5]).unwrap().filters(6);
        let data = simulate_dataset(&lam, &filters, 2).unwrap();
        let model = ModelSpec::sgcp(GammaPrior::new(4.0, 1.0).unwrap(), LengthscalePrior::new(2.0, 0.25).unwrap());
        let cfg = McmcConfig {
            iterations: 400,
            burn_in: 100,
            thin: 3,
            chains: 3,
            seed: 11,
            ..McmcConfig::default()
        };
        let seq = inference::run_mcmc(&data, &filters, &model, &grid, &cfg).unwrap();
        let par = run_mcmc(&data, &filters, &model, &grid, &cfg, &pool(Some(3)).unwrap()).unwrap();
        assert_eq!(seq.chain_id, par.chain_id);
        assert_eq!(seq.samples, par.samples);
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(pool(Some(0)).is_err());
    }
}
