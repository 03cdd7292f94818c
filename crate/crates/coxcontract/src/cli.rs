//! Subcommand implementations. Each returns the files it wrote plus a short
//! human-readable summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use coxcontract_core::conditions::{
    check_conditions, check_constant_constraints, lemma_threshold_record, theorem3_bound, theorem3_thresholds,
    Constant, ConstantLedger, QGCP_THRESHOLDS, SGCP_THRESHOLDS,
};
use coxcontract_core::contraction::{
    compare_models, epsilon_n, fit_loglog_slope, rate_sequences, ContractionCurve, ContractionSetup, CurveField,
};
use coxcontract_core::gp::gamma_prior_constants;
use coxcontract_core::inference::{probe_nodes, McmcConfig};
use coxcontract_core::models::ModelKind;
use coxcontract_core::pointprocess::{simulate_dataset, FilterBank};
use coxcontract_core::rng::{derive_seed, Purpose};
use rayon::ThreadPool;

use crate::config::{parse_model_kind, ExperimentConfig, RawConfig};
use crate::formats::{self, num, Provenance, Table};
use crate::parallel;
use crate::svg::{loglog_chart, Series};

#[derive(Debug, Parser)]
#[command(name = "coxcontract", version, about = "Gaussian Cox process contraction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (flat `key = value` text).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Root seed; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Which form of the QGCP `δ_n` symbol the condition checker uses.
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Appendix,
    Maintext,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a filtered dataset from `lambda0.*` and `filters.*`.
    Simulate,
    /// Fit the model by MCMC; runs SBC when `sbc.enabled = true`.
    Fit,
    /// Empirical contraction curve over `schedule`.
    Contract,
    /// Audit the finite-n conditions for a constant ledger.
    Check,
    /// Tabulate the rate sequences over `schedule`.
    Rates,
    /// Render an SVG from an existing curve CSV.
    Plot {
        /// Curve CSV; defaults to `plot.input`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl RunOutput {
    fn write(&mut self, dir: &Path, name: &str, table: &Table, prov: &Provenance) -> Result<()> {
        let p = dir.join(name);
        table.write(&p, prov)?;
        self.files.push(p);
        Ok(())
    }

    fn write_text(&mut self, dir: &Path, name: &str, text: &str) -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(p);
        Ok(())
    }
}

/// Resolved invocation: config plus flag overrides.
pub struct Invocation {
    pub config: ExperimentConfig,
    pub workers: Option<usize>,
}

impl Invocation {
    pub fn new(cli: &Cli) -> Result<Self> {
        let mut raw = match &cli.config {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        if let Some(s) = cli.seed {
            raw.set("seed", s.to_string());
        }
        if let Some(o) = &cli.out {
            raw.set("output_dir", o.to_string_lossy());
        }
        if let Some(v) = cli.variant {
            raw.set(
                "ledger.variant",
                match v {
                    VariantArg::Appendix => "appendix",
                    VariantArg::Maintext => "maintext",
                },
            );
        }
        Ok(Self {
            config: ExperimentConfig::from_raw(raw)?,
            workers: cli.workers,
        })
    }
}

/// Hash of the effective configuration, excluding the output directory.
pub fn provenance(cfg: &ExperimentConfig) -> Provenance {
    let mut raw = cfg.raw.clone();
    raw.set("output_dir", "");
    Provenance {
        config_hash: raw.hash(),
        seed: cfg.root_seed,
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn run(cli: &Cli) -> Result<RunOutput> {
    let inv = Invocation::new(cli)?;
    let cfg = &inv.config;
    match &cli.command {
        Command::Simulate => simulate(cfg),
        Command::Fit => fit(cfg, &parallel::pool(inv.workers)?),
        Command::Contract => contract(cfg, &parallel::pool(inv.workers)?).map(|(o, _)| o),
        Command::Check => check(cfg),
        Command::Rates => rates(cfg),
        Command::Plot { input } => {
            let input = match input {
                Some(p) => p.clone(),
                None => cfg
                    .raw
                    .get::<PathBuf>("plot.input")?
                    .context("plot needs --input or `plot.input`")?,
            };
            plot(cfg, &input)
        }
    }
}

fn dataset_seed(cfg: &ExperimentConfig) -> u64 {
    derive_seed(cfg.root_seed, Purpose::Realisation, &[])
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let dir = out_dir(cfg)?;
    let prov = provenance(cfg);
    let lam0 = cfg.lambda0();
    let filters = cfg.filters.filters(cfg.n);
    let data = simulate_dataset(&lam0, &filters, dataset_seed(cfg))?;
    let mut out = RunOutput::default();
    out.write(&dir, "points.csv", &formats::points_table(&data, cfg.grid.d()), &prov)?;
    out.write(&dir, "realisations.csv", &formats::realisations_table(&data), &prov)?;
    let mut fields: Vec<(String, _)> = vec![("lambda0".to_string(), lam0.clone())];
    let bank = FilterBank::from_specs(cfg.grid, cfg.filters.period())?;
    for (j, f) in bank.iter().enumerate() {
        fields.push((format!("filter[{j}]"), f.clone()));
    }
    let refs: Vec<(&str, &_)> = fields.iter().map(|(n, f)| (n.as_str(), f)).collect();
    out.write(&dir, "lambda0.csv", &formats::field_table(&refs), &prov)?;
    let total: usize = data.iter().map(|r| r.observed.len()).sum();
    out.summary = format!("simulated {} realisations, {} observed points", data.len(), total);
    Ok(out)
}

pub fn fit(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<RunOutput> {
    let dir = out_dir(cfg)?;
    let prov = provenance(cfg);
    let filters = cfg.filters.filters(cfg.n);
    let data = match cfg.raw.raw("fit.data") {
        Some(d) => {
            let d = Path::new(d);
            formats::read_dataset(&d.join("points.csv"), &d.join("realisations.csv"), cfg.grid.d())?
        }
        None => simulate_dataset(&cfg.lambda0(), &filters, dataset_seed(cfg))?,
    };
    if data.len() != filters.len() {
        bail!("dataset has {} realisations but `n` = {}", data.len(), cfg.n);
    }
    let mut mcmc = cfg.mcmc.clone();
    mcmc.seed = cfg.root_seed;
    let samples = parallel::run_mcmc(&data, &filters, &cfg.model, &cfg.grid, &mcmc, pool)?;
    let probes = probe_nodes(&cfg.grid);
    let mut out = RunOutput::default();
    out.write(&dir, "posterior.csv", &formats::posterior_table(&samples, &probes), &prov)?;
    out.write(&dir, "acceptance.csv", &formats::acceptance_table(&samples), &prov)?;
    let mean = samples.mean_rate(&cfg.model)?;
    let lam0 = cfg.lambda0();
    out.write(
        &dir,
        "posterior_mean.csv",
        &formats::field_table(&[("posterior_mean_rate", &mean), ("lambda0", &lam0)]),
        &prov,
    )?;
    let mut summary = format!("{} posterior draws from {} chains", samples.len(), samples.chains());
    if cfg.sbc_enabled()? {
        let sbc = cfg.sbc()?;
        let res = parallel::run_sbc(&cfg.model, &cfg.grid, &filters, &mcmc, &sbc, pool)?;
        let (ranks, hist) = formats::sbc_tables(&res);
        out.write(&dir, "sbc_ranks.csv", &ranks, &prov)?;
        out.write(&dir, "sbc_histograms.csv", &hist, &prov)?;
        for h in &res.histograms {
            let _ = write!(
                summary,
                "\nSBC {}: chi2 = {:.3}, p = {:.4} ({})",
                h.name,
                h.test.statistic,
                h.test.p_value,
                if h.test.passes(0.01) { "uniform" } else { "not uniform" }
            );
        }
    }
    out.summary = summary;
    Ok(out)
}

pub fn contraction_setup(cfg: &ExperimentConfig, kind: ModelKind) -> ContractionSetup {
    ContractionSetup {
        model: cfg.model_for(kind),
        lambda0: cfg.lambda0(),
        family: cfg.filters.clone(),
        schedule: cfg.schedule.clone(),
        big_m: cfg.big_m,
        alpha: cfg.alpha,
        mcmc: McmcConfig {
            seed: 0,
            ..cfg.mcmc.clone()
        },
        replications: cfg.replications,
        seed: cfg.root_seed,
    }
}

fn curve_chart(curve: &ContractionCurve) -> String {
    let pts = |f: fn(&coxcontract_core::contraction::CurveRow) -> f64| {
        curve.rows.iter().map(|r| (r.n as f64, f(r))).collect::<Vec<_>>()
    };
    loglog_chart(
        &format!("{} contraction", curve.model.name()),
        "n",
        "value",
        &[
            Series::new("median_distance", pts(|r| r.median_distance)),
            Series::new("radius", pts(|r| r.radius)),
            Series::new("mass_outside", pts(|r| r.mass_outside)),
        ],
    )
}

/// Runs the contraction experiment for each model in `contract.models`.
pub fn contract(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<(RunOutput, Vec<ContractionCurve>)> {
    let dir = out_dir(cfg)?;
    let prov = provenance(cfg);
    let mut out = RunOutput::default();
    let mut curves = Vec::new();
    let mut summary = String::new();
    for &kind in &cfg.models {
        let setup = contraction_setup(cfg, kind);
        let curve = parallel::run_contraction(&setup, pool)?;
        let name = kind.name();
        out.write(&dir, &format!("curve_{name}.csv"), &formats::curve_table(&curve), &prov)?;
        out.write(&dir, &format!("cells_{name}.csv"), &formats::cells_table(&curve), &prov)?;
        out.write_text(&dir, &format!("curve_{name}.svg"), &curve_chart(&curve))?;
        let _ = write!(summary, "{name}: {} MCMC runs", setup.cell_count());
        match fit_loglog_slope(&curve, CurveField::MedianDistance) {
            Ok(f) => {
                let _ = writeln!(summary, ", log-log slope of median distance {:.4}", f.slope);
            }
            Err(e) => {
                let _ = writeln!(summary, ", slope not available ({e})");
            }
        }
        curves.push(curve);
    }
    let find = |k: ModelKind| curves.iter().find(|c| c.model == k);
    if let (Some(s), Some(q)) = (find(ModelKind::Sgcp), find(ModelKind::Qgcp)) {
        let rows = cfg
            .schedule
            .iter()
            .map(|&n| compare_models(s, q, n))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(last) = rows.last() {
            let _ = writeln!(
                summary,
                "n = {}: qgcp {:.4} [{:.4}, {:.4}] vs sgcp {:.4} [{:.4}, {:.4}]: {}",
                last.n,
                last.qgcp.centre,
                last.qgcp.lower,
                last.qgcp.upper,
                last.sgcp.centre,
                last.sgcp.lower,
                last.sgcp.upper,
                formats::verdict_name(last.verdict)
            );
        }
        out.write(&dir, "comparison.csv", &formats::comparison_table(&rows), &prov)?;
    }
    out.summary = summary.trim_end().to_string();
    Ok((out, curves))
}

fn check_models(cfg: &ExperimentConfig) -> Result<Vec<ModelKind>> {
    match cfg.raw.raw("check.model") {
        None => Ok(vec![cfg.model.kind]),
        Some("both") => Ok(vec![ModelKind::Qgcp, ModelKind::Sgcp]),
        Some(v) => Ok(vec![parse_model_kind("check.model", v)?]),
    }
}

/// Ledger for `check`: prior-envelope constants come from the configured
/// lengthscale prior unless the ledger sets them.
pub fn check_ledger(cfg: &ExperimentConfig) -> Result<ConstantLedger> {
    let fill: bool = cfg.raw.get_or("check.example_defaults", false)?;
    let mut ledger = cfg.ledger(fill)?;
    let pc = gamma_prior_constants(cfg.model.lengthscale_prior, cfg.grid.d());
    let explicit = |k: &str| cfg.raw.raw(&format!("ledger.{k}")).is_some();
    for (c, v) in [
        (Constant::BigC1, pc.c1),
        (Constant::BigC2, pc.c2),
        (Constant::D1, pc.d1),
        (Constant::D2, pc.d2),
        (Constant::Q1, pc.q1),
        (Constant::Q2, pc.q2),
    ] {
        if !explicit(c.key()) && (fill || !ledger.contains(c)) {
            ledger.set(c, v)?;
        }
    }
    Ok(ledger)
}

pub fn check(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let dir = out_dir(cfg)?;
    let prov = provenance(cfg);
    let ledger = check_ledger(cfg)?;
    let ns = cfg.raw.list::<u64>("check.n")?.unwrap_or_else(|| vec![3, 10, 100, 1000]);
    let n_max: u64 = cfg.raw.get_or("check.n_max", 100_000)?;
    let d = cfg.grid.d();
    let mut out = RunOutput::default();
    let mut summary = String::new();

    let prior = cfg.model.lengthscale_prior;
    let pc = gamma_prior_constants(prior, d);
    let mut pt = Table::new(&["a", "b", "d", "C1", "C2", "D1", "D2", "q1", "q2"]);
    pt.push(vec![
        num(prior.a),
        num(prior.b),
        d.to_string(),
        num(pc.c1),
        num(pc.c2),
        num(pc.d1),
        num(pc.d2),
        num(pc.q1),
        num(pc.q2),
    ]);
    out.write(&dir, "prior_constants.csv", &pt, &prov)?;
    let _ = writeln!(
        summary,
        "gamma_prior_constants(a={}, b={}, d={d}) = ({}, {}, {}, {}, {}, {})",
        num(prior.a),
        num(prior.b),
        num(pc.c1),
        num(pc.c2),
        num(pc.d1),
        num(pc.d2),
        num(pc.q1),
        num(pc.q2)
    );

    let mut table = Table::new(&formats::CONDITION_COLUMNS);
    let mut t3 = Table::new(&[
        "model", "n", "epsilon_n", "n_eps2", "bound", "term1", "term2", "term3", "term4", "useful_regime",
    ]);
    let mut thresholds = Table::new(&["model", "n1", "n2", "n3", "n_max"]);
    for kind in check_models(cfg)? {
        let missing = ledger.missing(kind);
        if !missing.is_empty() {
            let keys: Vec<&str> = missing.iter().map(|c| c.key()).collect();
            bail!(
                "ledger is missing {} for {} (set ledger.<key>, or check.example_defaults = true)",
                keys.join(", "),
                kind.name()
            );
        }
        let name = kind.name();
        let constraints = check_constant_constraints(&ledger, kind)?;
        for r in &constraints.records {
            formats::push_condition(&mut table, name, r);
        }
        let failing: Vec<&str> = constraints.failing().map(|r| r.name).collect();
        let _ = writeln!(
            summary,
            "{name}: {} of {} constant constraints hold{}",
            constraints.records.len() - failing.len(),
            constraints.records.len(),
            if failing.is_empty() { String::new() } else { format!(" (failing: {})", failing.join("; ")) }
        );
        let lemma_names: &[&str] = match kind {
            ModelKind::Qgcp => &QGCP_THRESHOLDS,
            ModelKind::Sgcp => &SGCP_THRESHOLDS,
        };
        for &n in &ns {
            let mut rep = check_conditions(&ledger, kind, n)?;
            for &l in lemma_names {
                rep.records.push(lemma_threshold_record(l, &ledger, n)?);
            }
            rep.attach_minimal_n(&ledger, n_max)?;
            for r in &rep.records {
                formats::push_condition(&mut table, name, r);
            }
            let failing: Vec<&str> = rep.failing().map(|r| r.name).collect();
            let _ = writeln!(
                summary,
                "{name} n = {n}: {} of {} conditions hold{}",
                rep.records.len() - failing.len(),
                rep.records.len(),
                if failing.is_empty() { String::new() } else { format!(" (failing: {})", failing.join(", ")) }
            );
        }
        let alpha = ledger.get(Constant::Alpha)?;
        let sup = ledger.get(Constant::SupLambda0).ok();
        let eps = |n: u64| epsilon_n(kind, n, alpha, d, sup);
        for &n in &ns {
            let e = eps(n)?;
            let b = theorem3_bound(&ledger, n, e)?;
            t3.push(vec![
                name.to_string(),
                n.to_string(),
                num(e),
                num(n as f64 * e * e),
                num(b.value),
                num(b.terms[0]),
                num(b.terms[1]),
                num(b.terms[2]),
                num(b.terms[3]),
                b.useful_regime.to_string(),
            ]);
        }
        let th = theorem3_thresholds(&ledger, |n| eps(n).unwrap_or(f64::NAN), n_max)?;
        let show = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        thresholds.push(vec![name.to_string(), show(th[0]), show(th[1]), show(th[2]), n_max.to_string()]);
        let shown = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_else(|| format!("not found <= {n_max}"));
        let _ = writeln!(
            summary,
            "{name} bound thresholds: n1 = {}, n2 = {}, n3 = {}",
            shown(th[0]),
            shown(th[1]),
            shown(th[2])
        );
    }
    out.write(&dir, "conditions.csv", &table, &prov)?;
    out.write(&dir, "bound.csv", &t3, &prov)?;
    out.write(&dir, "bound_thresholds.csv", &thresholds, &prov)?;
    out.write_text(&dir, "check_summary.txt", &summary)?;
    out.summary = summary.trim_end().to_string();
    Ok(out)
}

pub fn rates(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let dir = out_dir(cfg)?;
    let prov = provenance(cfg);
    let ledger = cfg.ledger(true)?;
    let mut rows = Vec::new();
    for &kind in &cfg.models {
        for &n in &cfg.schedule {
            rows.push(rate_sequences(kind, n, &ledger)?);
        }
    }
    let mut out = RunOutput::default();
    out.write(&dir, "rates.csv", &formats::rates_table(&rows), &prov)?;
    out.summary = format!("{} rows over n in {:?}", rows.len(), cfg.schedule);
    Ok(out)
}

pub fn plot(cfg: &ExperimentConfig, input: &Path) -> Result<RunOutput> {
    let dir = out_dir(cfg)?;
    let (_, rows) = formats::read_curve(input)?;
    if rows.is_empty() {
        bail!("{} has no rows", input.display());
    }
    let pts = |f: fn(&coxcontract_core::contraction::CurveRow) -> f64| rows.iter().map(|r| (r.n as f64, f(r))).collect();
    let title = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let svg = loglog_chart(
        &title,
        "n",
        "value",
        &[
            Series::new("radius", pts(|r| r.radius)),
            Series::new("mass_outside", pts(|r| r.mass_outside)),
            Series::new("median_distance", pts(|r| r.median_distance)),
        ],
    );
    let mut out = RunOutput::default();
    out.write_text(&dir, &format!("{title}.svg"), &svg)?;
    out.summary = format!("plotted {} rows", rows.len());
    Ok(out)
}
