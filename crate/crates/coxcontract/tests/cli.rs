use std::fs;
use std::path::Path;
use std::process::Command;

use coxcontract::cli;
use coxcontract::config::{ExperimentConfig, RawConfig};
use coxcontract::formats::{read_curve, Provenance, Table};
use coxcontract::parallel::pool;
use coxcontract_core::contraction::epsilon_n;
use coxcontract_core::models::ModelKind;

const SMALL: &str = "
seed = 21
grid.m = 16
n = 6
schedule = 4, 8, 16
replications = 2
mcmc.iterations = 400
mcmc.burn_in = 100
mcmc.thin = 3
mcmc.chains = 2
";

fn config(extra: &str, out: &Path) -> ExperimentConfig {
    let mut raw = RawConfig::parse(SMALL).unwrap();
    let over = RawConfig::parse(extra).unwrap();
    for k in over.keys() {
        raw.set(k, over.raw(k).unwrap());
    }
    raw.set("output_dir", out.to_string_lossy());
    ExperimentConfig::from_raw(raw).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coxcontract"))
}

#[test]
fn rates_epsilon_matches_formula() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("model.kind = sgcp\nalpha = 1\nschedule = 10, 100, 1000", dir.path());
    cli::rates(&cfg).unwrap();
    let (prov, t) = Table::read(&dir.path().join("rates.csv")).unwrap();
    assert_eq!(prov.unwrap().seed, 21);
    assert_eq!(t.rows.len(), 3);
    let (ni, ei) = (t.column("n").unwrap(), t.column("epsilon_n").unwrap());
    let sup = cfg.lambda0().max();
    for row in &t.rows {
        let n: u64 = row[ni].parse().unwrap();
        let got: f64 = row[ei].parse().unwrap();
        let want = epsilon_n(ModelKind::Sgcp, n, 1.0, 1, Some(sup)).unwrap();
        assert!(((got - want) / want).abs() <= 1e-12, "n = {n}: {got} vs {want}");
    }
}

#[test]
fn simulate_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cli::simulate(&config("", a.path())).unwrap();
    cli::simulate(&config("", b.path())).unwrap();
    for f in ["points.csv", "realisations.csv", "lambda0.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    let mut other = config("", c.path());
    other.raw.set("seed", "22");
    cli::simulate(&ExperimentConfig::from_raw(other.raw).unwrap()).unwrap();
    assert_ne!(fs::read(a.path().join("points.csv")).unwrap(), fs::read(c.path().join("points.csv")).unwrap());
}

#[test]
fn check_reports_gamma_prior_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "model.lengthscale_shape = 1\nmodel.lengthscale_rate = 1\ncheck.example_defaults = true\ncheck.n = 3, 10\ncheck.n_max = 2000",
        dir.path(),
    );
    let out = cli::check(&cfg).unwrap();
    assert!(out.summary.contains("gamma_prior_constants(a=1, b=1, d=1) = (1, 1, 1, 1, 0, 0)"));
    let (_, t) = Table::read(&dir.path().join("prior_constants.csv")).unwrap();
    let vals: Vec<f64> = ["C1", "C2", "D1", "D2", "q1", "q2"]
        .iter()
        .map(|c| t.rows[0][t.column(c).unwrap()].parse().unwrap())
        .collect();
    assert_eq!(vals, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    let (_, c) = Table::read(&dir.path().join("conditions.csv")).unwrap();
    for col in ["condition", "n", "lhs", "rhs", "holds", "minimal_n"] {
        c.column(col).unwrap();
    }
    let name = c.column("condition").unwrap();
    assert!(c.rows.iter().any(|r| r[name] == "SGCP11"));
}

#[test]
fn check_without_ledger_names_missing_constants() {
    let dir = tempfile::tempdir().unwrap();
    let err = cli::check(&config("", dir.path())).unwrap_err().to_string();
    assert!(err.contains("L8") && err.contains("tau"), "{err}");
}

#[test]
fn contract_runs_every_cell_and_is_worker_independent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_a = config("contract.models = sgcp, qgcp", a.path());
    let (_, curves) = cli::contract(&cfg_a, &pool(Some(1)).unwrap()).unwrap();
    cli::contract(&config("contract.models = sgcp, qgcp", b.path()), &pool(Some(3)).unwrap()).unwrap();
    assert_eq!(curves.len(), 2);
    for c in &curves {
        assert_eq!(c.cells.iter().map(Vec::len).sum::<usize>(), 3 * 2);
        assert!(c.rows.iter().all(|r| r.replications == 2));
    }
    for f in ["curve_sgcp.csv", "cells_sgcp.csv", "curve_qgcp.csv", "cells_qgcp.csv", "comparison.csv", "curve_sgcp.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let (_, cells) = Table::read(&a.path().join("cells_qgcp.csv")).unwrap();
    assert_eq!(cells.rows.len(), 6);
    let (prov, rows) = read_curve(&a.path().join("curve_sgcp.csv")).unwrap();
    assert_eq!(prov, Some(cli::provenance(&cfg_a)));
    assert_eq!(rows, curves[0].rows);
}

#[test]
fn every_csv_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("check.example_defaults = true\ncheck.n = 3\ncheck.n_max = 100", dir.path());
    cli::simulate(&cfg).unwrap();
    cli::rates(&cfg).unwrap();
    cli::check(&cfg).unwrap();
    cli::fit(&cfg, &pool(Some(1)).unwrap()).unwrap();
    let want = cli::provenance(&cfg);
    let mut seen = 0;
    for e in fs::read_dir(dir.path()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            let text = fs::read_to_string(&p).unwrap();
            let first = text.lines().next().unwrap();
            assert_eq!(Provenance::parse_header(first).as_ref(), Some(&want), "{}", p.display());
            seen += 1;
        }
    }
    assert!(seen >= 10);
}

#[test]
fn fit_reads_simulated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let sim = config("", dir.path());
    cli::simulate(&sim).unwrap();
    let from_file = config(&format!("fit.data = {}", dir.path().display()), dir.path());
    cli::fit(&from_file, &pool(Some(1)).unwrap()).unwrap();
    let with_file = fs::read(dir.path().join("posterior.csv")).unwrap();
    cli::fit(&sim, &pool(Some(1)).unwrap()).unwrap();
    let direct = fs::read(dir.path().join("posterior.csv")).unwrap();
    let body = |b: &[u8]| String::from_utf8(b.to_vec()).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&with_file), body(&direct));
}

#[test]
fn binary_reports_bad_field_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "grid.m = lots\n").unwrap();
    let out = bin().args(["rates", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.m"));

    let good = dir.path().join("good.cfg");
    fs::write(&good, SMALL).unwrap();
    let out = bin()
        .args(["contract", "--workers", "1", "--seed", "5", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = dir.path().join("curve_sgcp.csv");
    let (prov, _) = read_curve(&curve).unwrap();
    assert_eq!(prov.unwrap().seed, 5);
    let plots = dir.path().join("plots");
    let out = bin().arg("plot").arg("--input").arg(&curve).arg("--out").arg(&plots).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(plots.join("curve_sgcp.svg")).unwrap();
    assert!(svg.contains("median_distance"));
}
