//! Acceptance suite. Prints one `ACCEPTANCE [k] PASS|FAIL` line per
//! criterion and exits nonzero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p coxcontract --test acceptance -- 1 2 10`.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coxcontract::cli;
use coxcontract::config::{ExperimentConfig, RawConfig};
use coxcontract::parallel::{pool, run_contraction, run_sbc};
use coxcontract_core::conditions::{
    check_constant_constraints, evaluate_condition, theorem3_bound_at, Constant, ConstantLedger,
};
use coxcontract_core::contraction::{
    compare_models, epsilon_n, fit_loglog, fit_loglog_slope, rho, ContractionSetup, CurveField, Verdict,
};
use coxcontract_core::gp::{gamma_prior_constants, LengthscalePrior};
use coxcontract_core::grid::{Grid, GridField};
use coxcontract_core::inference::{McmcConfig, SbcConfig};
use coxcontract_core::metrics::{
    hellinger_n, hellinger_sandwich, kl_n, kl_upper_bound, log_bound, monte_carlo_hellinger,
};
use coxcontract_core::models::{GammaPrior, ModelKind, ModelSpec};
use coxcontract_core::pointprocess::{apply_filter, simulate_nhpp, FilterBank, FilterFamily, FilterSpec, RateFamily};
use coxcontract_core::rng::{stream, Purpose};
use coxcontract_core::stats::{chi_square_poisson, ks_test};
use rand::Rng;

const ROOT_SEED: u64 = 20_240_611;
const SLACK: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(k: u64) -> coxcontract_core::rng::StreamRng {
    stream(ROOT_SEED, Purpose::MonteCarlo, &[k])
}

/// Random per-cell-constant positive field pairs with 1-5 random filters.
fn corpus() -> Vec<(GridField, GridField, FilterBank)> {
    let grid = Grid::new(1, 16).unwrap();
    let mut r = rng(1);
    (0..1000)
        .map(|_| {
            let mut field = |lo: f64, hi: f64| {
                GridField::new(grid, (0..grid.len()).map(|_| r.random_range(lo..hi)).collect()).unwrap()
            };
            let lam = field(0.01, 20.0);
            let lam0 = field(0.01, 20.0);
            let nf = r.random_range(1..=5);
            let filters = (0..nf)
                .map(|_| GridField::new(grid, (0..grid.len()).map(|_| r.random_range(0.0..=1.0)).collect()).unwrap())
                .collect();
            (lam, lam0, FilterBank::from_fields(grid, filters).unwrap())
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut lower_fail = 0;
    let mut upper_fail = 0;
    let mut worst = f64::NEG_INFINITY;
    for (lam, lam0, bank) in corpus() {
        let s = hellinger_sandwich(&lam, &lam0, &bank).unwrap();
        lower_fail += (s.lower > s.hellinger + SLACK) as usize;
        upper_fail += (s.hellinger > s.upper + SLACK) as usize;
        worst = worst.max(s.lower - s.hellinger).max(s.hellinger - s.upper);
    }
    outcome(
        lower_fail == 0 && upper_fail == 0,
        format!("1000 pairs: lower-side violations {lower_fail}, upper-side violations {upper_fail}, worst excess {worst:.3e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut kl_fail = 0;
    let mut log_fail = 0;
    for (lam, lam0, bank) in corpus() {
        kl_fail += (kl_n(&lam, &lam0, &bank).unwrap() > kl_upper_bound(&lam, &lam0, &bank).unwrap() + SLACK) as usize;
        let (lhs, rhs) = log_bound(&lam, &lam0, &bank).unwrap();
        log_fail += (lhs > rhs + SLACK) as usize;
    }
    outcome(kl_fail == 0 && log_fail == 0, format!("1000 pairs: KL violations {kl_fail}, log-bound violations {log_fail}"))
}

fn criterion_3() -> Outcome {
    let grid = Grid::new(1, 16).unwrap();
    let c = |v: f64| GridField::constant(grid, v);
    let bank = |ps: &[f64]| {
        FilterBank::from_specs(grid, &ps.iter().map(|&p| FilterSpec::Constant(p)).collect::<Vec<_>>()).unwrap()
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, (label, filters)) in [("constant", bank(&[1.0])), ("two-filter", bank(&[1.0, 0.25]))].into_iter().enumerate() {
        let h = hellinger_n(&c(4.0), &c(1.0), &filters).unwrap();
        let target = h * h;
        let mc = monte_carlo_hellinger(&c(4.0), &c(1.0), &filters, 100_000, &mut rng(30 + k as u64)).unwrap();
        let z = (mc.mean - target) / mc.std_error;
        pass &= z.abs() <= 3.0;
        if k == 0 {
            let paper = 2.0 * (1.0 - (-0.5f64).exp());
            pass &= (target - paper).abs() < 1e-12 && (target - 0.78694).abs() < 5e-6;
        }
        detail.push(format!("{label}: h^2 = {target:.6}, MC {:.6} +/- {:.6} (z = {z:.2})", mc.mean, mc.std_error));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_4() -> Outcome {
    let g = Grid::new(1, 16).unwrap();
    let rate = GridField::constant(g, 6.0);
    let gamma = FilterSpec::Constant(0.4);
    let mut r = rng(40);
    let counts: Vec<u64> = (0..10_000)
        .map(|_| apply_filter(&simulate_nhpp(&rate, &mut r).unwrap(), &gamma, &mut r).len() as u64)
        .collect();
    let chi = chi_square_poisson(&counts, 2.4);

    let g = Grid::new(1, 1024).unwrap();
    let rate = GridField::from_fn(g, |x| 2.0 * x[0]);
    let mut r = rng(41);
    let mut pooled = Vec::new();
    for _ in 0..1000 {
        pooled.extend(simulate_nhpp(&rate, &mut r).unwrap().flat().iter().copied());
    }
    let ks = ks_test(&pooled, |s| s * s);
    outcome(
        chi.passes(0.01) && ks.passes(0.01),
        format!(
            "Poisson(2.4) chi2 p = {:.4}; KS vs s^2 over {} points p = {:.4}",
            chi.p_value,
            pooled.len(),
            ks.p_value
        ),
    )
}

fn sgcp_model() -> ModelSpec {
    ModelSpec::sgcp(GammaPrior::new(4.0, 1.0).unwrap(), LengthscalePrior::new(2.0, 0.25).unwrap())
}

fn criterion_5() -> Outcome {
    let grid = Grid::new(1, 32).unwrap();
    let model = sgcp_model();
    let filters = FilterFamily::alternating(&[1.0, 0.5]).unwrap().filters(10);
    let sbc = SbcConfig {
        replications: 200,
        seed: ROOT_SEED,
        ..SbcConfig::default()
    };
    let workers = pool(None).unwrap();
    let full = run_sbc(&model, &grid, &filters, &McmcConfig::default(), &sbc, &workers).unwrap();
    let ablated_cfg = McmcConfig {
        update_lengthscale: false,
        ..McmcConfig::default()
    };
    let ablated = run_sbc(&model, &grid, &filters, &ablated_cfg, &sbc, &workers).unwrap();
    let uniform = full.histograms.iter().all(|h| h.test.passes(0.01));
    let ablated_l = ablated.get("l").unwrap();
    let summary: Vec<String> = full
        .histograms
        .iter()
        .map(|h| format!("{} p = {:.3}", h.name, h.test.p_value))
        .collect();
    outcome(
        uniform && !ablated_l.test.passes(0.01) && full.histograms.len() == 5,
        format!("{}; ablated l p = {:.2e}", summary.join(", "), ablated_l.test.p_value),
    )
}

fn contraction_setup(kind: ModelKind, schedule: Vec<u64>) -> ContractionSetup {
    let grid = Grid::new(1, 32).unwrap();
    let model = match kind {
        ModelKind::Sgcp => sgcp_model(),
        ModelKind::Qgcp => ModelSpec::qgcp(LengthscalePrior::new(2.0, 0.25).unwrap()),
    };
    ContractionSetup {
        model,
        lambda0: RateFamily::SinSquared {
            base: 2.0,
            amplitude: 1.0,
            frequency: 1.0,
        }
        .on_grid(grid)
        .unwrap(),
        family: FilterFamily::alternating(&[1.0, 0.5]).unwrap(),
        schedule,
        big_m: 1.0,
        alpha: 1.0,
        mcmc: McmcConfig::default(),
        replications: 10,
        seed: ROOT_SEED,
    }
}

fn criteria_6_7() -> (Outcome, Outcome) {
    let workers = pool(None).unwrap();
    let schedule = vec![4, 8, 16, 32, 64];
    let sgcp = run_contraction(&contraction_setup(ModelKind::Sgcp, schedule.clone()), &workers).unwrap();
    let qgcp = run_contraction(&contraction_setup(ModelKind::Qgcp, schedule), &workers).unwrap();

    let med: Vec<f64> = sgcp.rows.iter().map(|r| r.median_distance).collect();
    let decreasing = med.windows(2).filter(|w| w[1] < w[0]).count();
    let slope = fit_loglog_slope(&sgcp, CurveField::MedianDistance).unwrap().slope;
    let c6 = outcome(
        decreasing == med.len() - 1 && slope < -0.05,
        format!(
            "median distances {:?}; {decreasing} of {} steps decrease; slope {slope:.4}",
            med.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            med.len() - 1
        ),
    );

    let cmp = compare_models(&sgcp, &qgcp, 64).unwrap();
    let overlap = cmp.qgcp.lower <= cmp.sgcp.upper && cmp.sgcp.lower <= cmp.qgcp.upper;
    let verdict_consistent = match cmp.verdict {
        Verdict::Inconclusive => overlap,
        Verdict::Consistent => !overlap && cmp.qgcp.centre >= cmp.sgcp.centre,
        Verdict::Contradicts => !overlap && cmp.qgcp.centre < cmp.sgcp.centre,
    };
    let ordered = cmp.qgcp.centre >= cmp.sgcp.centre || (cmp.verdict == Verdict::Inconclusive && overlap);
    let c7 = outcome(
        verdict_consistent && ordered,
        format!(
            "n = 64: qgcp {:.4} [{:.4}, {:.4}], sgcp {:.4} [{:.4}, {:.4}], verdict {:?}",
            cmp.qgcp.centre, cmp.qgcp.lower, cmp.qgcp.upper, cmp.sgcp.centre, cmp.sgcp.lower, cmp.sgcp.upper, cmp.verdict
        ),
    );
    (c6, c7)
}

fn criterion_8() -> Outcome {
    let ns = [1e3, 1e4, 1e5, 1e6];
    let slope = |kind| {
        let pts: Vec<(f64, f64)> =
            ns.iter().map(|&n| (n, epsilon_n(kind, n as u64, 1.0, 1, Some(3.0)).unwrap())).collect();
        fit_loglog(&pts).unwrap().slope
    };
    let (s, q) = (slope(ModelKind::Sgcp), slope(ModelKind::Qgcp));
    let (rs, rq) = (rho(ModelKind::Sgcp, 1.0, 1), rho(ModelKind::Qgcp, 1.0, 1));
    let pass = (s + 1.0 / 3.0).abs() <= 0.05 && (q + 0.2).abs() <= 0.07 && rs == 2.0 / 3.0 && rq == 2.0 / 5.0;
    outcome(
        pass,
        format!(
            "sgcp slope {s:.4} (target -0.3333 +/- 0.05), qgcp slope {q:.4} (target -0.2 +/- 0.07), rho {rs} and {rq}"
        ),
    )
}

/// Example ledger raised until every QGCP constant constraint holds.
fn qgcp_ledger() -> ConstantLedger {
    let g0 = 3f64.sqrt();
    let mut l = ConstantLedger::example(1.0, 1, g0);
    let c5 = l.get(Constant::SmallC5).unwrap();
    let d1 = l.get(Constant::D1).unwrap();
    l.set(Constant::L2, 2.0 * 8.0 * c5 * g0 * g0 / d1).unwrap();
    l.set(Constant::L3, 2.0 * 8.0 * c5 * g0 / d1).unwrap();
    l.set(Constant::L4, 2.0 * 2.0 * c5 / d1).unwrap();
    for c in [Constant::L5, Constant::L6, Constant::L7] {
        l.set(c, 1e3).unwrap();
    }
    l
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let q = qgcp_ledger();
    let constraints = check_constant_constraints(&q, ModelKind::Qgcp).unwrap();
    let q1 = evaluate_condition("QGCP1", &q, 3).unwrap();
    let ok1 = constraints.all_hold() && q1.holds;
    notes.push(format!("QGCP1 at n = 3: {} (constraints hold: {})", q1.holds, constraints.all_hold()));

    let ns: Vec<u64> = (3..=1000).chain((1..=60).map(|k| (1000.0 * 10f64.powf(k as f64 / 20.0)) as u64)).collect();
    let mut s = ConstantLedger::example(1.0, 1, 3f64.sqrt());
    let floor = s.get(Constant::A).unwrap().max(1.0);
    let mut ok3 = true;
    for l8 in [floor, 2.0 * floor, 100.0] {
        s.set(Constant::L8, l8).unwrap();
        for &n in [3, 10, 1000, 1_000_000].iter() {
            ok3 &= evaluate_condition("SGCP3", &s, n).unwrap().holds;
        }
    }
    notes.push(format!("SGCP3 for L8 >= max(A,1): {ok3}"));

    let c5 = s.get(Constant::SmallC5).unwrap();
    s.set(Constant::L9, (8.0 * c5).sqrt()).unwrap();
    let failing: Vec<u64> = ns.iter().copied().filter(|&n| !evaluate_condition("SGCP11", &s, n).unwrap().holds).collect();
    notes.push(format!("SGCP11 with L9 = sqrt(8 c5) over {} values of n <= 1e6: {} failures", ns.len(), failing.len()));

    let pc = gamma_prior_constants(LengthscalePrior::new(1.0, 1.0).unwrap(), 1);
    let got = [pc.c1, pc.c2, pc.d1, pc.d2, pc.q1, pc.q2];
    let ok_pc = got == [1.0, 1.0, 1.0, 1.0, 0.0, 0.0];
    notes.push(format!("gamma_prior_constants(1,1,1) = {got:?}"));
    outcome(ok1 && ok3 && failing.is_empty() && ok_pc, notes.join("; "))
}

fn criterion_10() -> Outcome {
    let l = ConstantLedger::new()
        .with(Constant::BigC, 1.0)
        .and_then(|l| l.with(Constant::M, 4.0))
        .and_then(|l| l.with(Constant::J, 2.0))
        .and_then(|l| l.with(Constant::SmallC1, 1.0))
        .and_then(|l| l.with(Constant::SmallC2, 1.0))
        .and_then(|l| l.with(Constant::SmallC3, 1.0))
        .unwrap();
    let b = theorem3_bound_at(&l, 10.0).unwrap();
    let oracle = 0.1 + (-40f64).exp() + 2.0 * (-70f64).exp() + 2.0 * (-130f64).exp();
    let close = (b.value - oracle).abs() <= 1e-12;
    let values: Vec<f64> = (0..=900).map(|i| theorem3_bound_at(&l, 10.0 + 0.1 * i as f64).unwrap().value).collect();
    let monotone = values.windows(2).all(|w| w[1] < w[0]);
    outcome(
        close && monotone && b.useful_regime,
        format!("bound(10) = {:.15} vs {oracle:.15}; strictly decreasing on [10, 100]: {monotone}", b.value),
    )
}

fn criterion_11() -> Outcome {
    let text = format!(
        "seed = {ROOT_SEED}\nmodel.kind = sgcp\ngrid.m = 32\nlambda0.family = sin_squared\nlambda0.base = 2\n\
         lambda0.amplitude = 1\nlambda0.frequency = 1\nfilters.levels = 1, 0.5\nschedule = 4, 8\nreplications = 10\n"
    );
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let workers = pool(None).unwrap();
    for d in &dirs {
        let mut raw = RawConfig::parse(&text).unwrap();
        raw.set("output_dir", d.path().to_string_lossy());
        cli::contract(&ExperimentConfig::from_raw(raw).unwrap(), &workers).unwrap();
    }
    let mut compared = 0;
    let mut same = true;
    for e in fs::read_dir(dirs[0].path()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            let other = dirs[1].path().join(p.file_name().unwrap());
            same &= fs::read(&p).unwrap() == fs::read(other).unwrap();
            compared += 1;
        }
    }
    outcome(same && compared >= 2, format!("{compared} CSV files compared, identical: {same}"))
}

fn report(k: usize, limit: Duration, elapsed: Duration, o: &Outcome) -> bool {
    let within = elapsed <= limit;
    let pass = o.pass && within;
    println!(
        "ACCEPTANCE [{k}] {} ({:.1} s, limit {} s) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        o.detail
    );
    pass
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut all = true;
    type Simple = (usize, u64, fn() -> Outcome);
    let simple: [Simple; 5] = [(1, 10, criterion_1), (2, 10, criterion_2), (3, 60, criterion_3), (4, 60, criterion_4), (5, 1800, criterion_5)];
    for (k, limit, f) in simple {
        if run(k) {
            let t = Instant::now();
            let o = f();
            all &= report(k, Duration::from_secs(limit), t.elapsed(), &o);
        }
    }
    if run(6) || run(7) {
        let t = Instant::now();
        let (c6, c7) = criteria_6_7();
        let e = t.elapsed();
        all &= report(6, Duration::from_secs(45 * 60), e, &c6);
        all &= report(7, Duration::from_secs(45 * 60), e, &c7);
    }
    let rest: [Simple; 4] = [(8, 1, criterion_8), (9, 5, criterion_9), (10, 1, criterion_10), (11, 300, criterion_11)];
    for (k, limit, f) in rest {
        if run(k) {
            let t = Instant::now();
            let o = f();
            all &= report(k, Duration::from_secs(limit), t.elapsed(), &o);
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
