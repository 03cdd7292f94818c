//! Contraction-rate formulas and the empirical contraction experiment.

use alloc::vec::Vec;

use libm::{log, pow, sqrt};

use crate::conditions::{Constant, ConstantLedger, Variant};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::inference::{posterior_distances, run_mcmc, McmcConfig, Metric};
use crate::models::{ModelKind, ModelSpec};
use crate::pointprocess::{simulate_dataset, FilterBank, FilterFamily};
use crate::rng::{derive_seed, Purpose};
use crate::special::compensated_sum;
use crate::stats::{mean, median, variance};

/// Log-power exponent of the contraction rates.
pub fn rho(kind: ModelKind, alpha: f64, d: usize) -> f64 {
    let d = d as f64;
    match kind {
        ModelKind::Qgcp => (1.0 + d) / (4.0 + d / alpha),
        ModelKind::Sgcp => (1.0 + d) / (2.0 + d / alpha),
    }
}

fn check_n(n: u64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Precondition(alloc::format!("rate formulas need n >= 3, got {n}")));
    }
    Ok(n as f64)
}

/// Ball width of the contraction theorems.
///
/// QGCP: `2√‖λ0‖ n^{−α/(4α+d)} log^{ρ+d+1} n + n^{−2α/(4α+d)} log^{2ρ+2d+2} n`.
/// SGCP: `n^{−α/(2α+d)} log^{ρ+d+1} n`.
pub fn epsilon_n(kind: ModelKind, n: u64, alpha: f64, d: usize, sup_lambda0: Option<f64>) -> Result<f64> {
    let nf = check_n(n)?;
    let r = rho(kind, alpha, d);
    let df = d as f64;
    let ln = log(nf);
    match kind {
        ModelKind::Sgcp => Ok(pow(nf, -alpha / (2.0 * alpha + df)) * pow(ln, r + df + 1.0)),
        ModelKind::Qgcp => {
            let s = sup_lambda0.ok_or(Error::MissingConstant("sup_lambda0"))?;
            if s < 0.0 {
                return Err(Error::NegativeValue {
                    value: s,
                    context: "sup norm of the true rate",
                });
            }
            let e = 4.0 * alpha + df;
            Ok(2.0 * sqrt(s) * pow(nf, -alpha / e) * pow(ln, r + df + 1.0)
                + pow(nf, -2.0 * alpha / e) * pow(ln, 2.0 * r + 2.0 * df + 2.0))
        }
    }
}

/// Sieve and rate sequences evaluated at one `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSequences {
    pub model: ModelKind,
    pub n: u64,
    pub alpha: f64,
    pub d: usize,
    pub rho: f64,
    pub delta_n: f64,
    pub delta_bar_n: f64,
    pub epsilon_n: f64,
    pub zeta_n: f64,
    pub beta_n: f64,
    pub kappa_n: f64,
    pub chi_n: f64,
    pub lambda_n: Option<f64>,
}

impl RateSequences {
    pub const COLUMNS: [&'static str; 11] = [
        "n", "rho", "delta_n", "delta_bar_n", "epsilon_n", "zeta_n", "beta_n", "kappa_n", "chi_n", "lambda_n", "model",
    ];
}

/// Evaluates the sequences from the ledger.
///
/// QGCP uses the `‖g0‖∞` form of `δ_n` under [`Variant::Appendix`] and
/// `√‖λ0‖∞` with the alternative `ζ_n` exponents under [`Variant::MainText`].
pub fn rate_sequences(kind: ModelKind, n: u64, ledger: &ConstantLedger) -> Result<RateSequences> {
    let nf = check_n(n)?;
    let alpha = ledger.get(Constant::Alpha)?;
    let d = ledger.dimension()?;
    let df = d as f64;
    let tau = ledger.get(Constant::Tau)?;
    let r = rho(kind, alpha, d);
    let ln = log(nf);
    let lp = |p: f64| pow(ln, p);
    let np = |p: f64| pow(nf, p);

    let seq = match kind {
        ModelKind::Qgcp => {
            let g0 = ledger.qgcp_g0()?;
            let e = 4.0 * alpha + df;
            let delta = 2.0 * g0 * np(-alpha / e) * lp(r) + np(-2.0 * alpha / e) * lp(2.0 * r);
            let delta_bar =
                2.0 * g0 * np(-alpha / e) * lp(r + df + 1.0) + np(-2.0 * alpha / e) * lp(2.0 * r + 2.0 * df + 2.0);
            let (l2, l3, l4) = (ledger.get(Constant::L2)?, ledger.get(Constant::L3)?, ledger.get(Constant::L4)?);
            let (l5, l6, l7) = (ledger.get(Constant::L5)?, ledger.get(Constant::L6)?, ledger.get(Constant::L7)?);
            let (z2, z3, z4) = match ledger.variant {
                Variant::Appendix => ((2.0 * alpha + df) / (4.0 * alpha * df + df * df), (alpha * df + df * df) / (4.0 * alpha * df + df * df), df / e),
                Variant::MainText => ((2.0 * alpha + df) / (df * e), (alpha + df) / (df * e), 1.0 / e),
            };
            let zeta = compensated_sum([
                l2 * np(z2) * lp(2.0 * r / df),
                l3 * np(z3) * lp(3.0 * r / df),
                l4 * np(z4) * lp(4.0 * r / df),
            ]);
            let b = 8.0 * alpha + 2.0 * df;
            let half = (df + 1.0) / 2.0;
            let beta = compensated_sum([
                l5 * np((2.0 * alpha + df) / b) * lp(2.0 * r + half),
                l6 * np((alpha + df) / b) * lp(3.0 * r + half),
                l7 * np(df / b) * lp(4.0 * r + half),
            ]);
            let kappa = delta_bar / 3.0;
            RateSequences {
                model: kind,
                n,
                alpha,
                d,
                rho: r,
                delta_n: delta,
                delta_bar_n: delta_bar,
                epsilon_n: delta.max(delta_bar),
                zeta_n: zeta,
                beta_n: beta,
                kappa_n: kappa,
                chi_n: delta_bar / (6.0 * tau * sqrt(df) * beta),
                lambda_n: None,
            }
        }
        ModelKind::Sgcp => {
            let e = 2.0 * alpha + df;
            let delta = np(-alpha / e) * lp(r);
            let delta_bar = np(-alpha / e) * lp(r + df + 1.0);
            let zeta = ledger.get(Constant::L8)? * np(1.0 / e) * lp(2.0 * r / df);
            let beta = ledger.get(Constant::L9)? * np(df / (2.0 * e)) * lp(df + 1.0 + 2.0 * r);
            let kappa_tail = ledger.get(Constant::KappaTail)?;
            let lambda = ledger.get(Constant::L10)? * np(df / (kappa_tail * e)) * lp(4.0 * r / kappa_tail);
            let kappa = delta_bar / 3.0;
            RateSequences {
                model: kind,
                n,
                alpha,
                d,
                rho: r,
                delta_n: delta,
                delta_bar_n: delta_bar,
                epsilon_n: delta.max(delta_bar),
                zeta_n: zeta,
                beta_n: beta,
                kappa_n: kappa,
                chi_n: kappa / (2.0 * tau * sqrt(df) * beta),
                lambda_n: Some(lambda),
            }
        }
    };
    Ok(seq)
}

/// Smallest `n` in `[3, n_max]` from which the SGCP ball width stays strictly
/// below the QGCP one.
pub fn sgcp_tighter_from(alpha: f64, d: usize, sup_lambda0: f64, n_max: u64) -> Option<u64> {
    let mut start = None;
    for n in 3..=n_max {
        let s = epsilon_n(ModelKind::Sgcp, n, alpha, d, None).ok()?;
        let q = epsilon_n(ModelKind::Qgcp, n, alpha, d, Some(sup_lambda0)).ok()?;
        if s < q {
            start.get_or_insert(n);
        } else {
            start = None;
        }
    }
    start
}

/// Everything needed to run the empirical contraction experiment.
#[derive(Debug, Clone)]
pub struct ContractionSetup {
    pub model: ModelSpec,
    pub lambda0: GridField,
    pub family: FilterFamily,
    pub schedule: Vec<u64>,
    /// Multiplier of the ball radius `√2 M ε_n`.
    pub big_m: f64,
    /// Smoothness used in `ε_n`.
    pub alpha: f64,
    pub mcmc: McmcConfig,
    pub replications: usize,
    pub seed: u64,
}

/// Result of one `(n, replication)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub n_index: usize,
    pub replication: usize,
    pub radius: f64,
    pub mass_outside: f64,
    pub median_distance: f64,
    pub median_hellinger: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub n: u64,
    pub radius: f64,
    pub mass_outside: f64,
    pub median_distance: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCurve {
    pub model: ModelKind,
    pub rows: Vec<CurveRow>,
    /// Per-replication cell results, grouped by schedule index.
    pub cells: Vec<Vec<CellResult>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveField {
    MassOutside,
    MedianDistance,
}

impl ContractionSetup {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.mcmc.validate()?;
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("n schedule must be nonempty and strictly increasing".into()));
        }
        if self.schedule[0] < 3 {
            return Err(Error::Precondition("n schedule must start at n >= 3".into()));
        }
        if !(self.big_m > 0.0) {
            return Err(Error::Precondition("M must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Precondition("replications must be >= 1".into()));
        }
        self.lambda0.check_rate()
    }

    pub fn radius(&self, n: u64) -> Result<f64> {
        let eps = epsilon_n(self.model.kind, n, self.alpha, self.lambda0.grid().d(), Some(self.lambda0.max()))?;
        Ok(core::f64::consts::SQRT_2 * self.big_m * eps)
    }

    /// Number of `(n, replication)` cells, each of which is one MCMC run.
    pub fn cell_count(&self) -> usize {
        self.schedule.len() * self.replications
    }

    pub fn cell_coordinates(&self, index: usize) -> (usize, usize) {
        (index / self.replications, index % self.replications)
    }

    /// Runs one cell. Datasets for a replication are nested across `n`
    /// because realisation streams are keyed by the replication only.
    pub fn run_cell(&self, n_index: usize, replication: usize) -> Result<CellResult> {
        let n = self.schedule[n_index];
        let grid = *self.lambda0.grid();
        let filters = self.family.filters(n as usize);
        let data_seed = derive_seed(self.seed, Purpose::ContractionData, &[replication as u64]);
        let data = simulate_dataset(&self.lambda0, &filters, data_seed)?;
        let mut mcmc = self.mcmc.clone();
        mcmc.seed = derive_seed(self.seed, Purpose::ContractionChain, &[n, replication as u64]);
        let samples = run_mcmc(&data, &filters, &self.model, &grid, &mcmc)?;
        let bank = FilterBank::from_specs(grid, &filters)?;
        let radius = self.radius(n)?;
        let distances = posterior_distances(&samples, &self.model, &self.lambda0, &bank, Metric::GammaSqrtL2)?;
        let hellinger = posterior_distances(&samples, &self.model, &self.lambda0, &bank, Metric::Hellinger)?;
        let outside = distances.iter().filter(|&&v| v >= radius).count();
        log::debug!("contraction cell n = {n}, replication = {replication} done");
        Ok(CellResult {
            n_index,
            replication,
            radius,
            mass_outside: outside as f64 / distances.len() as f64,
            median_distance: median(&distances),
            median_hellinger: median(&hellinger),
        })
    }

    /// Merges cell results (in any order) into a curve in schedule order.
    pub fn assemble(&self, mut cells: Vec<CellResult>) -> Result<ContractionCurve> {
        if cells.len() != self.cell_count() {
            return Err(Error::Precondition(alloc::format!(
                "expected {} cells, got {}",
                self.cell_count(),
                cells.len()
            )));
        }
        cells.sort_by_key(|c| (c.n_index, c.replication));
        let grouped: Vec<Vec<CellResult>> = cells.chunks(self.replications).map(|c| c.to_vec()).collect();
        let rows = grouped
            .iter()
            .enumerate()
            .map(|(i, group)| CurveRow {
                n: self.schedule[i],
                radius: group[0].radius,
                mass_outside: mean(&group.iter().map(|c| c.mass_outside).collect::<Vec<_>>()),
                median_distance: mean(&group.iter().map(|c| c.median_distance).collect::<Vec<_>>()),
                replications: group.len(),
            })
            .collect();
        Ok(ContractionCurve {
            model: self.model.kind,
            rows,
            cells: grouped,
        })
    }
}

/// Runs every cell sequentially. See [`ContractionSetup::run_cell`] for a
/// unit that can be scheduled elsewhere.
pub fn run_contraction_experiment(setup: &ContractionSetup) -> Result<ContractionCurve> {
    setup.validate()?;
    let cells = (0..setup.cell_count())
        .map(|i| {
            let (n_index, rep) = setup.cell_coordinates(i);
            setup.run_cell(n_index, rep)
        })
        .collect::<Result<Vec<_>>>()?;
    setup.assemble(cells)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub used: usize,
    /// Rows dropped because the field was zero.
    pub excluded: usize,
}

/// Least-squares slope of `log(field)` against `log(n)`.
pub fn fit_loglog_slope(curve: &ContractionCurve, field: CurveField) -> Result<SlopeFit> {
    let points: Vec<(f64, f64)> = curve
        .rows
        .iter()
        .map(|r| {
            let v = match field {
                CurveField::MassOutside => r.mass_outside,
                CurveField::MedianDistance => r.median_distance,
            };
            (r.n as f64, v)
        })
        .collect();
    fit_loglog(&points)
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(n, v)| (log(n), log(v)))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::InsufficientRows {
            usable: usable.len(),
            excluded,
        });
    }
    let k = usable.len() as f64;
    let mx = compensated_sum(usable.iter().map(|p| p.0)) / k;
    let my = compensated_sum(usable.iter().map(|p| p.1)) / k;
    let sxy = compensated_sum(usable.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let sxx = compensated_sum(usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        used: usable.len(),
        excluded,
    })
}

/// Outcome of comparing two models' posterior median distances at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// QGCP distance at least the SGCP distance with separated intervals.
    Consistent,
    /// Intervals overlap.
    Inconclusive,
    /// QGCP distance below the SGCP distance with separated intervals.
    Contradicts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub centre: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelComparison {
    pub n: u64,
    pub sgcp: Interval,
    pub qgcp: Interval,
    pub verdict: Verdict,
}

/// 95% normal interval for the mean of replication values.
pub fn mean_interval(values: &[f64]) -> Interval {
    let m = mean(values);
    let half = if values.len() > 1 {
        1.959_963_984_540_054 * sqrt(variance(values) / values.len() as f64)
    } else {
        f64::INFINITY
    };
    Interval {
        centre: m,
        lower: m - half,
        upper: m + half,
    }
}

/// Compares the replication medians of two curves at schedule entry `n`.
pub fn compare_models(sgcp: &ContractionCurve, qgcp: &ContractionCurve, n: u64) -> Result<ModelComparison> {
    let pick = |c: &ContractionCurve| -> Result<Interval> {
        let i = c
            .rows
            .iter()
            .position(|r| r.n == n)
            .ok_or_else(|| Error::Precondition(alloc::format!("n = {n} not in the schedule")))?;
        Ok(mean_interval(&c.cells[i].iter().map(|x| x.median_distance).collect::<Vec<_>>()))
    };
    let s = pick(sgcp)?;
    let q = pick(qgcp)?;
    let verdict = if q.lower > s.upper {
        Verdict::Consistent
    } else if q.upper < s.lower {
        Verdict::Contradicts
    } else {
        Verdict::Inconclusive
    };
    Ok(ModelComparison {
        n,
        sgcp: s,
        qgcp: q,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rho_values() {
        assert_relative_eq!(rho(ModelKind::Sgcp, 1.0, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(rho(ModelKind::Qgcp, 1.0, 1), 2.0 / 5.0, epsilon = 1e-15);
        assert_relative_eq!(rho(ModelKind::Sgcp, 1e12, 1), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn epsilon_small_n_is_rejected() {
        assert!(epsilon_n(ModelKind::Sgcp, 2, 1.0, 1, None).is_err());
        assert!(epsilon_n(ModelKind::Qgcp, 10, 1.0, 1, None).is_err());
    }

    #[test]
    fn epsilon_three_sgcp() {
        // Frozen from a 50-digit evaluation of 3^{-1/3} (ln 3)^{8/3}.
        let v = epsilon_n(ModelKind::Sgcp, 3, 1.0, 1, None).unwrap();
        assert_relative_eq!(v, 0.891_000_857_379_853_8, max_relative = 1e-13);
    }

    fn loglog_slope(kind: ModelKind, ns: &[u64]) -> f64 {
        let pts: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| (n as f64, epsilon_n(kind, n, 1.0, 1, Some(1.0)).unwrap()))
            .collect();
        fit_loglog(&pts).unwrap().slope
    }

    /// Least-squares slope of `a·x + b·ln x` against `x`.
    fn slope_with_log_term(xs: &[f64], a: f64, b: f64) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let ys: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        a + b * sxy / sxx
    }

    #[test]
    fn epsilon_exponents() {
        // log ε = −x/3 + (8/3) ln x with x = ln n, so the fitted slope is
        // biased by the log power.
        let ns = [1_000u64, 10_000, 100_000, 1_000_000];
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let want = slope_with_log_term(&xs, -1.0 / 3.0, 8.0 / 3.0);
        assert_relative_eq!(loglog_slope(ModelKind::Sgcp, &ns), want, epsilon = 1e-12);
        // Far out the local slopes approach the polynomial exponents.
        let far = [u64::MAX / 256, u64::MAX / 16, u64::MAX / 2];
        let xf: Vec<f64> = far.iter().map(|&n| (n as f64).ln()).collect();
        let sgcp = loglog_slope(ModelKind::Sgcp, &far);
        assert_relative_eq!(sgcp, slope_with_log_term(&xf, -1.0 / 3.0, 8.0 / 3.0), epsilon = 1e-9);
        // QGCP mixes two terms; evaluate them in x = ln n directly.
        for xs in [&xs, &xf] {
            let ys: Vec<f64> = xs
                .iter()
                .map(|&x| (2.0 * (-0.2 * x).exp() * x.powf(2.4) + (-0.4 * x).exp() * x.powf(4.8)).ln())
                .collect();
            let n = xs.len() as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let ns: Vec<u64> = xs.iter().map(|x| x.exp().round() as u64).collect();
            assert_relative_eq!(loglog_slope(ModelKind::Qgcp, &ns), sxy / sxx, epsilon = 1e-6);
        }
    }

    #[test]
    fn slope_examples() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 1e4].iter().map(|&n: &f64| (n, n.powf(-1.0 / 3.0))).collect();
        assert_relative_eq!(fit_loglog(&pts).unwrap().slope, -1.0 / 3.0, epsilon = 1e-12);
        let flat: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&n| (n, 0.7)).collect();
        assert!(fit_loglog(&flat).unwrap().slope.abs() < 1e-14);
        let biased: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5]
            .iter()
            .map(|&n: &f64| (n, 5.0 * n.powf(-0.2) * n.ln()))
            .collect();
        let s = fit_loglog(&biased).unwrap().slope;
        let xs: Vec<f64> = [1e2f64, 1e3, 1e4, 1e5].iter().map(|n| n.ln()).collect();
        assert_relative_eq!(s, slope_with_log_term(&xs, -0.2, 1.0), epsilon = 1e-12);
        let zeros = [(10.0, 0.0), (20.0, 0.5), (40.0, 0.2), (80.0, 0.0)];
        assert_eq!(
            fit_loglog(&zeros),
            Err(Error::InsufficientRows { usable: 2, excluded: 2 })
        );
    }

    #[test]
    fn sgcp_eventually_tighter() {
        let n_star = sgcp_tighter_from(1.0, 1, 1.0, 5000).unwrap();
        for n in n_star..n_star + 200 {
            let s = epsilon_n(ModelKind::Sgcp, n, 1.0, 1, None).unwrap();
            let q = epsilon_n(ModelKind::Qgcp, n, 1.0, 1, Some(1.0)).unwrap();
            assert!(s < q);
        }
    }

    #[test]
    fn interval_verdicts() {
        let curve = |vals: &[f64], kind| ContractionCurve {
            model: kind,
            rows: alloc::vec![CurveRow { n: 64, radius: 1.0, mass_outside: 0.0, median_distance: mean(vals), replications: vals.len() }],
            cells: alloc::vec![vals
                .iter()
                .enumerate()
                .map(|(i, &v)| CellResult { n_index: 0, replication: i, radius: 1.0, mass_outside: 0.0, median_distance: v, median_hellinger: v })
                .collect()],
        };
        let s = curve(&[0.10, 0.11, 0.09, 0.10], ModelKind::Sgcp);
        let q = curve(&[0.30, 0.31, 0.29, 0.30], ModelKind::Qgcp);
        assert_eq!(compare_models(&s, &q, 64).unwrap().verdict, Verdict::Consistent);
        assert_eq!(compare_models(&q, &s, 64).unwrap().verdict, Verdict::Contradicts);
        let q = curve(&[0.05, 0.15, 0.10, 0.12], ModelKind::Qgcp);
        assert_eq!(compare_models(&s, &q, 64).unwrap().verdict, Verdict::Inconclusive);
        assert!(compare_models(&s, &q, 65).is_err());
    }

    proptest! {
        #[test]
        fn delta_bar_dominates(n in 3u64..1_000_000, alpha in 0.2f64..4.0, d in 1usize..4, g0 in 0.1f64..10.0) {
            let ledger = ConstantLedger::example(alpha, d, g0);
            for kind in [ModelKind::Qgcp, ModelKind::Sgcp] {
                let s = rate_sequences(kind, n, &ledger).unwrap();
                prop_assert!(s.delta_bar_n >= s.delta_n);
                prop_assert_eq!(s.epsilon_n, s.delta_bar_n);
                prop_assert!((s.kappa_n - s.delta_bar_n / 3.0).abs() <= 1e-15 * s.delta_bar_n);
                prop_assert!(s.delta_n > 0.0 && s.zeta_n > 0.0 && s.beta_n > 0.0 && s.chi_n > 0.0);
            }
        }

        #[test]
        fn zeta_increases(n in 3u64..1_000_000, alpha in 0.2f64..4.0, d in 1usize..4) {
            let ledger = ConstantLedger::example(alpha, d, 1.0);
            for kind in [ModelKind::Qgcp, ModelKind::Sgcp] {
                let a = rate_sequences(kind, n, &ledger).unwrap().zeta_n;
                let b = rate_sequences(kind, n + 1, &ledger).unwrap().zeta_n;
                prop_assert!(b > a);
            }
        }
    }
}
