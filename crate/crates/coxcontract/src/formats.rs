//! CSV emission and parsing. Every file opens with a provenance comment
//! `# config_hash=<sha256 hex> seed=<u64>`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use coxcontract_core::conditions::ConditionRecord;
use coxcontract_core::contraction::{ContractionCurve, CurveRow, ModelComparison, RateSequences, Verdict};
use coxcontract_core::grid::{Grid, GridField};
use coxcontract_core::inference::{PosteriorSamples, SbcResult};
use coxcontract_core::pointprocess::{PointSet, Realisation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!("# config_hash={} seed={}", self.config_hash, self.seed)
    }

    pub fn parse_header(line: &str) -> Option<Provenance> {
        let rest = line.strip_prefix("# ")?;
        let mut hash = None;
        let mut seed = None;
        for tok in rest.split_whitespace() {
            if let Some(h) = tok.strip_prefix("config_hash=") {
                hash = Some(h.to_string());
            } else if let Some(s) = tok.strip_prefix("seed=") {
                seed = s.parse().ok();
            }
        }
        Some(Provenance {
            config_hash: hash?,
            seed: seed?,
        })
    }
}

/// Shortest round-trip text for `v`, switching to exponent form outside
/// `[1e-4, 1e16)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// A table held in memory and written in one go.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self, prov: &Provenance) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        writeln!(buf, "{}", prov.header())?;
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        drop(w);
        Ok(buf)
    }

    pub fn write(&self, path: &Path, prov: &Provenance) -> Result<()> {
        let bytes = self.to_bytes(prov)?;
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Reads a table written by [`Table::write`], returning its provenance.
    pub fn read(path: &Path) -> Result<(Option<Provenance>, Table)> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let prov = text.lines().next().and_then(Provenance::parse_header);
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.with_context(|| format!("parsing {}", path.display()))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok((prov, Table { columns, rows }))
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .with_context(|| format!("missing column `{name}`"))
    }
}

fn coord_columns(d: usize) -> impl Iterator<Item = String> {
    (1..=d).map(|i| format!("x{i}"))
}

/// `realisation, x1..xd`, one row per observed point.
pub fn points_table(data: &[Realisation], d: usize) -> Table {
    let mut cols = vec!["realisation".to_string()];
    cols.extend(coord_columns(d));
    let mut t = Table::new(&cols);
    for (i, r) in data.iter().enumerate() {
        for p in r.observed.iter() {
            let mut row = vec![i.to_string()];
            row.extend(p.iter().map(|&x| num(x)));
            t.push(row);
        }
    }
    t
}

/// `realisation, filter_index, count`, one row per realisation (including
/// empty ones).
pub fn realisations_table(data: &[Realisation]) -> Table {
    let mut t = Table::new(&["realisation", "filter_index", "count"]);
    for (i, r) in data.iter().enumerate() {
        t.push(vec![i.to_string(), r.filter_index.to_string(), r.observed.len().to_string()]);
    }
    t
}

fn parse_cell<T: std::str::FromStr>(t: &Table, row: usize, col: usize) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    t.rows[row][col]
        .parse::<T>()
        .with_context(|| format!("row {}, column `{}`: {:?}", row + 1, t.columns[col], t.rows[row][col]))
}

/// Rebuilds a dataset from the two tables written by `simulate`.
pub fn read_dataset(points: &Path, realisations: &Path, d: usize) -> Result<Vec<Realisation>> {
    let (_, rt) = Table::read(realisations)?;
    let (_, pt) = Table::read(points)?;
    let (ri, fi, ci) = (rt.column("realisation")?, rt.column("filter_index")?, rt.column("count")?);
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); rt.rows.len()];
    let mut expected = vec![0usize; rt.rows.len()];
    let mut filter_index = vec![0usize; rt.rows.len()];
    for row in 0..rt.rows.len() {
        let i: usize = parse_cell(&rt, row, ri)?;
        if i != row {
            bail!("{}: realisations must be listed in order 0..n", realisations.display());
        }
        filter_index[row] = parse_cell(&rt, row, fi)?;
        expected[row] = parse_cell(&rt, row, ci)?;
    }
    let pr = pt.column("realisation")?;
    let xs = (1..=d).map(|k| pt.column(&format!("x{k}"))).collect::<Result<Vec<_>>>()?;
    for row in 0..pt.rows.len() {
        let i: usize = parse_cell(&pt, row, pr)?;
        let dest = coords
            .get_mut(i)
            .with_context(|| format!("{}: realisation {i} not in {}", points.display(), realisations.display()))?;
        for &c in &xs {
            dest.push(parse_cell(&pt, row, c)?);
        }
    }
    coords
        .into_iter()
        .enumerate()
        .map(|(i, flat)| {
            let observed = PointSet::from_flat(d, flat)?;
            if observed.len() != expected[i] {
                bail!("realisation {i}: {} points listed, count says {}", observed.len(), expected[i]);
            }
            Ok(Realisation {
                observed,
                filter_index: filter_index[i],
            })
        })
        .collect()
}

/// `node, x1..xd` followed by one column per named field.
pub fn field_table(fields: &[(&str, &GridField)]) -> Table {
    let grid: Grid = *fields[0].1.grid();
    let mut cols = vec!["node".to_string()];
    cols.extend(coord_columns(grid.d()));
    cols.extend(fields.iter().map(|(n, _)| n.to_string()));
    let mut t = Table::new(&cols);
    for k in 0..grid.len() {
        let mut row = vec![k.to_string()];
        row.extend(grid.node(k).into_iter().map(num));
        row.extend(fields.iter().map(|(_, f)| num(f.values()[k])));
        t.push(row);
    }
    t
}

/// `chain, iteration, l, lamstar, g[k]...` for the requested probe nodes.
pub fn posterior_table(samples: &PosteriorSamples, probes: &[usize]) -> Table {
    let mut cols: Vec<String> = ["chain", "iteration", "l", "lamstar"].iter().map(|s| s.to_string()).collect();
    cols.extend(probes.iter().map(|k| format!("g[{k}]")));
    let mut t = Table::new(&cols);
    for (i, s) in samples.samples.iter().enumerate() {
        let mut row = vec![
            samples.chain_id[i].to_string(),
            samples.iteration[i].to_string(),
            num(s.l),
            opt_num(s.lamstar),
        ];
        row.extend(probes.iter().map(|&k| num(s.g.values()[k])));
        t.push(row);
    }
    t
}

pub fn acceptance_table(samples: &PosteriorSamples) -> Table {
    let mut t = Table::new(&["chain", "ellipse", "lengthscale", "lamstar", "lengthscale_step", "lamstar_step"]);
    for (c, a) in samples.acceptance.iter().enumerate() {
        t.push(vec![
            c.to_string(),
            num(a.ellipse),
            num(a.lengthscale),
            opt_num(a.lamstar),
            num(a.lengthscale_step),
            num(a.lamstar_step),
        ]);
    }
    t
}

pub const CURVE_COLUMNS: [&str; 5] = ["n", "radius", "mass_outside", "median_distance", "replications"];

pub fn curve_table(curve: &ContractionCurve) -> Table {
    let mut t = Table::new(&CURVE_COLUMNS);
    for r in &curve.rows {
        t.push(vec![
            r.n.to_string(),
            num(r.radius),
            num(r.mass_outside),
            num(r.median_distance),
            r.replications.to_string(),
        ]);
    }
    t
}

pub fn read_curve(path: &Path) -> Result<(Option<Provenance>, Vec<CurveRow>)> {
    let (prov, t) = Table::read(path)?;
    let idx = CURVE_COLUMNS.iter().map(|c| t.column(c)).collect::<Result<Vec<_>>>()?;
    let rows = (0..t.rows.len())
        .map(|r| {
            Ok(CurveRow {
                n: parse_cell(&t, r, idx[0])?,
                radius: parse_cell(&t, r, idx[1])?,
                mass_outside: parse_cell(&t, r, idx[2])?,
                median_distance: parse_cell(&t, r, idx[3])?,
                replications: parse_cell(&t, r, idx[4])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((prov, rows))
}

pub fn cells_table(curve: &ContractionCurve) -> Table {
    let mut t = Table::new(&["n", "replication", "radius", "mass_outside", "median_distance", "median_hellinger"]);
    for (row, group) in curve.rows.iter().zip(&curve.cells) {
        for c in group {
            t.push(vec![
                row.n.to_string(),
                c.replication.to_string(),
                num(c.radius),
                num(c.mass_outside),
                num(c.median_distance),
                num(c.median_hellinger),
            ]);
        }
    }
    t
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Consistent => "consistent",
        Verdict::Inconclusive => "inconclusive",
        Verdict::Contradicts => "contradicts",
    }
}

pub fn comparison_table(rows: &[ModelComparison]) -> Table {
    let mut t = Table::new(&[
        "n",
        "sgcp_median_distance",
        "sgcp_lower",
        "sgcp_upper",
        "qgcp_median_distance",
        "qgcp_lower",
        "qgcp_upper",
        "verdict",
    ]);
    for c in rows {
        t.push(vec![
            c.n.to_string(),
            num(c.sgcp.centre),
            num(c.sgcp.lower),
            num(c.sgcp.upper),
            num(c.qgcp.centre),
            num(c.qgcp.lower),
            num(c.qgcp.upper),
            verdict_name(c.verdict).to_string(),
        ]);
    }
    t
}

pub fn rates_table(rows: &[RateSequences]) -> Table {
    let mut t = Table::new(&RateSequences::COLUMNS);
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            num(r.rho),
            num(r.delta_n),
            num(r.delta_bar_n),
            num(r.epsilon_n),
            num(r.zeta_n),
            num(r.beta_n),
            num(r.kappa_n),
            num(r.chi_n),
            opt_num(r.lambda_n),
            r.model.name().to_string(),
        ]);
    }
    t
}

pub const CONDITION_COLUMNS: [&str; 11] = [
    "condition",
    "n",
    "lhs",
    "rhs",
    "holds",
    "minimal_n",
    "model",
    "relation",
    "at_boundary",
    "log_scale",
    "note",
];

pub fn push_condition(t: &mut Table, model: &str, r: &ConditionRecord) {
    t.push(vec![
        r.name.to_string(),
        opt_u64(r.n),
        num(r.lhs),
        num(r.rhs),
        r.holds.to_string(),
        opt_u64(r.minimal_n),
        model.to_string(),
        r.relation.symbol().to_string(),
        r.at_boundary.to_string(),
        r.log_scale.to_string(),
        r.note.unwrap_or("").to_string(),
    ]);
}

pub fn sbc_tables(sbc: &SbcResult) -> (Table, Table) {
    let names: Vec<&str> = sbc.histograms.iter().map(|h| h.name.as_str()).collect();
    let mut cols = vec!["replication"];
    cols.extend(&names);
    let mut ranks = Table::new(&cols);
    let reps = sbc.histograms.first().map_or(0, |h| h.ranks.len());
    for r in 0..reps {
        let mut row = vec![r.to_string()];
        row.extend(sbc.histograms.iter().map(|h| h.ranks[r].to_string()));
        ranks.push(row);
    }
    let mut hist = Table::new(&["summary", "bin", "count", "chi_square", "dof", "p_value", "uniform_at_0.01"]);
    for h in &sbc.histograms {
        for (b, c) in h.counts.iter().enumerate() {
            hist.push(vec![
                h.name.clone(),
                b.to_string(),
                c.to_string(),
                num(h.test.statistic),
                num(h.test.dof),
                num(h.test.p_value),
                h.test.passes(0.01).to_string(),
            ]);
        }
    }
    (ranks, hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use coxcontract_core::grid::Grid;
    use coxcontract_core::pointprocess::{simulate_dataset, FilterFamily};

    fn prov() -> Provenance {
        Provenance {
            config_hash: "ab".repeat(32),
            seed: 9,
        }
    }

    #[test]
    fn header_roundtrip() {
        let p = prov();
        assert_eq!(Provenance::parse_header(&p.header()), Some(p));
        assert_eq!(Provenance::parse_header("n,radius"), None);
    }

    #[test]
    fn numbers_roundtrip() {
        for v in [0.0, 1.0, -2.5, 1e-300, 3.3e20, 0.1 + 0.2, f64::INFINITY, 1.0 / 3.0] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(num(1e-20), "1e-20");
    }

    #[test]
    fn dataset_roundtrip() {
        let grid = Grid::new(1, 16).unwrap();
        let lam = GridField::constant(grid, 3.0);
        let filters = FilterFamily::alternating(&[1.0, 0.0]).unwrap().filters(5);
        let data = simulate_dataset(&lam, &filters, 4).unwrap();
        assert!(data.iter().any(|r| r.observed.is_empty()));
        let dir = tempfile::tempdir().unwrap();
        let (pp, rp) = (dir.path().join("points.csv"), dir.path().join("realisations.csv"));
        points_table(&data, 1).write(&pp, &prov()).unwrap();
        realisations_table(&data).write(&rp, &prov()).unwrap();
        let back = read_dataset(&pp, &rp, 1).unwrap();
        assert_eq!(back, data);
        let text = fs::read_to_string(&pp).unwrap();
        assert!(text.starts_with("# config_hash="));
    }

    #[test]
    fn quoting_of_notes() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x, y".into(), "1".into()]);
        let bytes = t.to_bytes(&prov()).unwrap();
        let s = String::from_utf8(bytes).unwrap();
        assert!(s.contains("\"x, y\",1"));
    }
}
