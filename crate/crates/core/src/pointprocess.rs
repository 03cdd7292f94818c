//! Filtered non-homogeneous Poisson process data.
//!
//! Raw realisations are drawn by thinning a homogeneous process at the rate
//! maximum, then each event is kept with the probability given by the
//! realisation's filtering function.

use alloc::format;
use alloc::vec::Vec;

use libm::{sin, sqrt};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::rng::{self, Purpose};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    d: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            coords: Vec::new(),
        }
    }

    /// Builds a point set from flat row-major coordinates.
    pub fn from_flat(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 || coords.len() % d != 0 {
            return Err(Error::Precondition(format!(
                "{} coordinates do not split into points of dimension {d}",
                coords.len()
            )));
        }
        if let Some(&c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Precondition(format!("coordinate {c} outside [0, 1]")));
        }
        Ok(Self { d, coords })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.coords.len() / self.d
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d.max(1))
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    fn push(&mut self, x: &[f64]) {
        self.coords.extend_from_slice(x);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realisation {
    pub observed: PointSet,
    /// Zero-based index into the dataset's filter list.
    pub filter_index: usize,
}

/// Parametric filtering function. All kinds depend on the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterSpec {
    Constant(f64),
    /// `levels[i]` applies on `[breakpoints[i-1], breakpoints[i])`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
    /// `offset + amplitude * sin(2π * frequency * x)`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        offset: f64,
    },
}

impl FilterSpec {
    pub fn constant(p: f64) -> Result<Self> {
        let f = Self::Constant(p);
        f.validate()?;
        Ok(f)
    }

    pub fn piecewise(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let f = Self::PiecewiseConstant { breakpoints, levels };
        f.validate()?;
        Ok(f)
    }

    pub fn sinusoidal(amplitude: f64, frequency: f64, offset: f64) -> Result<Self> {
        let f = Self::Sinusoidal {
            amplitude,
            frequency,
            offset,
        };
        f.validate()?;
        Ok(f)
    }

    /// Checks that the filter takes values in `[0, 1]` everywhere. The check
    /// is analytic, so it also covers locations between grid nodes.
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            Self::Constant(p) => {
                if !unit(*p) {
                    return Err(Error::InvalidFilter(format!("constant level {p} outside [0, 1]")));
                }
            }
            Self::PiecewiseConstant { breakpoints, levels } => {
                if levels.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidFilter(format!(
                        "{} breakpoints need {} levels, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        levels.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1])
                    || breakpoints.iter().any(|b| !(0.0..=1.0).contains(b))
                {
                    return Err(Error::InvalidFilter(
                        "breakpoints must be strictly increasing within [0, 1]".into(),
                    ));
                }
                if let Some(v) = levels.iter().find(|v| !unit(**v)) {
                    return Err(Error::InvalidFilter(format!("level {v} outside [0, 1]")));
                }
            }
            Self::Sinusoidal {
                amplitude,
                frequency,
                offset,
            } => {
                if !(amplitude.is_finite() && frequency.is_finite() && offset.is_finite()) {
                    return Err(Error::InvalidFilter("non-finite sinusoid parameter".into()));
                }
                let a = amplitude.abs();
                if offset - a < 0.0 || offset + a > 1.0 {
                    return Err(Error::InvalidFilter(format!(
                        "sinusoid range [{}, {}] leaves [0, 1]",
                        offset - a,
                        offset + a
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x0 = x[0];
        match self {
            Self::Constant(p) => *p,
            Self::PiecewiseConstant { breakpoints, levels } => {
                let i = breakpoints.partition_point(|&b| b <= x0);
                levels[i]
            }
            Self::Sinusoidal {
                amplitude,
                frequency,
                offset,
            } => offset + amplitude * sin(TWO_PI * frequency * x0),
        }
    }

    pub fn on_grid(&self, grid: Grid) -> GridField {
        GridField::from_fn(grid, |x| self.eval(x))
    }
}

/// Filter values tabulated on a grid, one field per realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    grid: Grid,
    fields: Vec<GridField>,
}

impl FilterBank {
    pub fn from_specs(grid: Grid, specs: &[FilterSpec]) -> Result<Self> {
        for s in specs {
            s.validate()?;
        }
        Ok(Self {
            grid,
            fields: specs.iter().map(|s| s.on_grid(grid)).collect(),
        })
    }

    /// Uses nodewise filter values directly, as for per-cell-constant filters.
    pub fn from_fields(grid: Grid, fields: Vec<GridField>) -> Result<Self> {
        for f in &fields {
            grid.ensure_same(f.grid())?;
            if let Some(v) = f.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidFilter(format!("filter value {v} outside [0, 1]")));
            }
        }
        Ok(Self { grid, fields })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn get(&self, j: usize) -> &GridField {
        &self.fields[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &GridField> {
        self.fields.iter()
    }

    /// Copy with every filter replaced by the identity filter.
    pub fn unfiltered(&self) -> Self {
        Self {
            grid: self.grid,
            fields: self.fields.iter().map(|_| GridField::constant(self.grid, 1.0)).collect(),
        }
    }
}

/// Rule assigning a filter to each realisation index of a dataset of size n.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFamily {
    cycle: Vec<FilterSpec>,
}

impl FilterFamily {
    /// Realisation `j` uses `cycle[j % cycle.len()]`.
    pub fn cycle(cycle: Vec<FilterSpec>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::InvalidFilter("filter family needs at least one filter".into()));
        }
        for f in &cycle {
            f.validate()?;
        }
        Ok(Self { cycle })
    }

    pub fn alternating(levels: &[f64]) -> Result<Self> {
        Self::cycle(levels.iter().map(|&p| FilterSpec::Constant(p)).collect())
    }

    /// The distinct filters, in cycle order.
    pub fn period(&self) -> &[FilterSpec] {
        &self.cycle
    }

    pub fn filters(&self, n: usize) -> Vec<FilterSpec> {
        (0..n).map(|j| self.cycle[j % self.cycle.len()].clone()).collect()
    }
}

/// Analytic rate families for the true intensity. All depend on the first
/// coordinate only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFamily {
    Constant(f64),
    /// `intercept + slope * x`.
    Linear { intercept: f64, slope: f64 },
    /// `base + amplitude * sin²(2π * frequency * x)`.
    SinSquared {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl RateFamily {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let x0 = x[0];
        match *self {
            Self::Constant(c) => c,
            Self::Linear { intercept, slope } => intercept + slope * x0,
            Self::SinSquared {
                base,
                amplitude,
                frequency,
            } => {
                let s = sin(TWO_PI * frequency * x0);
                base + amplitude * s * s
            }
        }
    }

    pub fn on_grid(&self, grid: Grid) -> Result<GridField> {
        let f = GridField::from_fn(grid, |x| self.eval(x));
        f.check_rate()?;
        Ok(f)
    }
}

pub fn simulate_nhpp<R: Rng + ?Sized>(rate: &GridField, rng: &mut R) -> Result<PointSet> {
    rate.check_rate()?;
    let d = rate.grid().d();
    let lambda_max = rate.max();
    let mut out = PointSet::empty(d);
    if lambda_max <= 0.0 {
        return Ok(out);
    }
    let count = Poisson::new(lambda_max)
        .map_err(|_| Error::InvalidRate {
            node: 0,
            value: lambda_max,
        })?
        .sample(rng) as u64;
    let mut x = alloc::vec![0.0; d];
    for _ in 0..count {
        for c in x.iter_mut() {
            *c = rng.random::<f64>();
        }
        let accept = rate.at(&x) / lambda_max;
        if rng.random::<f64>() < accept {
            out.push(&x);
        }
    }
    Ok(out)
}

pub fn apply_filter<R: Rng + ?Sized>(raw: &PointSet, gamma: &FilterSpec, rng: &mut R) -> PointSet {
    let mut out = PointSet::empty(raw.d());
    for x in raw.iter() {
        let p = gamma.eval(x);
        if p >= 1.0 || rng.random::<f64>() < p {
            out.push(x);
        }
    }
    out
}

/// Simulates one filtered realisation per filter. Realisation `j` draws from
/// its own stream keyed by `(root_seed, j)`.
pub fn simulate_dataset(lambda0: &GridField, filters: &[FilterSpec], root_seed: u64) -> Result<Vec<Realisation>> {
    if filters.is_empty() {
        return Err(Error::Precondition("dataset needs at least one filter".into()));
    }
    filters
        .iter()
        .enumerate()
        .map(|(j, gamma)| {
            let mut rng = rng::stream(root_seed, Purpose::Realisation, &[j as u64]);
            let raw = simulate_nhpp(lambda0, &mut rng)?;
            Ok(Realisation {
                observed: apply_filter(&raw, gamma, &mut rng),
                filter_index: j,
            })
        })
        .collect()
}

/// Standard error of a Poisson(`mean`) sample mean over `reps` replications.
pub fn poisson_mean_se(mean: f64, reps: usize) -> f64 {
    sqrt(mean / reps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::stats::{chi_square_poisson, ks_test};
    use rand::SeedableRng;

    fn rng(seed: u64) -> StreamRng {
        StreamRng::seed_from_u64(seed)
    }

    fn mean_count<F: FnMut(&mut StreamRng) -> usize>(reps: usize, seed: u64, mut f: F) -> f64 {
        let mut r = rng(seed);
        (0..reps).map(|_| f(&mut r) as f64).sum::<f64>() / reps as f64
    }

    #[test]
    fn zero_rate_gives_empty() {
        let g = Grid::new(1, 16).unwrap();
        let p = simulate_nhpp(&GridField::constant(g, 0.0), &mut rng(1)).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn negative_rate_is_rejected() {
        let g = Grid::new(1, 2).unwrap();
        let rate = GridField::new(g, alloc::vec![1.0, -1.0]).unwrap();
        assert!(simulate_nhpp(&rate, &mut rng(1)).is_err());
    }

    #[test]
    fn constant_rate_mean() {
        let g = Grid::new(1, 16).unwrap();
        let rate = GridField::constant(g, 5.0);
        let m = mean_count(10_000, 2, |r| simulate_nhpp(&rate, r).unwrap().len());
        assert!((m - 5.0).abs() < 3.0 * poisson_mean_se(5.0, 10_000));
    }

    #[test]
    fn linear_rate_mean() {
        let g = Grid::new(1, 256).unwrap();
        let rate = GridField::from_fn(g, |x| 2.0 * x[0]);
        let m = mean_count(10_000, 3, |r| simulate_nhpp(&rate, r).unwrap().len());
        assert!((m - 1.0).abs() < 3.0 * poisson_mean_se(1.0, 10_000));
    }

    #[test]
    fn filter_extremes() {
        let g = Grid::new(2, 8).unwrap();
        let raw = simulate_nhpp(&GridField::constant(g, 30.0), &mut rng(4)).unwrap();
        assert!(!raw.is_empty());
        assert_eq!(apply_filter(&raw, &FilterSpec::Constant(1.0), &mut rng(5)), raw);
        assert!(apply_filter(&raw, &FilterSpec::Constant(0.0), &mut rng(5)).is_empty());
    }

    #[test]
    fn filter_preserves_order() {
        let g = Grid::new(1, 8).unwrap();
        let raw = simulate_nhpp(&GridField::constant(g, 50.0), &mut rng(6)).unwrap();
        let kept = apply_filter(&raw, &FilterSpec::Constant(0.5), &mut rng(7));
        let mut it = raw.iter();
        for x in kept.iter() {
            assert!(it.any(|y| y == x));
        }
    }

    #[test]
    fn half_filter_mean() {
        let g = Grid::new(1, 16).unwrap();
        let rate = GridField::constant(g, 5.0);
        let gamma = FilterSpec::Constant(0.5);
        let m = mean_count(10_000, 8, |r| {
            let raw = simulate_nhpp(&rate, r).unwrap();
            apply_filter(&raw, &gamma, r).len()
        });
        assert!((m - 2.5).abs() < 3.0 * poisson_mean_se(2.5, 10_000));
    }

    #[test]
    fn dataset_examples() {
        let g = Grid::new(1, 16).unwrap();
        let empty = simulate_dataset(&GridField::constant(g, 0.0), &alloc::vec![FilterSpec::Constant(1.0); 3], 1).unwrap();
        assert!(empty.iter().all(|r| r.observed.is_empty()));

        let lambda0 = GridField::constant(g, 4.0);
        let filters = [FilterSpec::Constant(1.0), FilterSpec::Constant(0.25)];
        let reps = 10_000;
        let mut totals = [0.0; 2];
        for rep in 0..reps {
            let data = simulate_dataset(&lambda0, &filters, 1000 + rep).unwrap();
            for r in &data {
                totals[r.filter_index] += r.observed.len() as f64;
            }
        }
        for (total, expected) in totals.iter().zip([4.0, 1.0]) {
            let m = total / reps as f64;
            assert!((m - expected).abs() < 3.0 * poisson_mean_se(expected, reps as usize));
        }
    }

    #[test]
    fn identity_filter_single_realisation_is_plain_nhpp() {
        let g = Grid::new(1, 16).unwrap();
        let lambda0 = GridField::constant(g, 3.0);
        let data = simulate_dataset(&lambda0, &[FilterSpec::Constant(1.0)], 9).unwrap();
        let mut r = rng::stream(9, Purpose::Realisation, &[0]);
        assert_eq!(data[0].observed, simulate_nhpp(&lambda0, &mut r).unwrap());
    }

    #[test]
    fn earlier_realisations_do_not_depend_on_n() {
        let g = Grid::new(1, 16).unwrap();
        let lambda0 = GridField::constant(g, 6.0);
        let f = FilterFamily::alternating(&[1.0, 0.5]).unwrap();
        let small = simulate_dataset(&lambda0, &f.filters(3), 42).unwrap();
        let large = simulate_dataset(&lambda0, &f.filters(10), 42).unwrap();
        assert_eq!(small[..], large[..3]);
    }

    #[test]
    fn thinned_counts_are_poisson() {
        let g = Grid::new(1, 16).unwrap();
        let rate = GridField::constant(g, 6.0);
        let gamma = FilterSpec::Constant(0.4);
        let mut r = rng(11);
        let counts: Vec<u64> = (0..10_000)
            .map(|_| apply_filter(&simulate_nhpp(&rate, &mut r).unwrap(), &gamma, &mut r).len() as u64)
            .collect();
        assert!(chi_square_poisson(&counts, 2.4).passes(0.01));
    }

    #[test]
    fn locations_follow_rate() {
        let g = Grid::new(1, 1024).unwrap();
        let rate = GridField::from_fn(g, |x| 2.0 * x[0]);
        let mut r = rng(12);
        let mut pooled = Vec::new();
        for _ in 0..1000 {
            pooled.extend(simulate_nhpp(&rate, &mut r).unwrap().flat().iter().copied());
        }
        assert!(ks_test(&pooled, |s| s * s).passes(0.01));
    }

    #[test]
    fn filter_validation() {
        assert!(FilterSpec::constant(1.2).is_err());
        assert!(FilterSpec::piecewise(alloc::vec![0.5], alloc::vec![0.1]).is_err());
        assert!(FilterSpec::piecewise(alloc::vec![0.6, 0.4], alloc::vec![0.1, 0.2, 0.3]).is_err());
        assert!(FilterSpec::sinusoidal(0.6, 1.0, 0.5).is_err());
        let s = FilterSpec::sinusoidal(0.5, 2.0, 0.5).unwrap();
        assert!((s.eval(&[0.125]) - 1.0).abs() < 1e-15);
        let p = FilterSpec::piecewise(alloc::vec![0.25, 0.5], alloc::vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(p.eval(&[0.1]), 0.1);
        assert_eq!(p.eval(&[0.25]), 0.2);
        assert_eq!(p.eval(&[0.9]), 0.3);
    }

    #[test]
    fn sin_squared_family() {
        let f = RateFamily::SinSquared {
            base: 2.0,
            amplitude: 1.0,
            frequency: 1.0,
        };
        assert!((f.eval(&[0.25]) - 3.0).abs() < 1e-15);
        assert!((f.eval(&[0.5]) - 2.0).abs() < 1e-12);
    }
}
