//! Regular lattices over `[0,1]^d` and functions sampled on them.
//!
//! Nodes are cell centers of a uniform partition with `m` cells per axis,
//! stored in row-major order (the last coordinate varies fastest). Integrals
//! use the midpoint rule and point locations are mapped to their nearest node.

use alloc::format;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::error::{Error, Result};
use crate::special::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    d: usize,
    m: usize,
}

impl Grid {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::Precondition(format!(
                "grid needs d >= 1 and m >= 1, got d = {d}, m = {m}"
            )));
        }
        if libm::pow(m as f64, d as f64) > usize::MAX as f64 / 8.0 {
            return Err(Error::Precondition(format!("grid m^d overflows for d = {d}, m = {m}")));
        }
        Ok(Self { d, m })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Writes the coordinates of node `k` into `out` (length `d`).
    pub fn node_into(&self, k: usize, out: &mut [f64]) {
        let mut rest = k;
        for axis in (0..self.d).rev() {
            let i = rest % self.m;
            rest /= self.m;
            out[axis] = (i as f64 + 0.5) / self.m as f64;
        }
    }

    pub fn node(&self, k: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.d];
        self.node_into(k, &mut out);
        out
    }

    /// Index of the node whose cell contains `x`. Points on the upper boundary
    /// map to the last cell.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut k = 0;
        for &c in x.iter().take(self.d) {
            let i = ((c * self.m as f64) as usize).min(self.m - 1);
            k = k * self.m + i;
        }
        k
    }

    pub fn squared_distance(&self, a: usize, b: usize) -> f64 {
        let mut ra = a;
        let mut rb = b;
        let mut s = 0.0;
        for _ in 0..self.d {
            let diff = (ra % self.m) as f64 - (rb % self.m) as f64;
            s += diff * diff;
            ra /= self.m;
            rb /= self.m;
        }
        s / (self.m * self.m) as f64
    }

    fn describe(&self) -> alloc::string::String {
        format!("d={} m={}", self.d, self.m)
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                left: self.describe(),
                right: other.describe(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Builds a rate field, rejecting negative or non-finite values.
    pub fn rate(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let field = Self::new(grid, values)?;
        field.check_rate()?;
        Ok(field)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: alloc::vec![value; grid.len()],
        }
    }

    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: Grid, mut f: F) -> Self {
        let mut x = alloc::vec![0.0; grid.d()];
        let values = (0..grid.len())
            .map(|k| {
                grid.node_into(k, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_rate(&self) -> Result<()> {
        for (node, &value) in self.values.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidRate { node, value });
            }
        }
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Value at the node nearest to `x`.
    pub fn at(&self, x: &[f64]) -> f64 {
        self.values[self.grid.nearest_node(x)]
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridField, f: F) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Midpoint-rule integral over `[0,1]^d`.
pub fn quadrature(f: &GridField) -> f64 {
    f.grid.cell_volume() * compensated_sum(f.values.iter().copied())
}

/// Midpoint-rule integral of an arbitrary nodewise expression.
pub fn quadrature_with<F: Fn(usize) -> f64>(grid: &Grid, f: F) -> f64 {
    grid.cell_volume() * compensated_sum((0..grid.len()).map(f))
}

pub fn sup_diff(f: &GridField, h: &GridField) -> Result<f64> {
    f.grid.ensure_same(&h.grid)?;
    Ok(f.values
        .iter()
        .zip(&h.values)
        .map(|(a, b)| fabs(a - b))
        .fold(0.0, f64::max))
}

pub fn l2_diff(f: &GridField, h: &GridField) -> Result<f64> {
    f.grid.ensure_same(&h.grid)?;
    Ok(sqrt(quadrature_with(&f.grid, |k| {
        let diff = f.values[k] - h.values[k];
        diff * diff
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_integral_and_volume() {
        for (d, m) in [(1, 7), (2, 5), (3, 4)] {
            let g = Grid::new(d, m).unwrap();
            assert_relative_eq!(g.cell_volume() * g.len() as f64, 1.0, epsilon = 1e-15);
            assert_relative_eq!(quadrature(&GridField::constant(g, 1.0)), 1.0, epsilon = 1e-14);
            assert_eq!(quadrature(&GridField::constant(g, 0.0)), 0.0);
        }
    }

    #[test]
    fn midpoint_rule_is_exact_for_linear() {
        let g = Grid::new(1, 100).unwrap();
        let f = GridField::from_fn(g, |x| 2.0 * x[0]);
        // Independent evaluation of the midpoint sum with integer arithmetic.
        let oracle: f64 = (1..=100).map(|i| (2 * i - 1) as f64).sum::<f64>() / 10_000.0;
        assert_eq!(oracle, 1.0);
        assert_relative_eq!(quadrature(&f), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sup_diff_examples() {
        let g = Grid::new(1, 10).unwrap();
        let f = GridField::constant(g, 4.0);
        let h = GridField::constant(g, 1.0);
        assert_eq!(sup_diff(&f, &f).unwrap(), 0.0);
        assert_eq!(sup_diff(&f, &h).unwrap(), 3.0);
        let s = GridField::from_fn(g, |x| x[0]);
        assert_relative_eq!(sup_diff(&s, &GridField::constant(g, 0.0)).unwrap(), 0.95, epsilon = 1e-15);
    }

    #[test]
    fn l2_diff_examples() {
        let g = Grid::new(1, 10).unwrap();
        assert_relative_eq!(
            l2_diff(&GridField::constant(g, 4.0), &GridField::constant(g, 1.0)).unwrap(),
            3.0,
            epsilon = 1e-14
        );
        let g = Grid::new(1, 4096).unwrap();
        let s = GridField::from_fn(g, |x| x[0]);
        let v = l2_diff(&s, &GridField::constant(g, 0.0)).unwrap();
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn mismatched_grids_error() {
        let a = GridField::constant(Grid::new(1, 4).unwrap(), 1.0);
        let b = GridField::constant(Grid::new(1, 5).unwrap(), 1.0);
        assert!(matches!(sup_diff(&a, &b), Err(Error::GridMismatch { .. })));
        assert!(matches!(l2_diff(&a, &b), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn nodes_are_interior_and_row_major() {
        let g = Grid::new(2, 3).unwrap();
        assert_eq!(g.node(0), alloc::vec![1.0 / 6.0, 1.0 / 6.0]);
        assert_eq!(g.node(1), alloc::vec![1.0 / 6.0, 0.5]);
        assert_eq!(g.node(3), alloc::vec![0.5, 1.0 / 6.0]);
        for k in 0..g.len() {
            let x = g.node(k);
            assert!(x.iter().all(|&c| c > 0.0 && c < 1.0));
            assert_eq!(g.nearest_node(&x), k);
        }
        assert_eq!(g.nearest_node(&[1.0, 1.0]), 8);
        assert_relative_eq!(g.squared_distance(0, 8), 2.0 * (2.0f64 / 3.0).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn rate_rejects_negative() {
        let g = Grid::new(1, 3).unwrap();
        assert!(GridField::rate(g, alloc::vec![1.0, -0.5, 2.0]).is_err());
        assert!(GridField::rate(g, alloc::vec![1.0, f64::NAN, 2.0]).is_err());
        assert!(GridField::new(g, alloc::vec![1.0]).is_err());
    }

    fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn quadrature_is_linear((f, h, _) in triple(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let g = Grid::new(1, f.len()).unwrap();
            let ff = GridField::new(g, f).unwrap();
            let hh = GridField::new(g, h).unwrap();
            let combo = ff.zip_with(&hh, |x, y| a * x + b * y).unwrap();
            let lhs = quadrature(&combo);
            let rhs = a * quadrature(&ff) + b * quadrature(&hh);
            let scale = 1.0 + lhs.abs().max(rhs.abs()) + a.abs() * 10.0 + b.abs() * 10.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn l2_bounded_by_sup((f, h, _) in triple()) {
            let g = Grid::new(1, f.len()).unwrap();
            let ff = GridField::new(g, f).unwrap();
            let hh = GridField::new(g, h).unwrap();
            prop_assert!(l2_diff(&ff, &hh).unwrap() <= sup_diff(&ff, &hh).unwrap() + 1e-12);
        }

        #[test]
        fn metrics_are_symmetric_and_triangular((f, h, k) in triple()) {
            let g = Grid::new(1, f.len()).unwrap();
            let ff = GridField::new(g, f).unwrap();
            let hh = GridField::new(g, h).unwrap();
            let kk = GridField::new(g, k).unwrap();
            for dist in [sup_diff, l2_diff] {
                let fh = dist(&ff, &hh).unwrap();
                prop_assert!((fh - dist(&hh, &ff).unwrap()).abs() <= 1e-10);
                prop_assert!(fh <= dist(&ff, &kk).unwrap() + dist(&kk, &hh).unwrap() + 1e-10);
            }
        }
    }
}
