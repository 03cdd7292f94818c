//! Squared-exponential Gaussian process prior on the grid and the Gamma
//! hyperprior on the inverse lengthscale.

use alloc::vec::Vec;

use libm::{exp, log, pow};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use crate::special::{gamma_p, ln_gamma};

pub const DEFAULT_JITTER: f64 = 1e-8;
pub const MAX_JITTER: f64 = 1e-4;
/// Largest node count for which a dense covariance is built.
pub const MAX_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    /// Inverse lengthscale.
    pub l: f64,
    pub jitter: f64,
}

impl KernelSpec {
    pub fn new(l: f64, jitter: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) || !(jitter > 0.0) {
            return Err(Error::Precondition(alloc::format!(
                "kernel needs l > 0 and jitter > 0, got l = {l}, jitter = {jitter}"
            )));
        }
        Ok(Self { l, jitter })
    }
}

/// `exp(-l² |s_i - s_j|²) + jitter [i = j]`.
pub fn se_covariance(grid: &Grid, kernel: KernelSpec) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if n > MAX_NODES {
        return Err(Error::GridTooLarge {
            nodes: n,
            cap: MAX_NODES,
        });
    }
    let l2 = kernel.l * kernel.l;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0 + kernel.jitter;
        for j in 0..i {
            let v = exp(-l2 * grid.squared_distance(i, j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Lower Cholesky factor of the SE covariance together with the jitter that
/// was needed to obtain it.
#[derive(Debug, Clone)]
pub struct GpFactor {
    l: f64,
    jitter: f64,
    lower: DMatrix<f64>,
}

impl GpFactor {
    /// Factorizes the covariance, escalating the jitter tenfold up to
    /// [`MAX_JITTER`] when the matrix is numerically singular.
    pub fn new(grid: &Grid, kernel: KernelSpec) -> Result<Self> {
        let mut jitter = kernel.jitter;
        loop {
            let cov = se_covariance(grid, KernelSpec { l: kernel.l, jitter })?;
            if let Some(chol) = cov.cholesky() {
                if jitter > kernel.jitter {
                    log::debug!("covariance for l = {} factorized with jitter {:e}", kernel.l, jitter);
                }
                return Ok(Self {
                    l: kernel.l,
                    jitter,
                    lower: chol.unpack(),
                });
            }
            if jitter >= MAX_JITTER {
                return Err(Error::Factorization {
                    l: kernel.l,
                    m: grid.m(),
                    jitter,
                });
            }
            log::warn!("Cholesky failed for l = {}, m = {}; raising jitter to {:e}", kernel.l, grid.m(), jitter * 10.0);
            jitter = (jitter * 10.0).min(MAX_JITTER);
        }
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Writes `L z` into `out`.
    pub fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.lower[(i, j)] * z[j];
            }
            out[i] = s;
        }
    }

    pub fn mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        self.mul_into(z, &mut out);
        out
    }

    /// Solves `L z = g` by forward substitution.
    pub fn whiten(&self, g: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(g);
        let z = self
            .lower
            .solve_lower_triangular(&v)
            .expect("Cholesky factor has a positive diagonal");
        z.iter().copied().collect()
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn sample_gp<R: Rng + ?Sized>(grid: &Grid, factor: &GpFactor, rng: &mut R) -> GridField {
    let z = standard_normal_vec(factor.dim(), rng);
    GridField::new(*grid, factor.mul(&z)).expect("factor dimension matches grid")
}

/// Gamma(a, b) prior (shape, rate) on `l^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthscalePrior {
    pub a: f64,
    pub b: f64,
}

/// Constants of the two-sided density envelope
/// `C1 x^q1 exp(-D1 x^d) <= π(x) <= C2 x^q1 exp(-D2 x^d) log^q2(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConstants {
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub q1: f64,
    pub q2: f64,
}

impl LengthscalePrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Precondition(alloc::format!(
                "lengthscale prior needs a, b > 0, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// Log density of `l` induced by the Gamma prior on `l^d`.
    pub fn ln_pdf(&self, l: f64, d: usize) -> f64 {
        if l <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let c = gamma_prior_constants(*self, d);
        log(c.c1) + c.q1 * log(l) - self.b * pow(l, d as f64)
    }

    /// Median of `l`, from the median of the Gamma variable `l^d`.
    pub fn median(&self, d: usize) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.a / self.b + 1.0;
        while gamma_p(self.a, self.b * hi) < 0.5 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gamma_p(self.a, self.b * mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        pow(0.5 * (lo + hi), 1.0 / d as f64)
    }

    pub fn cdf(&self, l: f64, d: usize) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        gamma_p(self.a, self.b * pow(l, d as f64))
    }
}

pub fn sample_lengthscale<R: Rng + ?Sized>(prior: LengthscalePrior, d: usize, rng: &mut R) -> f64 {
    let y: f64 = Gamma::new(prior.a, 1.0 / prior.b)
        .expect("validated prior parameters")
        .sample(rng);
    pow(y, 1.0 / d as f64)
}

/// Envelope constants for the Gamma prior on `l^d`:
/// `C1 = C2 = b^a d / Γ(a)`, `D1 = D2 = b`, `q1 = d a - 1`, `q2 = 0`.
pub fn gamma_prior_constants(prior: LengthscalePrior, d: usize) -> PriorConstants {
    let df = d as f64;
    let c = exp(prior.a * log(prior.b) + log(df) - ln_gamma(prior.a));
    PriorConstants {
        c1: c,
        c2: c,
        d1: prior.b,
        d2: prior.b,
        q1: df * prior.a - 1.0,
        q2: 0.0,
    }
}
