//! Rate functions: the long-memory kernel h and the integral functional
//! Λ^rl, finite-dimensional rates and their conjugates, the Gaussian
//! long-memory rate with its Riesz operator, the variational transform
//! Γ*_α, path rates, and a truncated feasibility check for the Π sets.

mod conjugate;
mod gaussian;
mod kernel;
mod path;
mod pi;
mod variational;

pub use conjugate::{conjugate_rl, conjugate_rl_potential, finite_dim_rate, Limit};
pub use gaussian::{
    cell_gram, gaussian_rate_alpha, gaussian_sigma2, riesz_apply, riesz_cell_integral, GaussianMode,
    GaussianRate,
};
pub use kernel::{h_kernel, lambda_rl, lambda_rl_potential, KernelQuadrature, QuadratureSpec};
pub use path::path_rate;
pub use pi::{pi_membership, PiVerdict};
pub use variational::{gamma_alpha_star, NewtonOptions};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;

/// A rate value with its numerical bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValue {
    pub value: f64,
    /// Magnitude of the analytically extrapolated tail of the x-integral.
    pub tail_bound: f64,
    /// The tail bound exceeded the requested tolerance.
    pub imprecise: bool,
    /// The supremum was still increasing at the probe radius.
    pub unbounded: bool,
}

impl RateValue {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            tail_bound: 0.0,
            imprecise: false,
            unbounded: value == f64::INFINITY,
        }
    }
}

/// `0 = t_0 < t_1 < … < t_k ≤ 1` with a level λ_i ∈ R^d per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLevels {
    times: Vec<f64>,
    levels: Vec<Vec<f64>>,
}

impl PartitionLevels {
    pub fn new(times: Vec<f64>, levels: Vec<Vec<f64>>) -> Result<Self> {
        check_times(&times)?;
        if levels.len() != times.len() {
            return Err(Error::InvalidPartition("one level per time is required".into()));
        }
        let d = levels[0].len();
        if d == 0 || levels.iter().any(|l| l.len() != d) {
            return Err(Error::InvalidPartition("levels must share one positive dimension".into()));
        }
        if levels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("levels must be finite"));
        }
        Ok(Self { times, levels })
    }

    /// k = 1, t_1 = 1.
    pub fn single(level: Vec<f64>) -> Self {
        Self::new(vec![1.0], vec![level]).expect("valid single-interval partition")
    }

    /// Scalar levels on the uniform partition `t_j = j/m`.
    pub fn uniform(levels: Vec<Vec<f64>>) -> Result<Self> {
        let m = levels.len();
        let times = (1..=m).map(|j| j as f64 / m as f64).collect();
        Self::new(times, levels)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].len()
    }

    /// t_i with t_0 = 0.
    pub fn t(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.times[i - 1]
        }
    }

    pub fn with_levels(&self, levels: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.times.clone(), levels)
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidPartition("at least one time point is required".into()));
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev) {
            return Err(Error::InvalidPartition(format!(
                "times must be strictly increasing from 0 (got {t} after {prev})"
            )));
        }
        prev = t;
    }
    if prev > 1.0 {
        return Err(Error::InvalidPartition("times must not exceed 1".into()));
    }
    Ok(())
}

/// Piecewise-linear path on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    knots: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl PiecewisePath {
    pub fn new(knots: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::invalid("a path needs matching knots and values, at least two"));
        }
        if knots[0] != 0.0 || *knots.last().expect("non-empty") != 1.0 {
            return Err(Error::invalid("path knots must start at 0 and end at 1"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("path knots must be strictly increasing"));
        }
        let d = values[0].len();
        if d == 0 || values.iter().any(|v| v.len() != d) {
            return Err(Error::invalid("path values must share one positive dimension"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("path values must be finite"));
        }
        Ok(Self { knots, values })
    }

    /// f(t) = x t
    pub fn linear(x: Vec<f64>) -> Self {
        let d = x.len();
        Self::new(vec![0.0, 1.0], vec![vec![0.0; d], x]).expect("valid linear path")
    }

    pub fn zero(dim: usize) -> Self {
        Self::linear(vec![0.0; dim])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn starts_at_origin(&self) -> bool {
        self.values[0].iter().all(|&v| v == 0.0)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, 1.0);
        let j = match self.knots.iter().position(|&s| s >= t) {
            Some(0) | None => return self.values[if t <= 0.0 { 0 } else { self.knots.len() - 1 }].clone(),
            Some(j) => j,
        };
        let (s0, s1) = (self.knots[j - 1], self.knots[j]);
        let w = (t - s0) / (s1 - s0);
        self.values[j - 1]
            .iter()
            .zip(&self.values[j])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// `(Δs_j, slope_j)` per linear piece.
    pub fn pieces(&self) -> Vec<(f64, Vec<f64>)> {
        (1..self.knots.len())
            .map(|j| {
                let ds = self.knots[j] - self.knots[j - 1];
                let slope = self.values[j]
                    .iter()
                    .zip(&self.values[j - 1])
                    .map(|(b, a)| (b - a) / ds)
                    .collect();
                (ds, slope)
            })
            .collect()
    }
}

/// A function on [0, 1] that is constant on each of m equal cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("a grid function needs at least one cell"));
        }
        let d = values[0].len();
        if d == 0 || values.iter().any(|v| v.len() != d) {
            return Err(Error::invalid("cell values must share one positive dimension"));
        }
        Ok(Self { values })
    }

    pub fn constant(m: usize, value: Vec<f64>) -> Self {
        Self::new(vec![value; m.max(1)]).expect("valid constant grid function")
    }

    pub fn zero(m: usize, dim: usize) -> Self {
        Self::constant(m, vec![0.0; dim])
    }

    /// Cell averages of a path's derivative: (f(t_j) − f(t_{j−1})) m.
    pub fn derivative_of(path: &PiecewisePath, m: usize) -> Self {
        let mf = m as f64;
        let values = (1..=m)
            .map(|j| {
                let a = path.eval((j - 1) as f64 / mf);
                let b = path.eval(j as f64 / mf);
                b.iter().zip(&a).map(|(y, x)| (y - x) * mf).collect()
            })
            .collect();
        Self { values }
    }

    /// Cell averages of `f` by per-cell quadrature.
    pub fn cell_averages<F: Fn(f64) -> Vec<f64>>(m: usize, dim: usize, f: F) -> Self {
        let mf = m as f64;
        let values = (0..m)
            .map(|j| {
                let (a, b) = (j as f64 / mf, (j + 1) as f64 / mf);
                (0..dim)
                    .map(|c| tanh_sinh(|t| f(t)[c], a, b, 1e-13).value * mf)
                    .collect()
            })
            .collect();
        Self { values }
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn width(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    /// ∫ over cell j.
    pub fn cell_integral(&self, j: usize) -> Vec<f64> {
        let w = self.width();
        self.values[j].iter().map(|v| v * w).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|&v| v == 0.0)
    }
}
