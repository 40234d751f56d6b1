//! Prelimit sums of the scaled log-MGF over coefficient windows and their
//! limits as n grows, for every scenario.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{Compensated, WindowSumTable};
use crate::error::{Error, Result};
use crate::noise::MAX_DIM;
use crate::potential::GaussianPotential;
use crate::rates::{lambda_rl, lambda_rl_potential, PartitionLevels, QuadratureSpec, RateValue};
use crate::scaling::{Scenario, ScenarioTag};

const CHUNK: i64 = 1 << 14;

/// A_n = max(4n, 2^16).
pub fn default_truncation(n: u64) -> i64 {
    (4 * n as i64).max(1 << 16)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrelimitValue {
    pub value: f64,
    /// Leading-order estimate of the mass dropped with |l| > A_n.
    pub tail_bound: f64,
    /// First window index whose argument left the domain of Λ.
    pub infinite_at: Option<i64>,
}

/// (1/b_n) Σ_{|l|≤A_n} Λ((b_n/a_n) Σ_i λ_i φ_{l+[nt_{i−1}], [nt_i]−[nt_{i−1}]}).
///
/// `table` must be built from the scenario's coefficients and cover every
/// window, i.e. radius ≥ A_n + n.
pub fn prelimit_sum(
    s: &Scenario,
    table: &WindowSumTable,
    pl: &PartitionLevels,
    n: u64,
    a_n: i64,
) -> Result<PrelimitValue> {
    let noise = s.noise();
    let d = noise.dim();
    if pl.dim() != d {
        return Err(Error::invalid("level dimension does not match the noise"));
    }
    if table.radius() != s.coeffs().radius() {
        return Err(Error::invalid("window table was built for a different radius"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if a_n < 2 * n as i64 {
        return Err(Error::invalid(format!("A_n = {a_n} must be at least 2n = {}", 2 * n)));
    }
    let nf = n as f64;
    let cuts: Vec<i64> = pl.times().iter().map(|&t| (nf * t).floor() as i64).collect();
    let mut starts = Vec::with_capacity(pl.k());
    let mut lens = Vec::with_capacity(pl.k());
    let mut prev = 0i64;
    for &c in &cuts {
        starts.push(prev);
        lens.push(c - prev);
        prev = c;
    }
    let reach = a_n + prev;
    if reach > table.radius() || -a_n + 1 < -table.radius() {
        return Err(Error::OutOfRange {
            index: reach,
            radius: table.radius(),
            hint: "windows exit the coefficient range; raise A to at least A_n + n".into(),
        });
    }

    let a = s.normalizer(n)?;
    let b = s.speed(n)?;
    let c = b / a;
    let levels = pl.levels();

    let chunk_sum = |lo: i64, hi: i64| -> (Compensated, Option<i64>) {
        let mut acc = Compensated::default();
        let mut arg = [0.0; MAX_DIM];
        for l in lo..hi {
            arg[..d].fill(0.0);
            for i in 0..levels.len() {
                let w = table.window_unchecked(l + starts[i], lens[i]);
                if w == 0.0 {
                    continue;
                }
                for (a, &lam) in arg[..d].iter_mut().zip(&levels[i]) {
                    *a += lam * w;
                }
            }
            for v in &mut arg[..d] {
                *v *= c;
            }
            let v = noise.logmgf(&arg[..d]).unwrap_or(f64::INFINITY);
            if !v.is_finite() {
                return (acc, Some(l));
            }
            acc.add(v);
        }
        (acc, None)
    };

    let first = -a_n;
    let count = 2 * a_n + 1;
    let chunks = (count + CHUNK - 1) / CHUNK;
    let partial: Vec<(Compensated, Option<i64>)> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let lo = first + j * CHUNK;
            chunk_sum(lo, (lo + CHUNK).min(a_n + 1))
        })
        .collect();

    let tail_bound = tail_estimate(s, pl, n, a_n, c, b);
    let mut total = Compensated::default();
    for (acc, bad) in &partial {
        if let Some(l) = bad {
            return Ok(PrelimitValue {
                value: f64::INFINITY,
                tail_bound,
                infinite_at: Some(*l),
            });
        }
        total.add(acc.value());
    }
    Ok(PrelimitValue {
        value: total.value() / b,
        tail_bound,
        infinite_at: None,
    })
}

// Quadratic leading order Λ(u) ≈ ½u·Σu applied to the windows beyond A_n.
fn tail_estimate(s: &Scenario, pl: &PartitionLevels, n: u64, a_n: i64, c: f64, b: f64) -> f64 {
    let cov = s.noise().covariance();
    let trace: f64 = (0..cov.dim()).map(|i| cov.entry(i, i)).sum();
    let lam: f64 = pl
        .levels()
        .iter()
        .map(|l| l.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    let cutoff = (a_n - n as i64).max(1);
    let squares = match s.coeffs().with_radius(cutoff) {
        Ok(m) => m.square_tail_bound(n),
        Err(_) => f64::INFINITY,
    };
    0.5 * trace * (c * lam).powi(2) * squares / b
}

/// The limit of the prelimit sum for the scenario's tag.
pub fn prelimit_limit(s: &Scenario, pl: &PartitionLevels, spec: &QuadratureSpec) -> Result<RateValue> {
    let noise = s.noise();
    let (alpha, p) = match s.coeffs().long_params() {
        Ok((alpha, p, _)) => (alpha, p),
        Err(_) => (1.0, 1.0),
    };
    let rv = || {
        s.lambda_rv()
            .ok_or_else(|| Error::Scenario("regular-variation data missing".into()))
    };
    let gauss = GaussianPotential::new(noise.covariance());
    match s.tag() {
        ScenarioTag::S1 | ScenarioTag::S2 => lambda_rl_potential(noise, 1.0, 1.0, pl, spec),
        ScenarioTag::S3 => lambda_rl_potential(&gauss, 1.0, 1.0, pl, spec),
        ScenarioTag::S4 => lambda_rl_potential(rv()?, 1.0, 1.0, pl, spec),
        ScenarioTag::R1 | ScenarioTag::R2 => lambda_rl(noise, alpha, p, pl, spec),
        ScenarioTag::R3 => lambda_rl_potential(&gauss, alpha, p, pl, spec),
        ScenarioTag::R4 => lambda_rl_potential(rv()?, alpha, p, pl, spec),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrelimitReport {
    pub tag: ScenarioTag,
    pub n: Vec<u64>,
    pub truncation: Vec<i64>,
    pub prelimit: Vec<f64>,
    pub tail_bound: Vec<f64>,
    pub limit: f64,
    pub limit_imprecise: bool,
    pub rel_error: Vec<f64>,
    /// c in |error| ~ n^{-c}, least squares over the last four points.
    pub exponent: Option<f64>,
}

impl PrelimitReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,A_n,prelimit,limit,rel_error,tail_bound")?;
        for j in 0..self.n.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.n[j], self.truncation[j], self.prelimit[j], self.limit, self.rel_error[j], self.tail_bound[j]
            )?;
        }
        Ok(())
    }
}

/// Runs `prelimit_sum` over `grid` (A_n fixed when `truncation` is given,
/// otherwise the default) and compares with `prelimit_limit`.
pub fn convergence_report(
    s: &Scenario,
    pl: &PartitionLevels,
    grid: &[u64],
    truncation: Option<i64>,
    spec: &QuadratureSpec,
) -> Result<PrelimitReport> {
    if grid.is_empty() {
        return Err(Error::invalid("empty n-grid"));
    }
    let limit = prelimit_limit(s, pl, spec)?;
    let table = WindowSumTable::new(s.coeffs());
    let mut report = PrelimitReport {
        tag: s.tag(),
        n: Vec::new(),
        truncation: Vec::new(),
        prelimit: Vec::new(),
        tail_bound: Vec::new(),
        limit: limit.value,
        limit_imprecise: limit.imprecise,
        rel_error: Vec::new(),
        exponent: None,
    };
    for &n in grid {
        let a_n = truncation.unwrap_or_else(|| default_truncation(n));
        let v = prelimit_sum(s, &table, pl, n, a_n)?;
        let err = if limit.value == 0.0 {
            (v.value - limit.value).abs()
        } else {
            ((v.value - limit.value) / limit.value).abs()
        };
        report.n.push(n);
        report.truncation.push(a_n);
        report.prelimit.push(v.value);
        report.tail_bound.push(v.tail_bound);
        report.rel_error.push(err);
    }
    report.exponent = fit_exponent(&report.n, &report.rel_error);
    Ok(report)
}

pub(crate) fn fit_exponent(n: &[u64], err: &[f64]) -> Option<f64> {
    let start = n.len().saturating_sub(4);
    let pts: Vec<(f64, f64)> = n[start..]
        .iter()
        .zip(&err[start..])
        .filter(|(_, e)| e.is_finite() && **e > 0.0)
        .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
        .collect();
    least_squares_slope(&pts).map(|s| -s)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientModel, Generator, SlowlyVarying};
    use crate::noise::NoiseModel;
    use crate::scaling::LambdaRV;

    fn geometric(radius: i64) -> CoefficientModel {
        CoefficientModel::short_memory(Generator::Geometric { rho: 0.5 }, radius).unwrap()
    }

    fn long(radius: i64) -> CoefficientModel {
        CoefficientModel::long_memory(0.75, 1.0, SlowlyVarying::None, radius).unwrap()
    }

    #[test]
    fn zero_levels_give_zero() {
        let s = Scenario::standard(ScenarioTag::S1, NoiseModel::gaussian(1.0), geometric(1 << 17)).unwrap();
        let t = WindowSumTable::new(s.coeffs());
        let pl = PartitionLevels::single(vec![0.0]);
        for n in [1u64, 7, 1024] {
            let v = prelimit_sum(&s, &t, &pl, n, 1 << 16).unwrap();
            assert_eq!(v.value, 0.0);
        }
    }

    #[test]
    fn short_memory_gaussian_near_marginal() {
        let n = 1u64 << 12;
        let a_n = 1i64 << 16;
        let s = Scenario::standard(ScenarioTag::S1, NoiseModel::gaussian(1.0), geometric(a_n + n as i64)).unwrap();
        let t = WindowSumTable::new(s.coeffs());
        let v = prelimit_sum(&s, &t, &PartitionLevels::single(vec![1.0]), n, a_n).unwrap();
        assert!((v.value - 0.5).abs() < 0.01 * 0.5, "{}", v.value);
    }

    #[test]
    fn windows_must_fit() {
        let s = Scenario::standard(ScenarioTag::S1, NoiseModel::gaussian(1.0), geometric(1 << 16)).unwrap();
        let t = WindowSumTable::new(s.coeffs());
        let err = prelimit_sum(&s, &t, &PartitionLevels::single(vec![1.0]), 64, 1 << 16).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { .. }));
        let err = prelimit_sum(&s, &t, &PartitionLevels::single(vec![1.0]), 64, 100).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn quadratic_prelimit_is_square_sum() {
        let n = 256u64;
        let a_n = 4096i64;
        let coeffs = long(a_n + n as i64);
        let s = Scenario::with_exponents(ScenarioTag::R3, NoiseModel::gaussian(1.0), coeffs.clone(), 0.9, 0.0, None)
            .unwrap();
        let t = WindowSumTable::new(&coeffs);
        let lam = 1.7;
        let v = prelimit_sum(&s, &t, &PartitionLevels::single(vec![lam]), n, a_n).unwrap();
        // direct φ_{l,n} by naive summation
        let mut sq = 0.0;
        for l in -a_n..=a_n {
            let w: f64 = (l + 1..=l + n as i64).map(|i| coeffs.phi_untruncated(i)).sum();
            sq += w * w;
        }
        let psi = coeffs.psi_partial(n).unwrap();
        let direct = 0.5 * lam * lam * sq / (n as f64 * psi * psi);
        assert!((v.value - direct).abs() <= 1e-12 * direct, "{} vs {direct}", v.value);
    }

    #[test]
    fn laplace_flags_first_bad_window() {
        let s = Scenario::standard(ScenarioTag::S1, NoiseModel::laplace(1.0), geometric(1 << 17)).unwrap();
        let t = WindowSumTable::new(s.coeffs());
        let v = prelimit_sum(&s, &t, &PartitionLevels::single(vec![1.5]), 64, 1 << 16).unwrap();
        assert_eq!(v.value, f64::INFINITY);
        let l = v.infinite_at.unwrap();
        assert!((-64..64).contains(&l), "{l}");
    }

    #[test]
    fn doubling_truncation_within_tail_bound() {
        let n = 512u64;
        let coeffs = long((1 << 18) + n as i64);
        let s = Scenario::standard(ScenarioTag::R1, NoiseModel::gaussian(1.0), coeffs).unwrap();
        let t = WindowSumTable::new(s.coeffs());
        let pl = PartitionLevels::single(vec![1.0]);
        let small = prelimit_sum(&s, &t, &pl, n, 1 << 17).unwrap();
        let big = prelimit_sum(&s, &t, &pl, n, 1 << 18).unwrap();
        let change = big.value - small.value;
        assert!(change >= 0.0 && change < small.tail_bound, "{change} {}", small.tail_bound);
    }

    #[test]
    fn limits_by_tag() {
        let spec = QuadratureSpec::default();
        let pl = PartitionLevels::new(vec![0.5, 1.0], vec![vec![1.0], vec![-1.0]]).unwrap();
        let s = Scenario::standard(ScenarioTag::S2, NoiseModel::rademacher(), geometric(100)).unwrap();
        let v = prelimit_limit(&s, &pl, &spec).unwrap().value;
        assert!((v - 1.0f64.cosh().ln()).abs() < 1e-15);
        let s3 = Scenario::with_exponents(ScenarioTag::S3, NoiseModel::rademacher(), geometric(100), 0.75, 0.0, None)
            .unwrap();
        assert!((prelimit_limit(&s3, &pl, &spec).unwrap().value - 0.5).abs() < 1e-15);
        let s4 = Scenario::with_exponents(
            ScenarioTag::S4,
            NoiseModel::gaussian(2.0),
            geometric(100),
            1.5,
            0.0,
            Some(LambdaRV::power(2.0, 1.0, 1).unwrap()),
        )
        .unwrap();
        assert!((prelimit_limit(&s4, &pl, &spec).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn s2_errors_decrease() {
        let s = Scenario::standard(ScenarioTag::S2, NoiseModel::rademacher(), geometric((1 << 15) + (1 << 13))).unwrap();
        let pl = PartitionLevels::new(vec![0.5, 1.0], vec![vec![0.8], vec![-0.4]]).unwrap();
        let grid: Vec<u64> = (8..=13).map(|k| 1u64 << k).collect();
        let r = convergence_report(&s, &pl, &grid, Some(1 << 15), &QuadratureSpec::default()).unwrap();
        let inversions = r.rel_error.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "{:?}", r.rel_error);
        assert!(r.exponent.unwrap() > 0.5);
    }

    #[test]
    fn slope_fit_recovers_power() {
        let n: Vec<u64> = (4..10).map(|k| 1u64 << k).collect();
        let e: Vec<f64> = n.iter().map(|&n| 3.0 / n as f64).collect();
        assert!((fit_exponent(&n, &e).unwrap() - 1.0).abs() < 1e-12);
    }
}
