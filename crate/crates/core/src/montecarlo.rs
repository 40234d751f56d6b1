//! Simulation of the truncated moving average, tail probabilities of
//! S_n/a_n (direct, exponentially tilted, exact Gaussian) and speed scans.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::coefficients::{Compensated, WindowSumTable};
use crate::error::{Error, Result};
use crate::limits::least_squares_slope;
use crate::noise::{DomainQuery, NoiseModel};
use crate::potential::Potential;
use crate::rng::StreamRng;
use crate::scaling::Scenario;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone)]
pub struct SimConfig {
    scenario: Scenario,
    n: u64,
    truncation: i64,
    replications: u64,
    tilt: Option<f64>,
    seed: u64,
}

impl SimConfig {
    /// `truncation` is M: innovations Z_{−M..n+M} are drawn, so M must be at
    /// least the coefficient radius.
    pub fn new(scenario: Scenario, n: u64, truncation: i64, replications: u64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        let a = scenario.coeffs().radius();
        if truncation < a {
            return Err(Error::Config(format!(
                "innovation range M = {truncation} does not cover the coefficient radius A = {a}"
            )));
        }
        Ok(Self {
            scenario,
            n,
            truncation,
            replications,
            tilt: None,
            seed,
        })
    }

    pub fn with_tilt(mut self, theta: Option<f64>) -> Self {
        self.tilt = theta;
        self
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(self.scenario.clone(), n, self.truncation, self.replications, self.seed)
            .map(|c| c.with_tilt(self.tilt))
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn truncation(&self) -> i64 {
        self.truncation
    }

    pub fn replications(&self) -> u64 {
        self.replications
    }

    pub fn tilt(&self) -> Option<f64> {
        self.tilt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn innovations(&self) -> usize {
        (self.n as i64 + 2 * self.truncation + 1) as usize
    }
}

/// Partial sums S_0..S_n of one replicate; Y_n(t) = S_[nt]/a_n and its
/// polygonal interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    n: u64,
    dim: usize,
    a_n: f64,
    partial: Vec<f64>,
}

impl SamplePath {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn normalizer(&self) -> f64 {
        self.a_n
    }

    /// S_k, k = 0..=n.
    pub fn partial_sum(&self, k: usize) -> &[f64] {
        &self.partial[k * self.dim..(k + 1) * self.dim]
    }

    /// X_k = S_k − S_{k−1}, k = 1..=n.
    pub fn increments(&self) -> Vec<Vec<f64>> {
        (1..=self.n as usize)
            .map(|k| {
                let (a, b) = (self.partial_sum(k - 1), self.partial_sum(k));
                b.iter().zip(a).map(|(b, a)| b - a).collect()
            })
            .collect()
    }

    pub fn step(&self, t: f64) -> Vec<f64> {
        let k = ((self.n as f64 * t.clamp(0.0, 1.0)).floor() as usize).min(self.n as usize);
        self.partial_sum(k).iter().map(|v| v / self.a_n).collect()
    }

    pub fn polygonal(&self, t: f64) -> Vec<f64> {
        let x = self.n as f64 * t.clamp(0.0, 1.0);
        let k = (x.floor() as usize).min(self.n as usize);
        if k == self.n as usize {
            return self.step(1.0);
        }
        let frac = x - k as f64;
        let (a, b) = (self.partial_sum(k), self.partial_sum(k + 1));
        a.iter()
            .zip(b)
            .map(|(a, b)| (a + frac * (b - a)) / self.a_n)
            .collect()
    }
}

/// Builds the path from an explicit innovation block Z_{−M..=n+M}, stored
/// row-major with `dim` entries per innovation.
pub fn path_from_innovations(cfg: &SimConfig, z: &[f64]) -> Result<SamplePath> {
    let s = cfg.scenario();
    let d = s.noise().dim();
    if z.len() != cfg.innovations() * d {
        return Err(Error::Config(format!(
            "innovation block has {} entries, expected {}",
            z.len(),
            cfg.innovations() * d
        )));
    }
    let coeffs = s.coeffs();
    let a = coeffs.radius();
    let m = cfg.truncation;
    let phi: Vec<f64> = (-a..=a).map(|i| coeffs.phi_untruncated(i)).collect();
    let n = cfg.n as usize;
    let mut partial = vec![0.0; (n + 1) * d];
    let mut x = vec![0.0; d];
    for k in 1..=n as i64 {
        x.fill(0.0);
        // X_k = Σ_{|i|≤A} φ_i Z_{k−i}; Z_j sits at offset j + M
        for (idx, &f) in phi.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            let i = idx as i64 - a;
            let slot = (k - i + m) as usize * d;
            for (xv, zv) in x.iter_mut().zip(&z[slot..slot + d]) {
                *xv += f * zv;
            }
        }
        let (prev, cur) = partial.split_at_mut(k as usize * d);
        for c in 0..d {
            cur[c] = prev[(k as usize - 1) * d + c] + x[c];
        }
    }
    Ok(SamplePath {
        n: cfg.n,
        dim: d,
        a_n: s.normalizer(cfg.n)?,
        partial,
    })
}

pub fn draw_innovations(cfg: &SimConfig, replicate: u64) -> Vec<f64> {
    let noise = cfg.scenario().noise();
    let d = noise.dim();
    let mut rng = StreamRng::new(cfg.seed, replicate);
    let mut z = vec![0.0; cfg.innovations() * d];
    for chunk in z.chunks_mut(d) {
        noise.sample_one(&mut rng, chunk);
    }
    z
}

/// One replicate; deterministic in `(seed, replicate)`.
pub fn simulate_path(cfg: &SimConfig, replicate: u64) -> Result<SamplePath> {
    path_from_innovations(cfg, &draw_innovations(cfg, replicate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    Direct,
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    Direct,
    Tilted,
    ExactGaussian,
}

/// Estimate of P(S_n/a_n ≥ x).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub level: f64,
    pub n: u64,
    pub a_n: f64,
    pub estimate: f64,
    pub log_estimate: f64,
    pub ci: [f64; 2],
    pub ess: Option<f64>,
    pub replications: u64,
    pub method: MethodTag,
    pub theta: Option<f64>,
}

impl TailEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci[1] - self.ci[0])
    }

    pub fn covers(&self, p: f64) -> bool {
        self.ci[0] <= p && p <= self.ci[1]
    }
}

/// ln Q(z) for the standard normal upper tail; continued fraction for the
/// Mills ratio beyond z = 5.
pub fn log_normal_tail(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z <= 5.0 {
        return (0.5 * erfc(z / SQRT_2)).ln();
    }
    let mut f = z;
    for k in (1..=120).rev() {
        f = z + k as f64 / f;
    }
    -0.5 * z * z - 0.5 * (2.0 * PI).ln() - f.ln()
}

fn gaussian_variance(noise: &NoiseModel) -> Result<f64> {
    if !noise.is_gaussian() || noise.dim() != 1 {
        return Err(Error::OracleUnavailable(
            "the exact tail needs one-dimensional Gaussian noise".into(),
        ));
    }
    Ok(noise.covariance().entry(0, 0))
}

/// Var(S_n) = Σ_l φ_{l,n}² over the truncated coefficients plus the
/// analytic tail bound, times the innovation variance.
pub fn exact_variance(s: &Scenario, n: u64) -> Result<f64> {
    let v0 = gaussian_variance(s.noise())?;
    let c = s.coeffs();
    Ok(v0 * (c.truncated_square_sum(n) + c.square_tail_bound(n)))
}

/// P(S_n/a_n ≥ x) = Q(x a_n / √v_n).
pub fn exact_gaussian_tail(s: &Scenario, n: u64, x: f64) -> Result<TailEstimate> {
    let v = exact_variance(s, n)?;
    let a_n = s.normalizer(n)?;
    let lp = log_normal_tail(x * a_n / v.sqrt());
    let p = lp.exp();
    Ok(TailEstimate {
        level: x,
        n,
        a_n,
        estimate: p,
        log_estimate: lp,
        ci: [p, p],
        ess: None,
        replications: 0,
        method: MethodTag::ExactGaussian,
        theta: None,
    })
}

/// Weights w_j with S_n = Σ_j w_j Z_j, j = −M..=n+M (zero outside the
/// coefficient range).
fn sum_weights(cfg: &SimConfig) -> Vec<f64> {
    let table = WindowSumTable::new(cfg.scenario().coeffs());
    let m = cfg.truncation;
    let n = cfg.n as i64;
    (-m..=n + m).map(|j| table.window_sum_clamped(-j, n)).collect()
}

fn wilson(hits: u64, r: u64) -> [f64; 2] {
    let r = r as f64;
    let p = hits as f64 / r;
    let z2 = Z95 * Z95;
    let den = 1.0 + z2 / r;
    let centre = (p + z2 / (2.0 * r)) / den;
    let half = Z95 * (p * (1.0 - p) / r + z2 / (4.0 * r * r)).sqrt() / den;
    [(centre - half).max(0.0), (centre + half).min(1.0)]
}

/// Σ_j w_j Λ'(θ w_j), the tilted mean of S_n.
fn tilted_mean(noise: &NoiseModel, w: &[f64], theta: f64) -> f64 {
    let mut acc = Compensated::default();
    let mut g = [0.0];
    for &wj in w {
        if wj != 0.0 {
            noise.gradient(&[theta * wj], &mut g);
            acc.add(wj * g[0]);
        }
    }
    acc.value()
}

fn tilt_admissible(noise: &NoiseModel, w: &[f64], theta: f64) -> bool {
    w.iter()
        .all(|&wj| noise.domain(&[theta * wj]) == DomainQuery::Interior)
}

/// θ ≥ 0 with tilted mean of S_n equal to `target`, by bisection.
fn solve_tilt(noise: &NoiseModel, w: &[f64], target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if wmax == 0.0 {
        return Err(Error::TiltInfeasible("S_n is identically zero".into()));
    }
    let f = |t: f64| tilted_mean(noise, w, t) - target;
    let mut lo = 0.0;
    let mut hi = 1.0 / wmax;
    let mut steps = 0;
    loop {
        if !tilt_admissible(noise, w, hi) {
            // shrink toward the domain boundary from inside
            hi = lo + 0.5 * (hi - lo);
            steps += 1;
        } else if f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            steps += 1;
        } else {
            break;
        }
        if steps > 400 || hi - lo <= 1e-15 * hi {
            return Err(Error::TiltInfeasible(format!(
                "no admissible tilt reaches mean {target}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Estimates P(S_n/a_n ≥ x) from `cfg.replications()` replicates. Tilted
/// uses Z_j ↦ law tilted by θ w_j with log-weight Σ_j [Λ(θ w_j) − θ w_j Z_j];
/// θ is `cfg.tilt()` or solved so that the tilted mean of S_n/a_n is x.
pub fn estimate_tail(cfg: &SimConfig, x: f64, method: TailMethod) -> Result<TailEstimate> {
    let s = cfg.scenario();
    let noise = s.noise();
    if noise.dim() != 1 {
        return Err(Error::invalid("tail estimation is one-dimensional"));
    }
    let a_n = s.normalizer(cfg.n)?;
    let threshold = x * a_n;
    let w = sum_weights(cfg);
    let r = cfg.replications;
    match method {
        TailMethod::Direct => {
            let hits: Vec<bool> = (0..r)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = StreamRng::new(cfg.seed, rep);
                    let mut acc = Compensated::default();
                    let mut z = [0.0];
                    for &wj in &w {
                        noise.sample_one(&mut rng, &mut z);
                        acc.add(wj * z[0]);
                    }
                    acc.value() >= threshold
                })
                .collect();
            let k = hits.iter().filter(|h| **h).count() as u64;
            let p = k as f64 / r as f64;
            Ok(TailEstimate {
                level: x,
                n: cfg.n,
                a_n,
                estimate: p,
                log_estimate: p.ln(),
                ci: wilson(k, r),
                ess: Some(r as f64),
                replications: r,
                method: MethodTag::Direct,
                theta: None,
            })
        }
        TailMethod::Tilted => {
            let theta = match cfg.tilt {
                Some(t) => t,
                None => solve_tilt(noise, &w, threshold)?,
            };
            if !theta.is_finite() || !tilt_admissible(noise, &w, theta) {
                return Err(Error::TiltInfeasible(format!(
                    "θ = {theta} pushes an innovation tilt outside the domain"
                )));
            }
            let shift: f64 = {
                let mut acc = Compensated::default();
                for &wj in &w {
                    if wj != 0.0 {
                        acc.add(noise.value(&[theta * wj]));
                    }
                }
                acc.value()
            };
            let contrib: Vec<f64> = (0..r)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = StreamRng::new(cfg.seed, rep);
                    let mut sum = Compensated::default();
                    let mut lin = Compensated::default();
                    for &wj in &w {
                        let zj = noise.sample_tilted_scalar(theta * wj, &mut rng);
                        sum.add(wj * zj);
                        lin.add(theta * wj * zj);
                    }
                    if sum.value() >= threshold {
                        (shift - lin.value()).exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(summarize(x, cfg.n, a_n, r, theta, &contrib))
        }
    }
}

fn summarize(x: f64, n: u64, a_n: f64, r: u64, theta: f64, contrib: &[f64]) -> TailEstimate {
    let rf = r as f64;
    let mut s1 = Compensated::default();
    let mut s2 = Compensated::default();
    for &c in contrib {
        s1.add(c);
        s2.add(c * c);
    }
    let mean = s1.value() / rf;
    let var = if r > 1 {
        ((s2.value() - rf * mean * mean) / (rf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let half = Z95 * (var / rf).sqrt();
    let ess = if s2.value() > 0.0 {
        s1.value() * s1.value() / s2.value()
    } else {
        0.0
    };
    TailEstimate {
        level: x,
        n,
        a_n,
        estimate: mean.min(1.0),
        log_estimate: mean.min(1.0).ln(),
        ci: [(mean - half).max(0.0), (mean + half).min(1.0)],
        ess: Some(ess),
        replications: r,
        method: MethodTag::Tilted,
        theta: Some(theta),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedRow {
    pub n: u64,
    pub neg_log_p: f64,
    pub speed: f64,
    pub ratio: f64,
    pub method: MethodTag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedScan {
    pub level: f64,
    pub rows: Vec<SpeedRow>,
    /// Least-squares slope of ln(−ln P) against ln n.
    pub slope: Option<f64>,
}

impl SpeedScan {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,neg_log_p,b_n,ratio")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.n, r.neg_log_p, r.speed, r.ratio)?;
        }
        Ok(())
    }
}

/// −ln P(S_n/a_n ≥ x) over `grid`, exact for Gaussian noise and tilted
/// otherwise, divided by the scenario speed b_n.
pub fn speed_scan(template: &SimConfig, grid: &[u64], x: f64) -> Result<SpeedScan> {
    let s = template.scenario();
    let exact = s.noise().is_gaussian() && s.noise().dim() == 1;
    let mut rows = Vec::with_capacity(grid.len());
    for &n in grid {
        let est = if exact {
            exact_gaussian_tail(s, n, x)?
        } else {
            estimate_tail(&template.with_n(n)?, x, TailMethod::Tilted)?
        };
        let speed = s.speed(n)?;
        let neg = -est.log_estimate;
        rows.push(SpeedRow {
            n,
            neg_log_p: neg,
            speed,
            ratio: neg / speed,
            method: est.method,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.neg_log_p.is_finite() && r.neg_log_p > 0.0)
        .map(|r| ((r.n as f64).ln(), r.neg_log_p.ln()))
        .collect();
    Ok(SpeedScan {
        level: x,
        rows,
        slope: least_squares_slope(&pts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientModel, Generator, SlowlyVarying};
    use crate::scaling::ScenarioTag;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn identity_scenario(noise: NoiseModel) -> Scenario {
        Scenario::standard(ScenarioTag::S1, noise, CoefficientModel::identity(0)).unwrap()
    }

    #[test]
    fn identity_filter_path_is_partial_sums() {
        let s = identity_scenario(NoiseModel::gaussian(1.0));
        let cfg = SimConfig::new(s, 4, 0, 1, 7).unwrap();
        let z = draw_innovations(&cfg, 0);
        let path = simulate_path(&cfg, 0).unwrap();
        let x = path.increments();
        for k in 0..4 {
            assert_eq!(x[k][0], z[k + 1]);
        }
        let total: f64 = z[1..5].iter().sum();
        assert!((path.step(1.0)[0] - total / 4.0).abs() < 1e-15);
    }

    #[test]
    fn zero_innovations_give_zero_path() {
        let coeffs = CoefficientModel::long_memory(0.75, 0.6, SlowlyVarying::None, 16).unwrap();
        let s = Scenario::standard(ScenarioTag::R1, NoiseModel::gaussian(1.0), coeffs).unwrap();
        let cfg = SimConfig::new(s, 8, 20, 1, 0).unwrap();
        let path = path_from_innovations(&cfg, &vec![0.0; 8 + 41]).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(path.step(t), vec![0.0]);
            assert_eq!(path.polygonal(t), vec![0.0]);
        }
    }

    #[test]
    fn truncation_must_cover_radius() {
        let s = Scenario::standard(
            ScenarioTag::S1,
            NoiseModel::gaussian(1.0),
            CoefficientModel::short_memory(Generator::Geometric { rho: 0.5 }, 10).unwrap(),
        )
        .unwrap();
        assert!(matches!(SimConfig::new(s, 8, 9, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn path_and_weights_agree() {
        let coeffs = CoefficientModel::long_memory(0.75, 0.7, SlowlyVarying::None, 12).unwrap();
        let s = Scenario::standard(ScenarioTag::R1, NoiseModel::gaussian(1.0), coeffs).unwrap();
        let cfg = SimConfig::new(s, 10, 15, 1, 3).unwrap();
        let z = draw_innovations(&cfg, 0);
        let path = path_from_innovations(&cfg, &z).unwrap();
        let w = sum_weights(&cfg);
        let direct: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
        assert!((path.partial_sum(10)[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn long_memory_sample_variance() {
        let n = 32;
        let coeffs = CoefficientModel::long_memory(0.75, 1.0, SlowlyVarying::None, 128).unwrap();
        let exact = coeffs.truncated_square_sum(n);
        let s = Scenario::standard(ScenarioTag::R1, NoiseModel::gaussian(1.0), coeffs).unwrap();
        let cfg = SimConfig::new(s, n, 128, 10_000, 11).unwrap();
        let sums: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|r| simulate_path(&cfg, r).unwrap().partial_sum(n as usize)[0])
            .collect();
        let m = sums.iter().sum::<f64>() / sums.len() as f64;
        let var = sums.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (sums.len() - 1) as f64;
        assert!((var / exact - 1.0).abs() < 0.05, "{var} vs {exact}");
    }

    #[test]
    fn log_tail_matches_normal_cdf() {
        let norm = Normal::standard();
        for z in [-3.0, 0.0, 1.0, 3.0, 4.9, 5.0, 5.1, 7.0, 9.0] {
            let reference = norm.sf(z).ln();
            assert!((log_normal_tail(z) - reference).abs() < 1e-9 * reference.abs().max(1.0), "{z}");
        }
        assert!((log_normal_tail(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // the continued fraction keeps going where the tail underflows
        let big = log_normal_tail(100.0);
        let asym = -5000.0 - (100.0 * (2.0 * PI).sqrt()).ln() + (1.0 - 1e-4 + 3e-8f64).ln();
        assert!((big - asym).abs() < 1e-9);
    }

    #[test]
    fn exact_tail_examples() {
        let s = identity_scenario(NoiseModel::gaussian(1.0));
        assert!((exact_gaussian_tail(&s, 100, 0.0).unwrap().estimate - 0.5).abs() < 1e-15);
        let q3 = exact_gaussian_tail(&s, 100, 0.3).unwrap().estimate;
        assert!((q3 - 1.349_898e-3).abs() < 1e-8, "{q3}");
        let lap = identity_scenario(NoiseModel::laplace(1.0));
        assert!(matches!(exact_gaussian_tail(&lap, 10, 0.1), Err(Error::OracleUnavailable(_))));
    }

    #[test]
    fn full_event_estimates_one() {
        let s = identity_scenario(NoiseModel::rademacher());
        let cfg = SimConfig::new(s, 20, 0, 2000, 5).unwrap();
        for m in [TailMethod::Direct, TailMethod::Tilted] {
            let e = estimate_tail(&cfg, -1e6, m).unwrap();
            assert_eq!(e.estimate, 1.0);
        }
    }

    #[test]
    fn tilted_gaussian_against_exact() {
        let coeffs = CoefficientModel::short_memory(Generator::Geometric { rho: 0.5 }, 48).unwrap();
        let s = Scenario::standard(ScenarioTag::S1, NoiseModel::gaussian(1.0), coeffs).unwrap();
        let exact = exact_gaussian_tail(&s, 64, 0.5).unwrap().estimate;
        let cfg = SimConfig::new(s, 64, 48, 20_000, 9).unwrap();
        let e = estimate_tail(&cfg, 0.5, TailMethod::Tilted).unwrap();
        assert!((e.estimate - exact).abs() < 3.0 * e.half_width(), "{} vs {exact}", e.estimate);
        assert!(e.ess.unwrap() > 1000.0);
    }

    #[test]
    fn auto_tilt_matches_level() {
        let s = identity_scenario(NoiseModel::rademacher());
        let cfg = SimConfig::new(s, 20, 0, 1, 0).unwrap();
        let w = sum_weights(&cfg);
        let t = solve_tilt(cfg.scenario().noise(), &w, 10.0).unwrap();
        assert!((t - 0.5f64.atanh()).abs() < 1e-12);
        assert!(matches!(
            solve_tilt(cfg.scenario().noise(), &w, 25.0),
            Err(Error::TiltInfeasible(_))
        ));
    }

    #[test]
    fn laplace_explicit_tilt_out_of_domain() {
        let s = identity_scenario(NoiseModel::laplace(1.0));
        let cfg = SimConfig::new(s, 10, 0, 10, 0).unwrap().with_tilt(Some(1.5));
        assert!(matches!(
            estimate_tail(&cfg, 0.5, TailMethod::Tilted),
            Err(Error::TiltInfeasible(_))
        ));
    }

    #[test]
    fn same_estimates_across_thread_counts() {
        let coeffs = CoefficientModel::long_memory(0.8, 0.5, SlowlyVarying::None, 64).unwrap();
        let s = Scenario::standard(ScenarioTag::R1, NoiseModel::laplace(0.5), coeffs).unwrap();
        let cfg = SimConfig::new(s, 32, 64, 3000, 21).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        estimate_tail(&cfg, 0.3, TailMethod::Direct).unwrap(),
                        estimate_tail(&cfg, 0.3, TailMethod::Tilted).unwrap(),
                    )
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn short_memory_speed_ratio() {
        let coeffs = CoefficientModel::short_memory(Generator::Geometric { rho: 0.5 }, 256).unwrap();
        let s = Scenario::standard(ScenarioTag::S1, NoiseModel::gaussian(1.0), coeffs).unwrap();
        let cfg = SimConfig::new(s, 1, 256, 1, 0).unwrap();
        let grid: Vec<u64> = (8..=14).map(|k| 1u64 << k).collect();
        let scan = speed_scan(&cfg, &grid, 0.5).unwrap();
        let last = scan.rows.last().unwrap().ratio;
        assert!((last - 0.125).abs() < 0.01 * 0.125, "{last}");
        let slope = scan.slope.unwrap();
        // the prefactor of the Gaussian tail bends the log-log line slightly
        assert!(slope < 1.0 && slope > 0.97, "{slope}");
    }
}
