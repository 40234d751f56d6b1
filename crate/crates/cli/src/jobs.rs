//! Job descriptions (one JSON schema per command) and their execution.

use std::fmt::Write as _;

use anyhow::Result;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ldp_core::config::{
    check_version, parse_json, CoefficientConfig, LevelsConfig, NoiseConfig, PathConfig, ScenarioConfig,
    SCHEMA_VERSION,
};
use ldp_core::limits::convergence_report;
use ldp_core::linalg::SymPsd;
use ldp_core::montecarlo::{estimate_tail, exact_gaussian_tail, simulate_path, speed_scan, TailEstimate};
use ldp_core::rates::{
    conjugate_rl, finite_dim_rate, gaussian_rate_alpha, path_rate, pi_membership, GaussianMode, GridFunction,
    Limit, QuadratureSpec, RateValue,
};
use ldp_core::{limits, SimConfig, TailMethod};

use crate::{Artifacts, Command, Invalid};

fn default_cells() -> usize {
    256
}

fn default_replications() -> u64 {
    10_000
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEvalJob {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    /// Evaluate the limiting log-MGF functional at these levels ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<LevelsConfig>,
    /// ... or the path rate of this path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathConfig>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateJob {
    pub schema_version: u32,
    pub noise: NoiseConfig,
    /// Long-memory coefficients select the conjugate of Λ^rl; otherwise the
    /// finite-dimensional short-memory rate is evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientConfig>,
    pub times: Vec<f64>,
    pub increments: Vec<Vec<f64>>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussRateJob {
    pub schema_version: u32,
    pub covariance: Vec<Vec<f64>>,
    pub alpha: f64,
    #[serde(default = "one")]
    pub p: f64,
    /// Cell values of φ on a uniform grid of [0, 1] ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<Vec<f64>>>,
    /// ... or a path whose derivative is averaged over `cells` cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathConfig>,
    #[serde(default = "default_cells")]
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyLimitsJob {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub levels: LevelsConfig,
    pub grid: Vec<u64>,
    /// Fixed A_n; the default is max(4n, 2^16).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<i64>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJob {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub n: u64,
    /// Innovation range M; defaults to the coefficient radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<i64>,
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    /// Evaluation points t = j/points; defaults to min(n, 256).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    Direct,
    Tilted,
    Exact,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailJob {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub n: u64,
    pub level: f64,
    pub method: TailMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<i64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedScanJob {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub grid: Vec<u64>,
    pub level: f64,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<i64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiCheckJob {
    pub schema_version: u32,
    pub noise: NoiseConfig,
    pub coefficients: CoefficientConfig,
    pub levels: LevelsConfig,
    pub n_max: u64,
    pub j_max: i64,
}

fn load<T: DeserializeOwned>(text: &str, version: impl Fn(&T) -> u32) -> Result<T> {
    let job: T = parse_json(text)?;
    check_version(version(&job))?;
    Ok(job)
}

fn summary<C: Serialize>(command: Command, config: &C, result: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "config": config,
        "result": result,
    })
}

fn rate_json(v: &RateValue) -> Value {
    serde_json::to_value(v).expect("rate values serialize")
}

pub fn dispatch(command: Command, text: &str, seed: Option<u64>, verbose: u8) -> Result<Artifacts> {
    let log = |msg: &str| {
        if verbose > 0 {
            eprintln!("[{}] {msg}", command.name());
        }
    };
    match command {
        Command::RateEval => {
            let job: RateEvalJob = load(text, |j: &RateEvalJob| j.schema_version)?;
            let s = job.scenario.build()?;
            let (kind, v) = match (&job.levels, &job.path) {
                (Some(l), None) => ("levels", limits::prelimit_limit(&s, &l.build()?, &job.quadrature)?),
                (None, Some(p)) => ("path", path_rate(&s, &p.build()?, job.cells, &job.quadrature)?),
                _ => return Err(Invalid("rate-eval needs exactly one of `levels` or `path`".into()).into()),
            };
            log(&format!("{kind} value {}", v.value));
            let mut result = rate_json(&v);
            result["kind"] = json!(kind);
            Ok(Artifacts {
                summary: summary(command, &job, result),
                csv: None,
                flagged: v.imprecise,
            })
        }
        Command::Conjugate => {
            let job: ConjugateJob = load(text, |j: &ConjugateJob| j.schema_version)?;
            let noise = job.noise.build()?;
            let long = match &job.coefficients {
                Some(c) => c.build()?.long_params().ok(),
                None => None,
            };
            let v = match long {
                Some((alpha, p, _)) => conjugate_rl(&noise, alpha, p, &job.times, &job.increments, &job.quadrature)?,
                None => RateValue::exact(finite_dim_rate(Limit::Lambda(&noise), &job.times, &job.increments)?),
            };
            Ok(Artifacts {
                summary: summary(command, &job, rate_json(&v)),
                csv: None,
                flagged: v.imprecise,
            })
        }
        Command::GaussRate => {
            let job: GaussRateJob = load(text, |j: &GaussRateJob| j.schema_version)?;
            let sigma = SymPsd::from_rows(&job.covariance)?;
            let phi = match (&job.phi, &job.path) {
                (Some(v), None) => GridFunction::new(v.clone())?,
                (None, Some(p)) => GridFunction::derivative_of(&p.build()?, job.cells),
                _ => return Err(Invalid("gauss-rate needs exactly one of `phi` or `path`".into()).into()),
            };
            let r = gaussian_rate_alpha(&sigma, job.alpha, job.p, &phi, GaussianMode::Variational)?;
            Ok(Artifacts {
                summary: summary(
                    command,
                    &job,
                    json!({"value": r.value, "cells": phi.cells(), "ridge": r.ridge}),
                ),
                csv: None,
                flagged: r.ridge.is_some(),
            })
        }
        Command::VerifyLimits => {
            let job: VerifyLimitsJob = load(text, |j: &VerifyLimitsJob| j.schema_version)?;
            let s = job.scenario.build()?;
            let pl = job.levels.build()?;
            let report = convergence_report(&s, &pl, &job.grid, job.truncation, &job.quadrature)?;
            log(&format!("limit {}, errors {:?}", report.limit, report.rel_error));
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            Ok(Artifacts {
                summary: summary(command, &job, serde_json::to_value(&report)?),
                csv: Some(String::from_utf8(csv)?),
                flagged: report.limit_imprecise,
            })
        }
        Command::Simulate => {
            let mut job: SimulateJob = load(text, |j: &SimulateJob| j.schema_version)?;
            if let Some(seed) = seed {
                job.seed = seed;
            }
            let s = job.scenario.build()?;
            let m = job.truncation.unwrap_or(s.coeffs().radius());
            let cfg = SimConfig::new(s, job.n, m, job.replications, job.seed)?;
            let points = job.points.unwrap_or(job.n.min(256) as usize).max(1);
            let d = cfg.scenario().noise().dim();
            let blocks: Vec<Result<(String, f64)>> = (0..job.replications)
                .into_par_iter()
                .map(|r| {
                    let path = simulate_path(&cfg, r)?;
                    let mut out = String::new();
                    for j in 0..=points {
                        let t = j as f64 / points as f64;
                        let _ = write!(out, "{r},{t}");
                        for v in path.step(t).iter().chain(path.polygonal(t).iter()) {
                            let _ = write!(out, ",{v}");
                        }
                        out.push('\n');
                    }
                    Ok((out, path.step(1.0)[0]))
                })
                .collect();
            let mut csv = String::from("replicate,t");
            for kind in ["step", "polygonal"] {
                for c in 0..d {
                    if d == 1 {
                        let _ = write!(csv, ",{kind}");
                    } else {
                        let _ = write!(csv, ",{kind}_{c}");
                    }
                }
            }
            csv.push('\n');
            let mut ends = Vec::with_capacity(blocks.len());
            for b in blocks {
                let (rows, end) = b?;
                csv.push_str(&rows);
                ends.push(end);
            }
            let mean = ends.iter().sum::<f64>() / ends.len() as f64;
            let var = if ends.len() > 1 {
                ends.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ends.len() - 1) as f64
            } else {
                0.0
            };
            Ok(Artifacts {
                summary: summary(
                    command,
                    &job,
                    json!({"replications": job.replications, "endpoint_mean": mean, "endpoint_variance": var}),
                ),
                csv: Some(csv),
                flagged: false,
            })
        }
        Command::Tail => {
            let mut job: TailJob = load(text, |j: &TailJob| j.schema_version)?;
            if let Some(seed) = seed {
                job.seed = seed;
            }
            let s = job.scenario.build()?;
            let est = match job.method {
                TailMode::Exact => exact_gaussian_tail(&s, job.n, job.level)?,
                mode => {
                    let m = job.truncation.unwrap_or(s.coeffs().radius());
                    let cfg = SimConfig::new(s, job.n, m, job.replications, job.seed)?.with_tilt(job.theta);
                    let method = if mode == TailMode::Direct {
                        TailMethod::Direct
                    } else {
                        TailMethod::Tilted
                    };
                    estimate_tail(&cfg, job.level, method)?
                }
            };
            let csv = tail_csv(&est);
            Ok(Artifacts {
                summary: summary(command, &job, serde_json::to_value(&est)?),
                csv: Some(csv),
                flagged: false,
            })
        }
        Command::SpeedScan => {
            let mut job: SpeedScanJob = load(text, |j: &SpeedScanJob| j.schema_version)?;
            if let Some(seed) = seed {
                job.seed = seed;
            }
            let s = job.scenario.build()?;
            let m = job.truncation.unwrap_or(s.coeffs().radius());
            let n0 = *job.grid.first().ok_or_else(|| Invalid("empty grid".into()))?;
            let cfg = SimConfig::new(s, n0, m, job.replications, job.seed)?;
            let scan = speed_scan(&cfg, &job.grid, job.level)?;
            let mut csv = Vec::new();
            scan.write_csv(&mut csv)?;
            Ok(Artifacts {
                summary: summary(command, &job, serde_json::to_value(&scan)?),
                csv: Some(String::from_utf8(csv)?),
                flagged: false,
            })
        }
        Command::PiCheck => {
            let job: PiCheckJob = load(text, |j: &PiCheckJob| j.schema_version)?;
            let noise = job.noise.build()?;
            let coeffs = job.coefficients.build()?;
            let v = pi_membership(&noise, &coeffs, &job.levels.build()?, job.n_max, job.j_max)?;
            Ok(Artifacts {
                summary: summary(command, &job, json!({"verdict": v.label(), "detail": v})),
                csv: None,
                flagged: false,
            })
        }
    }
}

fn tail_csv(e: &TailEstimate) -> String {
    let method = serde_json::to_value(e.method).expect("tag serializes");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    format!(
        "n,level,method,estimate,log_estimate,ci_lo,ci_hi,ess,theta\n{},{},{},{},{},{},{},{},{}\n",
        e.n,
        e.level,
        method.as_str().unwrap_or(""),
        e.estimate,
        e.log_estimate,
        e.ci[0],
        e.ci[1],
        opt(e.ess),
        opt(e.theta)
    )
}
