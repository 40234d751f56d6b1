//! JSON model descriptions. Every document carries `schema_version`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientModel, Generator, SlowlyVarying};
use crate::error::{Error, Result};
use crate::linalg::SymPsd;
use crate::noise::{NoiseKind, NoiseModel};
use crate::rates::{PartitionLevels, PiecewisePath};
use crate::scaling::{rv_of_lambda, LambdaRV, Scenario, ScenarioTag};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}

fn dim_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian {
        #[serde(default = "one")]
        variance: f64,
        #[serde(default = "dim_one")]
        dim: usize,
    },
    GaussianFull {
        covariance: Vec<Vec<f64>>,
    },
    Rademacher {
        #[serde(default = "dim_one")]
        dim: usize,
    },
    Laplace {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "dim_one")]
        dim: usize,
    },
    Uniform {
        #[serde(default = "one")]
        halfwidth: f64,
        #[serde(default = "dim_one")]
        dim: usize,
    },
}

impl NoiseConfig {
    pub fn build(&self) -> Result<NoiseModel> {
        match self {
            NoiseConfig::Gaussian { variance, dim } => {
                NoiseModel::new(NoiseKind::GaussianIso { variance: *variance }, *dim)
            }
            NoiseConfig::GaussianFull { covariance } => {
                let sigma = SymPsd::from_rows(covariance)?;
                let d = sigma.dim();
                NoiseModel::new(NoiseKind::GaussianFull { covariance: sigma }, d)
            }
            NoiseConfig::Rademacher { dim } => NoiseModel::new(NoiseKind::Rademacher, *dim),
            NoiseConfig::Laplace { scale, dim } => NoiseModel::new(NoiseKind::Laplace { scale: *scale }, *dim),
            NoiseConfig::Uniform { halfwidth, dim } => {
                NoiseModel::new(NoiseKind::UniformSymmetric { halfwidth: *halfwidth }, *dim)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Geometric {
        rho: f64,
        radius: i64,
    },
    FiniteSupport {
        entries: Vec<(i64, f64)>,
        radius: i64,
    },
    Identity {
        #[serde(default)]
        radius: i64,
    },
    LongMemory {
        alpha: f64,
        #[serde(default = "one")]
        p: f64,
        /// L(x) = (log x)^c when set.
        #[serde(default)]
        log_power: Option<f64>,
        radius: i64,
    },
}

impl CoefficientConfig {
    pub fn build(&self) -> Result<CoefficientModel> {
        match self {
            CoefficientConfig::Geometric { rho, radius } => {
                CoefficientModel::short_memory(Generator::Geometric { rho: *rho }, *radius)
            }
            CoefficientConfig::FiniteSupport { entries, radius } => CoefficientModel::short_memory(
                Generator::FiniteSupport {
                    entries: entries.clone(),
                },
                *radius,
            ),
            CoefficientConfig::Identity { radius } => Ok(CoefficientModel::identity(*radius)),
            CoefficientConfig::LongMemory {
                alpha,
                p,
                log_power,
                radius,
            } => {
                let sv = match log_power {
                    Some(c) => SlowlyVarying::LogPower(*c),
                    None => SlowlyVarying::None,
                };
                CoefficientModel::long_memory(*alpha, *p, sv, *radius)
            }
        }
    }

    pub fn radius(&self) -> i64 {
        match self {
            CoefficientConfig::Geometric { radius, .. }
            | CoefficientConfig::FiniteSupport { radius, .. }
            | CoefficientConfig::Identity { radius }
            | CoefficientConfig::LongMemory { radius, .. } => *radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaRvConfig {
    /// Λ^h = ½λ·Σλ with the noise covariance.
    Gaussian,
    /// Λ^h(λ) = ζ |λ|^β.
    Power { beta: f64, zeta: f64 },
    /// Fit β and ζ from the noise log-MGF.
    FromNoise,
}

impl LambdaRvConfig {
    pub fn build(&self, noise: &NoiseModel) -> Result<LambdaRV> {
        match self {
            LambdaRvConfig::Gaussian => Ok(LambdaRV::gaussian(noise.covariance())),
            LambdaRvConfig::Power { beta, zeta } => LambdaRV::power(*beta, *zeta, noise.dim()),
            LambdaRvConfig::FromNoise => rv_of_lambda(noise),
        }
    }
}

/// a_n = n^rho Ψ_n^kappa; both default to the tag's canonical choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub tag: ScenarioTag,
    pub noise: NoiseConfig,
    pub coefficients: CoefficientConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_rv: Option<LambdaRvConfig>,
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario> {
        let noise = self.noise.build()?;
        let coeffs = self.coefficients.build()?;
        let (rho_default, kappa_default) = match self.tag {
            ScenarioTag::R1 | ScenarioTag::R2 => (Some(1.0), 1.0),
            ScenarioTag::S1 | ScenarioTag::S2 => (Some(1.0), 0.0),
            _ => (None, 0.0),
        };
        let rho = self
            .rho
            .or(rho_default)
            .ok_or_else(|| Error::Config(format!("scenario {} needs `rho`", self.tag)))?;
        let kappa = self.kappa.unwrap_or(kappa_default);
        let rv = match &self.lambda_rv {
            Some(c) => Some(c.build(&noise)?),
            None => None,
        };
        Scenario::with_exponents(self.tag, noise, coeffs, rho, kappa, rv)
    }
}

/// Partition 0 < t_1 < … < t_k ≤ 1 with levels λ_i; `times` defaults to the
/// uniform partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub levels: Vec<Vec<f64>>,
}

impl LevelsConfig {
    pub fn build(&self) -> Result<PartitionLevels> {
        match &self.times {
            Some(t) => PartitionLevels::new(t.clone(), self.levels.clone()),
            None => PartitionLevels::uniform(self.levels.clone()),
        }
    }
}

/// Piecewise linear path through `values` at `knots` (starting at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub knots: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl PathConfig {
    pub fn build(&self) -> Result<PiecewisePath> {
        PiecewisePath::new(self.knots.clone(), self.values.clone())
    }
}

/// Parses a JSON document, reporting syntax and schema errors with their
/// line and column.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "line {}, column {}: {}",
            e.line(),
            e.column(),
            strip_position(&e.to_string())
        ))
    })
}

fn strip_position(msg: &str) -> &str {
    match msg.rfind(" at line ") {
        Some(i) => &msg[..i],
        None => msg,
    }
}

/// Rejects documents whose `schema_version` differs from ours.
pub fn check_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {version} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_round_trip() {
        let text = r#"{
            "tag": "R1",
            "noise": {"kind": "gaussian"},
            "coefficients": {"regime": "long-memory", "alpha": 0.75, "radius": 4096}
        }"#;
        let cfg: ScenarioConfig = parse_json(text).unwrap();
        let s = cfg.build().unwrap();
        assert_eq!(s.tag(), ScenarioTag::R1);
        assert_eq!(s.exponents(), (1.0, 1.0));
        let again: ScenarioConfig = parse_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_json::<ScenarioConfig>("{\n  \"tag\": \"S1\",\n  oops\n}").unwrap_err();
        let Error::Config(msg) = err else { panic!() };
        assert!(msg.starts_with("line 3, column 3"), "{msg}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = parse_json::<NoiseConfig>(r#"{"kind": "laplace", "scael": 2}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn moderate_scenario_needs_rho() {
        let cfg = ScenarioConfig {
            tag: ScenarioTag::S3,
            noise: NoiseConfig::Rademacher { dim: 1 },
            coefficients: CoefficientConfig::Geometric { rho: 0.5, radius: 64 },
            rho: None,
            kappa: None,
            lambda_rv: None,
        };
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
    }

    #[test]
    fn huge_scenario_with_gaussian_rv() {
        let cfg = ScenarioConfig {
            tag: ScenarioTag::S4,
            noise: NoiseConfig::Gaussian { variance: 2.0, dim: 1 },
            coefficients: CoefficientConfig::Geometric { rho: 0.5, radius: 64 },
            rho: Some(1.5),
            kappa: None,
            lambda_rv: Some(LambdaRvConfig::Gaussian),
        };
        let s = cfg.build().unwrap();
        assert_eq!(s.lambda_rv().unwrap().lambda_h(&[1.0]), 1.0);
    }

    #[test]
    fn version_gate() {
        assert!(check_version(SCHEMA_VERSION).is_ok());
        assert!(check_version(SCHEMA_VERSION + 1).is_err());
    }
}
