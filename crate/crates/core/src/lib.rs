//! Large, moderate and huge deviation rate functions for infinite
//! moving-average processes `X_n = Σ_i φ_i Z_{n-i}`, with prelimit
//! convergence checks and rare-event simulation.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coefficients;
pub mod config;
pub mod error;
pub mod limits;
pub mod linalg;
pub mod montecarlo;
pub mod noise;
pub mod optimize;
pub mod potential;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod scaling;

pub use coefficients::{CoefficientModel, Generator, SlowlyVarying, WindowSumTable};
pub use error::{Error, Result};
pub use limits::{convergence_report, prelimit_sum, PrelimitReport};
pub use montecarlo::{SimConfig, TailEstimate, TailMethod};
pub use noise::{DomainQuery, NoiseKind, NoiseModel};
pub use potential::{GaussianPotential, Potential};
pub use rates::{PartitionLevels, PiecewisePath, QuadratureSpec};
pub use rng::StreamRng;
pub use scaling::{LambdaRV, Scenario, ScenarioTag};
