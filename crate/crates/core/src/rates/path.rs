//! Path rate functions for piecewise-linear paths.

use super::conjugate::Limit;
use super::gaussian::{gaussian_rate_alpha, GaussianMode};
use super::kernel::QuadratureSpec;
use super::variational::{gamma_alpha_star, NewtonOptions};
use super::{GridFunction, PiecewisePath, RateValue};
use crate::error::{Error, Result};
use crate::potential::{GaussianPotential, Potential};
use crate::scaling::{Scenario, ScenarioTag};

fn piecewise_sum<P: Potential + ?Sized>(pot: &P, f: &PiecewisePath) -> f64 {
    let mut total = 0.0;
    for (ds, slope) in f.pieces() {
        if slope.iter().all(|&v| v == 0.0) {
            continue;
        }
        let c = pot.conjugate(&slope);
        if c == f64::INFINITY {
            return f64::INFINITY;
        }
        total += ds * c;
    }
    total
}

/// The scenario's rate at f: ∫Λ*(f′), ∫½f′·Σ⁺f′ or ∫(Λ^h)*(f′) in short
/// memory, and Γ*_α(f′) with Γ = Λ, G_Σ or Λ^h in long memory, using `m`
/// cells for α < 1. Paths not starting at the origin have infinite rate.
pub fn path_rate(s: &Scenario, f: &PiecewisePath, m: usize, spec: &QuadratureSpec) -> Result<RateValue> {
    let noise = s.noise();
    if f.dim() != noise.dim() {
        return Err(Error::invalid("path dimension does not match the noise"));
    }
    if !f.starts_at_origin() {
        return Ok(RateValue::exact(f64::INFINITY));
    }
    if f.values().iter().flatten().all(|&v| v == 0.0) {
        return Ok(RateValue::exact(0.0));
    }
    let gauss = GaussianPotential::new(noise.covariance());
    let rv = s.lambda_rv();
    let limit = match s.tag() {
        ScenarioTag::S1 | ScenarioTag::S2 | ScenarioTag::R1 | ScenarioTag::R2 => Limit::Lambda(noise),
        ScenarioTag::S3 | ScenarioTag::R3 => Limit::Gaussian(&gauss),
        ScenarioTag::S4 | ScenarioTag::R4 => {
            Limit::RegVar(rv.ok_or_else(|| Error::Scenario("regular-variation data missing".into()))?)
        }
    };
    if !s.tag().is_long_memory() {
        return Ok(RateValue::exact(piecewise_sum(limit.potential(), f)));
    }
    let (alpha, p, _) = s.coeffs().long_params()?;
    if alpha == 1.0 {
        return Ok(RateValue::exact(piecewise_sum(limit.potential(), f)));
    }
    if m == 0 {
        return Err(Error::invalid("refinement m must be positive"));
    }
    let phi = GridFunction::derivative_of(f, m);
    match limit {
        Limit::Gaussian(g) => {
            let r = gaussian_rate_alpha(g.covariance(), alpha, p, &phi, GaussianMode::Variational)?;
            Ok(RateValue::exact(r.value))
        }
        _ => gamma_alpha_star(limit, alpha, p, &phi, spec, &NewtonOptions::default()),
    }
}
