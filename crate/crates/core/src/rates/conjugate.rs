//! Finite-dimensional rates Σ(Δt)F*(w_i/Δt) and the conjugate of Λ^rl.

use nalgebra::{DMatrix, DVector};

use super::gaussian::{gaussian_sigma2, interval_gram};
use super::kernel::{KernelQuadrature, QuadratureSpec};
use super::{check_times, RateValue};
use crate::error::{Error, Result};
use crate::linalg::SymPsd;
use crate::noise::NoiseModel;
use crate::optimize::{maximize_concave, MaximizerOptions};
use crate::potential::{GaussianPotential, Potential};
use crate::scaling::LambdaRV;

/// The three limiting functionals: Λ itself, the Gaussian G_Σ(λ) = ½λ·Σλ
/// and the regularly varying Λ^h.
#[derive(Debug, Clone, Copy)]
pub enum Limit<'a> {
    Lambda(&'a NoiseModel),
    Gaussian(&'a GaussianPotential),
    RegVar(&'a LambdaRV),
}

impl<'a> Limit<'a> {
    pub fn potential(&self) -> &'a dyn Potential {
        match *self {
            Limit::Lambda(n) => n,
            Limit::Gaussian(g) => g,
            Limit::RegVar(r) => r,
        }
    }
}

/// Σ_i (t_i − t_{i−1}) F*(w_i / (t_i − t_{i−1})).
pub fn finite_dim_rate(limit: Limit<'_>, times: &[f64], increments: &[Vec<f64>]) -> Result<f64> {
    sum_of_conjugates(limit.potential(), times, increments)
}

fn sum_of_conjugates<P: Potential + ?Sized>(pot: &P, times: &[f64], w: &[Vec<f64>]) -> Result<f64> {
    check_times(times)?;
    if w.len() != times.len() {
        return Err(Error::InvalidPartition("one increment per interval is required".into()));
    }
    let d = pot.dim();
    let mut total = 0.0;
    let mut prev = 0.0;
    for (t, wi) in times.iter().zip(w) {
        if wi.len() != d {
            return Err(Error::invalid("increment dimension does not match"));
        }
        let dt = t - prev;
        prev = *t;
        if wi.iter().all(|&v| v == 0.0) {
            continue;
        }
        let x: Vec<f64> = wi.iter().map(|v| v / dt).collect();
        let c = pot.conjugate(&x);
        if c == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        total += dt * c;
    }
    Ok(total)
}

/// (Λ^rl)*(w) = sup_λ Σ λ_i·w_i − Λ^rl(λ).
pub fn conjugate_rl(
    noise: &NoiseModel,
    alpha: f64,
    p: f64,
    times: &[f64],
    increments: &[Vec<f64>],
    spec: &QuadratureSpec,
) -> Result<RateValue> {
    conjugate_rl_potential(noise, alpha, p, times, increments, spec, &MaximizerOptions::default())
}

/// Conjugate of Λ^rl built from any potential, by cyclic coordinate ascent
/// started from 0 and from the maximizer of the Gaussian approximation.
pub fn conjugate_rl_potential<P: Potential + ?Sized>(
    pot: &P,
    alpha: f64,
    p: f64,
    times: &[f64],
    increments: &[Vec<f64>],
    spec: &QuadratureSpec,
    opts: &MaximizerOptions,
) -> Result<RateValue> {
    if alpha == 1.0 {
        return Ok(RateValue::exact(sum_of_conjugates(pot, times, increments)?));
    }
    check_times(times)?;
    let d = pot.dim();
    if increments.len() != times.len() || increments.iter().any(|w| w.len() != d) {
        return Err(Error::invalid("increments must match the partition and dimension"));
    }
    if increments.iter().flatten().all(|&v| v == 0.0) {
        return Ok(RateValue::exact(0.0));
    }
    let kq = KernelQuadrature::new(alpha, p, times, spec)?;
    let w: Vec<f64> = increments.iter().flatten().copied().collect();
    let objective = |lam: &[f64]| {
        let r = kq.integrate_flat(pot, lam);
        if r.value.is_finite() {
            lam.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - r.value
        } else {
            f64::NEG_INFINITY
        }
    };

    let mut starts = vec![vec![0.0; w.len()]];
    if let Some(g) = gaussian_start(pot, alpha, p, times, &w)? {
        if let Some(s) = shrink_to_domain(&objective, g) {
            starts.push(s);
        }
    }
    let mut best: Option<crate::optimize::Maximum> = None;
    for s in &starts {
        let m = maximize_concave(&objective, s, opts);
        let better = match &best {
            None => true,
            Some(b) => (m.unbounded && !b.unbounded) || (m.unbounded == b.unbounded && m.value > b.value),
        };
        if better {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    if best.unbounded {
        return Ok(RateValue {
            value: f64::INFINITY,
            tail_bound: 0.0,
            imprecise: false,
            unbounded: true,
        });
    }
    let at = kq.integrate_flat(pot, &best.argmax);
    Ok(RateValue {
        value: best.value,
        tail_bound: at.tail_bound,
        imprecise: at.imprecise,
        unbounded: false,
    })
}

/// Maximizer of λ·w − (σ²/2) Σ_{ij} K_ij λ_i·Σλ_j with Σ the Hessian of the
/// potential at the origin; `None` if that Hessian vanishes.
pub(crate) fn gaussian_start<P: Potential + ?Sized>(
    pot: &P,
    alpha: f64,
    p: f64,
    times: &[f64],
    w: &[f64],
) -> Result<Option<Vec<f64>>> {
    let d = pot.dim();
    let k = times.len();
    let mut hess = vec![0.0; d * d];
    pot.hessian(&vec![0.0; d], &mut hess);
    if hess.iter().any(|v| !v.is_finite()) || hess.iter().all(|v| v.abs() < 1e-12) {
        return Ok(None);
    }
    let rows: Vec<Vec<f64>> = (0..d).map(|i| hess[i * d..(i + 1) * d].to_vec()).collect();
    let sigma = match SymPsd::from_rows(&rows) {
        Ok(s) => s,
        Err(_) => return Ok(None),
    };
    let s2 = gaussian_sigma2(alpha, p, 1.0 - p)?;
    let theta = 2.0 * alpha - 1.0;
    let t = |i: usize| if i == 0 { 0.0 } else { times[i - 1] };
    let gram = DMatrix::from_fn(k, k, |i, j| interval_gram(theta, t(i), t(i + 1), t(j), t(j + 1)));
    let chol = match gram.cholesky() {
        Some(c) => c,
        None => return Ok(None),
    };
    let mut y = vec![0.0; k * d];
    for c in 0..d {
        let rhs = DVector::from_fn(k, |i, _| w[i * d + c]);
        let sol = chol.solve(&rhs);
        for i in 0..k {
            y[i * d + c] = sol[i];
        }
    }
    let mut out = vec![0.0; k * d];
    for i in 0..k {
        let Some(v) = sigma.pinv_apply(&y[i * d..(i + 1) * d]) else {
            return Ok(None);
        };
        for c in 0..d {
            out[i * d + c] = v[c] / s2;
        }
    }
    Ok(Some(out))
}

pub(crate) fn shrink_to_domain<F: Fn(&[f64]) -> f64>(f: &F, mut x: Vec<f64>) -> Option<Vec<f64>> {
    for _ in 0..60 {
        if f(&x).is_finite() {
            return Some(x);
        }
        x.iter_mut().for_each(|v| *v *= 0.5);
    }
    None
}
