//! Γ*_α(φ) = sup_ψ (ψ, φ) − Γ^rl(ψ), approximated from below by ψ constant
//! on m equal cells. The program is smooth and concave in the m·d cell
//! values, so it is solved by damped Newton with exact potential derivatives.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::conjugate::{gaussian_start, shrink_to_domain, Limit};
use super::kernel::{KernelQuadrature, QuadratureSpec};
use super::{GridFunction, RateValue};
use crate::error::{Error, Result};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop once half the squared Newton decrement falls below
    /// `tol * (1 + |F|)`.
    pub tol: f64,
    /// Iterates beyond this norm mark the supremum as attained at infinity.
    pub probe_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-15,
            probe_radius: 1e6,
        }
    }
}

const CHUNKS: usize = 32;

struct Program<'a, P: Potential + ?Sized> {
    kq: &'a KernelQuadrature,
    pot: &'a P,
    w: Vec<f64>,
    d: usize,
}

impl<P: Potential + ?Sized> Program<'_, P> {
    fn n_vars(&self) -> usize {
        self.w.len()
    }

    fn value(&self, psi: &[f64]) -> f64 {
        let r = self.kq.integrate_flat(self.pot, psi);
        if r.value.is_finite() {
            psi.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() - r.value
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Gradient and negated Hessian of the objective, accumulated over node
    /// chunks in a fixed order.
    fn derivatives(&self, psi: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let nv = self.n_vars();
        let d = self.d;
        let k = self.kq.k();
        let nodes = self.kq.len();
        let per = nodes.div_ceil(CHUNKS);
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..CHUNKS)
            .into_par_iter()
            .map(|c| {
                let mut g = vec![0.0; nv];
                let mut h = vec![0.0; nv * nv];
                let mut hv = vec![0.0; d];
                let mut grad = vec![0.0; d];
                let mut hess = vec![0.0; d * d];
                for n in (c * per)..((c + 1) * per).min(nodes) {
                    let (_, wn) = self.kq.node(n);
                    self.kq.h_at(n, psi, d, &mut hv);
                    self.pot.gradient(&hv, &mut grad);
                    self.pot.hessian(&hv, &mut hess);
                    let row = self.kq.coeff_row(n);
                    for i in 0..k {
                        let ci = wn * row[i];
                        if ci == 0.0 {
                            continue;
                        }
                        for a in 0..d {
                            g[i * d + a] += ci * grad[a];
                        }
                        for j in 0..k {
                            let cij = ci * row[j];
                            for a in 0..d {
                                for b in 0..d {
                                    h[(i * d + a) * nv + j * d + b] += cij * hess[a * d + b];
                                }
                            }
                        }
                    }
                }
                (g, h)
            })
            .collect();
        let mut g = self.w.clone();
        let mut h = vec![0.0; nv * nv];
        for (pg, ph) in parts {
            for (a, b) in g.iter_mut().zip(pg) {
                *a -= b;
            }
            for (a, b) in h.iter_mut().zip(ph) {
                *a += b;
            }
        }
        (g, DMatrix::from_row_slice(nv, nv, &h))
    }
}

/// Γ*_α(φ) for φ constant on the cells of its grid. For α = 1 this is
/// ∫ Γ*(φ(t)) dt, evaluated cell by cell.
pub fn gamma_alpha_star(
    limit: Limit<'_>,
    alpha: f64,
    p: f64,
    phi: &GridFunction,
    spec: &QuadratureSpec,
    opts: &NewtonOptions,
) -> Result<RateValue> {
    let pot = limit.potential();
    let d = pot.dim();
    if phi.dim() != d {
        return Err(Error::invalid("φ dimension does not match the limit"));
    }
    let m = phi.cells();
    if alpha == 1.0 {
        let width = phi.width();
        let mut total = 0.0;
        for v in phi.values() {
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            let c = pot.conjugate(v);
            if c == f64::INFINITY {
                return Ok(RateValue::exact(f64::INFINITY));
            }
            total += width * c;
        }
        return Ok(RateValue::exact(total));
    }
    if phi.is_zero() {
        return Ok(RateValue::exact(0.0));
    }
    let times: Vec<f64> = (1..=m).map(|j| j as f64 / m as f64).collect();
    let kq = KernelQuadrature::new(alpha, p, &times, spec)?;
    let w: Vec<f64> = (0..m).flat_map(|j| phi.cell_integral(j)).collect();
    let prog = Program { kq: &kq, pot, w, d };
    let f = |x: &[f64]| prog.value(x);

    let mut psi = gaussian_start(pot, alpha, p, &times, &prog.w)?
        .and_then(|s| shrink_to_domain(&f, s))
        .unwrap_or_else(|| vec![0.0; prog.n_vars()]);
    let mut fv = f(&psi);
    if !(fv >= 0.0) {
        psi = vec![0.0; prog.n_vars()];
        fv = 0.0;
    }
    let nv = prog.n_vars();
    let mut unbounded = false;
    for _ in 0..opts.max_iter {
        let (g, neg_h) = prog.derivatives(&psi);
        let gv = DVector::from_vec(g.clone());
        // Levenberg shift when the curvature degenerates
        let scale = neg_h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut mu = 0.0;
        let step = loop {
            let a = &neg_h + DMatrix::identity(nv, nv) * mu;
            if let Some(ch) = a.cholesky() {
                break ch.solve(&gv);
            }
            mu = if mu == 0.0 { 1e-12 * scale } else { mu * 10.0 };
            if mu > 1e12 * scale {
                break gv.clone() / scale;
            }
        };
        let decrement = gv.dot(&step);
        if !(decrement > 0.0) || 0.5 * decrement <= opts.tol * (1.0 + fv.abs()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = psi.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            let fc = f(&cand);
            if fc.is_finite() && fc >= fv + 1e-4 * t * decrement {
                psi = cand;
                fv = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > opts.probe_radius {
            // still ascending at the probe radius
            let slope = g.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>() / norm;
            unbounded = slope > 1e-9 * (1.0 + fv.abs());
            break;
        }
    }
    if unbounded {
        return Ok(RateValue {
            value: f64::INFINITY,
            tail_bound: 0.0,
            imprecise: false,
            unbounded: true,
        });
    }
    let at = kq.integrate_flat(pot, &psi);
    Ok(RateValue {
        value: fv,
        tail_bound: at.tail_bound,
        imprecise: at.imprecise,
        unbounded: false,
    })
}
