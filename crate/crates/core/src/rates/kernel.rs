//! The kernel h(x; λ) and Λ^rl(λ) = ∫ Λ(h(x; λ)) dx.

use serde::{Deserialize, Serialize};

use super::{PartitionLevels, RateValue};
use crate::coefficients::Compensated;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::potential::Potential;
use crate::quadrature::fixed_nodes;

/// Quadrature layout for x-integrals of functions of h: panels split at the
/// kink set {−t_k, …, −t_1, 0}, geometric outer panels up to ±X_max and an
/// analytic |x|^{−2α} tail beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Tanh-sinh level per panel (step 2^{-level}).
    pub level: u32,
    pub t_max: f64,
    /// `None` picks X_max with X_max^{1−2α} = `tail_tol`.
    pub x_max: Option<f64>,
    pub tail_tol: f64,
    pub growth: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            level: 5,
            t_max: 4.0,
            x_max: None,
            tail_tol: 1e-6,
            growth: 4.0,
        }
    }
}

impl QuadratureSpec {
    fn resolve_x_max(&self, alpha: f64) -> f64 {
        self.x_max
            .unwrap_or_else(|| self.tail_tol.powf(-1.0 / (2.0 * alpha - 1.0)))
            .clamp(1024.0, 1e200)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "the kernel needs 1/2 < α < 1, got {alpha}"
        )));
    }
    Ok(())
}

/// (u + δ)^β − u^β for u ≥ 0 without cancellation.
#[inline]
fn pow_diff(u: f64, delta: f64, beta: f64) -> f64 {
    if u == 0.0 {
        delta.powf(beta)
    } else if delta < u {
        u.powf(beta) * (beta * (delta / u).ln_1p()).exp_m1()
    } else {
        (u + delta).powf(beta) - u.powf(beta)
    }
}

/// (1 − α) ∫_{y0}^{y0+δ} |y|^{−α} (p 1[y ≥ 0] + q 1[y < 0]) dy
#[inline]
pub(crate) fn segment(alpha: f64, p: f64, y0: f64, delta: f64) -> f64 {
    let beta = 1.0 - alpha;
    let q = 1.0 - p;
    let y1 = y0 + delta;
    if y0 >= 0.0 {
        p * pow_diff(y0, delta, beta)
    } else if y1 <= 0.0 {
        q * pow_diff(-y1, delta, beta)
    } else {
        p * y1.powf(beta) + q * (-y0).powf(beta)
    }
}

/// h(x; λ) = (1−α) Σ_i λ_i ∫_{x+t_{i−1}}^{x+t_i} |y|^{−α}(p 1[y≥0] + q 1[y<0]) dy
pub fn h_kernel(alpha: f64, p: f64, pl: &PartitionLevels, x: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p must lie in [0, 1]"));
    }
    let mut out = vec![0.0; pl.dim()];
    for i in 0..pl.k() {
        let lam = &pl.levels()[i];
        if lam.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (a, b) = (pl.t(i), pl.t(i + 1));
        let c = segment(alpha, p, x + a, b - a);
        for (o, l) in out.iter_mut().zip(lam) {
            *o += c * l;
        }
    }
    Ok(out)
}

/// Precomputed quadrature nodes together with the per-interval kernel
/// weights c_i(x), so that h(x_n; λ) = Σ_i c_i(x_n) λ_i.
#[derive(Debug, Clone)]
pub struct KernelQuadrature {
    alpha: f64,
    k: usize,
    x: Vec<f64>,
    w: Vec<f64>,
    /// row-major `nodes × k`
    coeffs: Vec<f64>,
    /// Index of the first of the two tail pseudo-nodes.
    tail_start: usize,
    x_max: f64,
    tail_tol: f64,
}

impl KernelQuadrature {
    pub fn new(alpha: f64, p: f64, times: &[f64], spec: &QuadratureSpec) -> Result<Self> {
        check_alpha(alpha)?;
        super::check_times(times)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p must lie in [0, 1]"));
        }
        if !(spec.growth > 1.0) {
            return Err(Error::invalid("panel growth factor must exceed 1"));
        }
        let k = times.len();
        let tk = times[k - 1];
        let x_max = spec.resolve_x_max(alpha);

        let mut panels = Vec::new();
        // kink panels [−t_i, −t_{i−1}]
        let mut prev = 0.0;
        for &t in times {
            panels.push((-t, -prev));
            prev = t;
        }
        // geometric outer panels
        let mut lo = 0.0;
        let mut hi: f64 = 1.0;
        while lo < x_max {
            let top = hi.min(x_max);
            panels.push((lo, top));
            panels.push((-tk - top, -tk - lo));
            lo = top;
            hi *= spec.growth;
        }

        let mut x = Vec::new();
        let mut w = Vec::new();
        for &(a, b) in &panels {
            for (xi, wi) in fixed_nodes(a, b, spec.level, spec.t_max) {
                x.push(xi);
                w.push(wi);
            }
        }
        let tail_start = x.len();
        // beyond ±X the integrand decays like |x|^{−2α}
        let tail_w = x_max / (2.0 * alpha - 1.0);
        x.push(x_max);
        w.push(tail_w);
        x.push(-tk - x_max);
        w.push((x_max + tk) / (2.0 * alpha - 1.0));

        let mut coeffs = Vec::with_capacity(x.len() * k);
        for &xi in &x {
            let mut prev = 0.0;
            for &t in times {
                coeffs.push(segment(alpha, p, xi + prev, t - prev));
                prev = t;
            }
        }
        Ok(Self {
            alpha,
            k,
            x,
            w,
            coeffs,
            tail_start,
            x_max,
            tail_tol: spec.tail_tol,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn node(&self, n: usize) -> (f64, f64) {
        (self.x[n], self.w[n])
    }

    pub fn coeff_row(&self, n: usize) -> &[f64] {
        &self.coeffs[n * self.k..(n + 1) * self.k]
    }

    pub(crate) fn is_tail(&self, n: usize) -> bool {
        n >= self.tail_start
    }

    /// h at node n for levels given as a flat `k × d` slice.
    #[inline]
    pub(crate) fn h_at(&self, n: usize, levels: &[f64], d: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let row = self.coeff_row(n);
        for (i, c) in row.iter().enumerate() {
            let l = &levels[i * d..(i + 1) * d];
            for (o, li) in out.iter_mut().zip(l) {
                *o += c * li;
            }
        }
    }

    /// ∫ F(h(x; λ)) dx with levels as a flat `k × d` slice.
    pub fn integrate_flat<P: Potential + ?Sized>(&self, pot: &P, levels: &[f64]) -> RateValue {
        let d = pot.dim();
        debug_assert_eq!(levels.len(), self.k * d);
        if levels.iter().all(|&v| v == 0.0) {
            return RateValue::exact(0.0);
        }
        let mut h = vec![0.0; d];
        let mut body = Compensated::default();
        let mut tail = 0.0;
        for n in 0..self.len() {
            self.h_at(n, levels, d, &mut h);
            let v = pot.value(&h);
            if !v.is_finite() {
                return RateValue {
                    value: f64::INFINITY,
                    tail_bound: 0.0,
                    imprecise: false,
                    unbounded: false,
                };
            }
            let c = self.w[n] * v;
            if self.is_tail(n) {
                tail += c;
            } else {
                body.add(c);
            }
        }
        let value = body.value() + tail;
        let tail_bound = tail.abs();
        RateValue {
            value,
            tail_bound,
            imprecise: tail_bound > self.tail_tol * value.abs().max(f64::MIN_POSITIVE),
            unbounded: false,
        }
    }

    pub fn integrate<P: Potential + ?Sized>(&self, pot: &P, levels: &[Vec<f64>]) -> RateValue {
        let flat: Vec<f64> = levels.iter().flatten().copied().collect();
        self.integrate_flat(pot, &flat)
    }
}

/// Λ^rl(λ) for the noise log-MGF.
pub fn lambda_rl(
    noise: &NoiseModel,
    alpha: f64,
    p: f64,
    pl: &PartitionLevels,
    spec: &QuadratureSpec,
) -> Result<RateValue> {
    lambda_rl_potential(noise, alpha, p, pl, spec)
}

/// Λ^rl with any convex potential in place of Λ (G_Σ or Λ^h in the moderate
/// and huge deviation limits). For α = 1 this is Σ (t_i − t_{i−1}) F(λ_i).
pub fn lambda_rl_potential<P: Potential + ?Sized>(
    pot: &P,
    alpha: f64,
    p: f64,
    pl: &PartitionLevels,
    spec: &QuadratureSpec,
) -> Result<RateValue> {
    if pl.dim() != pot.dim() {
        return Err(Error::invalid("level dimension does not match the potential"));
    }
    if alpha == 1.0 {
        let mut s = Compensated::default();
        for i in 0..pl.k() {
            let v = pot.value(&pl.levels()[i]);
            if !v.is_finite() {
                return Ok(RateValue::exact(f64::INFINITY));
            }
            s.add((pl.t(i + 1) - pl.t(i)) * v);
        }
        return Ok(RateValue::exact(s.value()));
    }
    let kq = KernelQuadrature::new(alpha, p, pl.times(), spec)?;
    Ok(kq.integrate(pot, pl.levels()))
}
