//! Convex functions on `R^d` that play the role of a log-MGF inside the
//! integral and finite-dimensional rate functionals.

use crate::error::Result;
use crate::linalg::SymPsd;
use crate::optimize::{maximize_concave, MaximizerOptions};

pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    /// Value in `(-inf, +inf]`; `+inf` outside the effective domain.
    fn value(&self, u: &[f64]) -> f64;

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut p = u.to_vec();
        for i in 0..d {
            let h = 1e-6 * (1.0 + u[i].abs());
            p[i] = u[i] + h;
            let fp = self.value(&p);
            p[i] = u[i] - h;
            let fm = self.value(&p);
            p[i] = u[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    /// Row-major `d x d` Hessian.
    fn hessian(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut p = u.to_vec();
        let f0 = self.value(u);
        for i in 0..d {
            for j in 0..d {
                let hi = 1e-4 * (1.0 + u[i].abs());
                let hj = 1e-4 * (1.0 + u[j].abs());
                let v = if i == j {
                    p[i] = u[i] + hi;
                    let fp = self.value(&p);
                    p[i] = u[i] - hi;
                    let fm = self.value(&p);
                    p[i] = u[i];
                    (fp - 2.0 * f0 + fm) / (hi * hi)
                } else {
                    let mut eval = |si: f64, sj: f64| {
                        p[i] = u[i] + si * hi;
                        p[j] = u[j] + sj * hj;
                        let v = self.value(&p);
                        p[i] = u[i];
                        p[j] = u[j];
                        v
                    };
                    (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                        / (4.0 * hi * hj)
                };
                out[i * d + j] = v;
            }
        }
    }

    /// Convex conjugate `sup_u { u.x - value(u) }` by concave maximization.
    fn conjugate(&self, x: &[f64]) -> f64 {
        generic_conjugate(self, x, &MaximizerOptions::default())
    }

    fn label(&self) -> &'static str;
}

pub(crate) fn generic_conjugate<P: Potential + ?Sized>(
    p: &P,
    x: &[f64],
    opts: &MaximizerOptions,
) -> f64 {
    let d = p.dim();
    let obj = |u: &[f64]| {
        let v = p.value(u);
        if v == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - v
        }
    };
    let m = maximize_concave(obj, &vec![0.0; d], opts);
    if m.unbounded {
        f64::INFINITY
    } else {
        m.value
    }
}

/// `G_Σ(λ) = ½ λ·Σλ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPotential {
    sigma: SymPsd,
}

impl GaussianPotential {
    pub fn new(sigma: SymPsd) -> Self {
        Self { sigma }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::new(SymPsd::from_rows(rows)?))
    }

    pub fn scalar(variance: f64) -> Self {
        Self::new(SymPsd::identity_scaled(1, variance))
    }

    pub fn covariance(&self) -> &SymPsd {
        &self.sigma
    }
}

impl Potential for GaussianPotential {
    fn dim(&self) -> usize {
        self.sigma.dim()
    }

    fn value(&self, u: &[f64]) -> f64 {
        0.5 * self.sigma.quad(u)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        self.sigma.apply(u, out);
    }

    fn hessian(&self, _u: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.sigma.entry(i, j);
            }
        }
    }

    /// `½ w·Σ⁺w` on the range of Σ, `+inf` off it.
    fn conjugate(&self, w: &[f64]) -> f64 {
        match self.sigma.pinv_quad(w) {
            Some(v) => 0.5 * v,
            None => f64::INFINITY,
        }
    }

    fn label(&self) -> &'static str {
        "g_sigma"
    }
}
