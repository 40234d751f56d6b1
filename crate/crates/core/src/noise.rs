//! Innovation laws: log-moment generating function, its conjugate,
//! covariance, sampling and exponential tilting.

use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SymPsd;
use crate::optimize::MaximizerOptions;
use crate::potential::{generic_conjugate, Potential};
use crate::rng::StreamRng;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    GaussianIso { variance: f64 },
    GaussianFull { covariance: SymPsd },
    Rademacher,
    /// Coordinatewise independent Laplace with the given scale.
    Laplace { scale: f64 },
    /// Coordinatewise independent uniform on `[-halfwidth, halfwidth]`.
    UniformSymmetric { halfwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainQuery {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    dim: usize,
    /// Symmetric square root of the covariance, for full Gaussians.
    sqrt_cov: Option<Vec<f64>>,
}

fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    if a < 20.0 {
        let s = (0.5 * a).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
    }
}

/// `log(sinh x / x)`, even in `x`.
fn log_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.1 {
        let x2 = a * a;
        x2 * (1.0 / 6.0 + x2 * (-1.0 / 180.0 + x2 * (1.0 / 2835.0 - x2 / 37800.0)))
    } else if a < 20.0 {
        (a.sinh() / a).ln()
    } else {
        a - std::f64::consts::LN_2 - a.ln() + (-(-2.0 * a).exp()).ln_1p()
    }
}

/// d/dx log(sinh x / x) = coth x - 1/x
fn d_log_sinhc(x: f64) -> f64 {
    let a = x.abs();
    let v = if a < 0.1 {
        let x2 = a * a;
        a * (1.0 / 3.0 + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0)))
    } else {
        1.0 / a.tanh() - 1.0 / a
    };
    v.copysign(x)
}

/// d²/dx² log(sinh x / x) = 1/x² - 1/sinh²x
fn dd_log_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.1 {
        let x2 = a * a;
        1.0 / 3.0 + x2 * (-1.0 / 15.0 + x2 * (2.0 / 189.0))
    } else if a < 350.0 {
        let s = a.sinh();
        1.0 / (a * a) - 1.0 / (s * s)
    } else {
        1.0 / (a * a)
    }
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!(
                "noise dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        let positive = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite")))
            }
        };
        let mut sqrt_cov = None;
        match &kind {
            NoiseKind::GaussianIso { variance } => positive(*variance, "variance")?,
            NoiseKind::GaussianFull { covariance } => {
                if covariance.dim() != dim {
                    return Err(Error::invalid("covariance size does not match dim"));
                }
                sqrt_cov = Some(covariance.sqrt_rows());
            }
            NoiseKind::Rademacher => {}
            NoiseKind::Laplace { scale } => positive(*scale, "scale")?,
            NoiseKind::UniformSymmetric { halfwidth } => positive(*halfwidth, "halfwidth")?,
        }
        Ok(Self {
            kind,
            dim,
            sqrt_cov,
        })
    }

    pub fn gaussian(variance: f64) -> Self {
        Self::new(NoiseKind::GaussianIso { variance }, 1).expect("valid gaussian")
    }

    pub fn rademacher() -> Self {
        Self::new(NoiseKind::Rademacher, 1).expect("valid rademacher")
    }

    pub fn laplace(scale: f64) -> Self {
        Self::new(NoiseKind::Laplace { scale }, 1).expect("valid laplace")
    }

    pub fn uniform(halfwidth: f64) -> Self {
        Self::new(NoiseKind::UniformSymmetric { halfwidth }, 1).expect("valid uniform")
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(
            self.kind,
            NoiseKind::GaussianIso { .. } | NoiseKind::GaussianFull { .. }
        )
    }

    /// `F_Λ = R^d`.
    pub fn has_full_domain(&self) -> bool {
        !matches!(self.kind, NoiseKind::Laplace { .. })
    }

    pub fn covariance(&self) -> SymPsd {
        let d = self.dim;
        match &self.kind {
            NoiseKind::GaussianIso { variance } => SymPsd::identity_scaled(d, *variance),
            NoiseKind::GaussianFull { covariance } => covariance.clone(),
            NoiseKind::Rademacher => SymPsd::identity_scaled(d, 1.0),
            NoiseKind::Laplace { scale } => SymPsd::identity_scaled(d, 2.0 * scale * scale),
            NoiseKind::UniformSymmetric { halfwidth } => {
                SymPsd::identity_scaled(d, halfwidth * halfwidth / 3.0)
            }
        }
    }

    pub fn domain(&self, lambda: &[f64]) -> DomainQuery {
        match &self.kind {
            NoiseKind::Laplace { scale } => {
                let m = lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let edge = 1.0 / scale;
                if m < edge {
                    DomainQuery::Interior
                } else if m == edge {
                    DomainQuery::Boundary
                } else {
                    DomainQuery::Exterior
                }
            }
            _ => DomainQuery::Interior,
        }
    }

    /// Λ(λ); the argument must be finite.
    pub fn logmgf(&self, lambda: &[f64]) -> Result<f64> {
        if lambda.len() != self.dim {
            return Err(Error::invalid("argument dimension does not match noise"));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log-MGF argument must be finite"));
        }
        Ok(self.lambda_unchecked(lambda))
    }

    fn lambda_unchecked(&self, l: &[f64]) -> f64 {
        match &self.kind {
            NoiseKind::GaussianIso { variance } => {
                0.5 * variance * l.iter().map(|v| v * v).sum::<f64>()
            }
            NoiseKind::GaussianFull { covariance } => 0.5 * covariance.quad(l),
            NoiseKind::Rademacher => l.iter().map(|&v| log_cosh(v)).sum(),
            NoiseKind::Laplace { scale } => {
                let mut s = 0.0;
                for &v in l {
                    let t = scale * v;
                    if t.abs() >= 1.0 {
                        return f64::INFINITY;
                    }
                    s -= (-t * t).ln_1p();
                }
                s
            }
            NoiseKind::UniformSymmetric { halfwidth } => {
                l.iter().map(|&v| log_sinhc(halfwidth * v)).sum()
            }
        }
    }

    fn scalar_grad(&self, v: f64) -> f64 {
        match &self.kind {
            NoiseKind::GaussianIso { variance } => variance * v,
            NoiseKind::GaussianFull { .. } => unreachable!(),
            NoiseKind::Rademacher => v.tanh(),
            NoiseKind::Laplace { scale } => {
                let s2 = scale * scale;
                2.0 * s2 * v / (1.0 - s2 * v * v)
            }
            NoiseKind::UniformSymmetric { halfwidth } => halfwidth * d_log_sinhc(halfwidth * v),
        }
    }

    fn scalar_hess(&self, v: f64) -> f64 {
        match &self.kind {
            NoiseKind::GaussianIso { variance } => *variance,
            NoiseKind::GaussianFull { .. } => unreachable!(),
            NoiseKind::Rademacher => {
                let t = v.tanh();
                1.0 - t * t
            }
            NoiseKind::Laplace { scale } => {
                let s2 = scale * scale;
                let den = 1.0 - s2 * v * v;
                2.0 * s2 * (1.0 + s2 * v * v) / (den * den)
            }
            NoiseKind::UniformSymmetric { halfwidth } => {
                halfwidth * halfwidth * dd_log_sinhc(halfwidth * v)
            }
        }
    }

    /// Λ*(x) by concave maximization of `λ·x − Λ(λ)`; `tol` bounds the
    /// objective gain accepted as convergence. A supremum that is only
    /// approached at the domain boundary (or at infinity) is returned as that
    /// limit value.
    pub fn legendre(&self, x: &[f64], tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("legendre argument must be finite with matching dim"));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let opts = MaximizerOptions {
            f_tol: (tol * 1e-4).min(1e-12),
            ..MaximizerOptions::default()
        };
        Ok(generic_conjugate(self, x, &opts))
    }

    pub fn default_legendre_tol(&self) -> f64 {
        if self.dim == 1 {
            1e-8
        } else {
            1e-6
        }
    }

    /// Draw one innovation into `out` (length `dim`).
    pub fn sample_one(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match &self.kind {
            NoiseKind::GaussianIso { variance } => {
                let s = variance.sqrt();
                for o in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = s * z;
                }
            }
            NoiseKind::GaussianFull { .. } => {
                let d = self.dim;
                let mut g = [0.0; MAX_DIM];
                for gi in g.iter_mut().take(d) {
                    *gi = StandardNormal.sample(rng);
                }
                let r = self.sqrt_cov.as_ref().expect("full gaussian has factor");
                for i in 0..d {
                    out[i] = (0..d).map(|j| r[i * d + j] * g[j]).sum();
                }
            }
            NoiseKind::Rademacher => {
                for o in out.iter_mut() {
                    *o = if rng.open01() < 0.5 { -1.0 } else { 1.0 };
                }
            }
            NoiseKind::Laplace { scale } => {
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    let sign = if rng.open01() < 0.5 { -1.0 } else { 1.0 };
                    *o = sign * scale * e;
                }
            }
            NoiseKind::UniformSymmetric { halfwidth } => {
                for o in out.iter_mut() {
                    *o = halfwidth * (2.0 * rng.open01() - 1.0);
                }
            }
        }
    }

    /// `count` i.i.d. draws, each of length `dim`.
    pub fn sample(&self, rng: &mut StreamRng, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let mut z = vec![0.0; self.dim];
                self.sample_one(rng, &mut z);
                z
            })
            .collect()
    }

    /// Exponential change of measure `dP_θ ∝ exp(θ·z) dP`.
    pub fn tilt(&self, theta: &[f64]) -> Result<TiltedNoise> {
        if theta.len() != self.dim || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tilt parameter must be finite".into()));
        }
        if self.domain(theta) != DomainQuery::Interior {
            return Err(Error::Domain(
                "tilt parameter must lie in the interior of the log-MGF domain".into(),
            ));
        }
        let log_mgf = self.lambda_unchecked(theta);
        let mean = self.fd_gradient(theta);
        Ok(TiltedNoise {
            base: self.clone(),
            theta: theta.to_vec(),
            mean,
            log_mgf,
        })
    }

    /// ∇Λ by central differences with step `1e-6 (1 + |θ|)`.
    pub fn fd_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6 * (1.0 + norm);
        let mut p = theta.to_vec();
        (0..self.dim)
            .map(|i| {
                p[i] = theta[i] + h;
                let fp = self.lambda_unchecked(&p);
                p[i] = theta[i] - h;
                let fm = self.lambda_unchecked(&p);
                p[i] = theta[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    /// One scalar draw from the law tilted by `theta` (dimension one only).
    pub fn sample_tilted_scalar(&self, theta: f64, rng: &mut StreamRng) -> f64 {
        debug_assert_eq!(self.dim, 1);
        match &self.kind {
            NoiseKind::GaussianIso { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                variance * theta + variance.sqrt() * z
            }
            NoiseKind::GaussianFull { covariance } => {
                let v = covariance.entry(0, 0);
                let z: f64 = StandardNormal.sample(rng);
                v * theta + v.sqrt() * z
            }
            NoiseKind::Rademacher => {
                let p_plus = 1.0 / (1.0 + (-2.0 * theta).exp());
                if rng.open01() < p_plus {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseKind::Laplace { scale } => {
                let rate_plus = 1.0 / scale - theta;
                let rate_minus = 1.0 / scale + theta;
                let p_plus = rate_minus / (rate_plus + rate_minus);
                let e: f64 = Exp1.sample(rng);
                if rng.open01() < p_plus {
                    e / rate_plus
                } else {
                    -e / rate_minus
                }
            }
            NoiseKind::UniformSymmetric { halfwidth } => {
                let a = *halfwidth;
                let u = rng.open01();
                let t = theta * a;
                if t.abs() < 1e-12 {
                    a * (2.0 * u - 1.0)
                } else if t > 0.0 {
                    // inverse CDF of density ∝ exp(θz) on [-a, a]
                    a + (u + (1.0 - u) * (-2.0 * t).exp()).ln() / theta
                } else {
                    -a + (u + (1.0 - u) * (2.0 * t).exp()).ln() / theta
                }
            }
        }
    }
}

impl Potential for NoiseModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.lambda_unchecked(u)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        if let NoiseKind::GaussianFull { covariance } = &self.kind {
            covariance.apply(u, out);
            return;
        }
        for (o, &v) in out.iter_mut().zip(u) {
            *o = self.scalar_grad(v);
        }
    }

    fn hessian(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        if let NoiseKind::GaussianFull { covariance } = &self.kind {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = covariance.entry(i, j);
                }
            }
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..d {
            out[i * d + i] = self.scalar_hess(u[i]);
        }
    }

    fn conjugate(&self, x: &[f64]) -> f64 {
        self.legendre(x, self.default_legendre_tol())
            .unwrap_or(f64::INFINITY)
    }

    fn label(&self) -> &'static str {
        "lambda"
    }
}

/// A tilted sampler together with its mean and likelihood-ratio weights.
#[derive(Debug, Clone)]
pub struct TiltedNoise {
    base: NoiseModel,
    theta: Vec<f64>,
    mean: Vec<f64>,
    log_mgf: f64,
}

impl TiltedNoise {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// ∇Λ(θ), the mean under the tilted law.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn base(&self) -> &NoiseModel {
        &self.base
    }

    /// `log dP/dP_θ (z) = Λ(θ) − θ·z`.
    pub fn log_weight(&self, z: &[f64]) -> f64 {
        self.log_mgf - self.theta.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn sample_one(&self, rng: &mut StreamRng, out: &mut [f64]) {
        if self.theta.iter().all(|&t| t == 0.0) {
            self.base.sample_one(rng, out);
            return;
        }
        match self.base.kind() {
            NoiseKind::GaussianFull { covariance } => {
                self.base.sample_one(rng, out);
                let mut shift = vec![0.0; out.len()];
                covariance.apply(&self.theta, &mut shift);
                for (o, s) in out.iter_mut().zip(shift) {
                    *o += s;
                }
            }
            _ => {
                // the remaining families are coordinatewise independent
                let one = NoiseModel {
                    kind: self.base.kind.clone(),
                    dim: 1,
                    sqrt_cov: None,
                };
                for (o, &t) in out.iter_mut().zip(&self.theta) {
                    *o = one.sample_tilted_scalar(t, rng);
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut StreamRng, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let mut z = vec![0.0; self.base.dim()];
                self.sample_one(rng, &mut z);
                z
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logmgf_examples() {
        assert_eq!(NoiseModel::gaussian(1.0).logmgf(&[2.0]).unwrap(), 2.0);
        assert_eq!(NoiseModel::rademacher().logmgf(&[0.0]).unwrap(), 0.0);
        let l = NoiseModel::laplace(1.0).logmgf(&[0.5]).unwrap();
        // MGF 1/(1 - 0.25)
        assert!((l - (1.0f64 / 0.75).ln()).abs() < 1e-15);
        assert!((l - 0.287682).abs() < 1e-6);
    }

    #[test]
    fn logmgf_rejects_non_finite() {
        let g = NoiseModel::gaussian(1.0);
        assert!(matches!(g.logmgf(&[f64::NAN]), Err(Error::InvalidArgument(_))));
        assert!(g.logmgf(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn laplace_infinite_off_domain() {
        let l = NoiseModel::laplace(1.0);
        assert_eq!(l.logmgf(&[1.0]).unwrap(), f64::INFINITY);
        assert_eq!(l.logmgf(&[-1.5]).unwrap(), f64::INFINITY);
        assert_eq!(l.domain(&[1.0]), DomainQuery::Boundary);
        assert_eq!(l.domain(&[0.999]), DomainQuery::Interior);
        assert_eq!(l.domain(&[2.0]), DomainQuery::Exterior);
        let l2 = NoiseModel::new(NoiseKind::Laplace { scale: 0.5 }, 2).unwrap();
        assert_eq!(l2.domain(&[1.9, -0.5]), DomainQuery::Interior);
        assert_eq!(l2.domain(&[0.0, -2.0]), DomainQuery::Boundary);
    }

    #[test]
    fn whole_space_domains_are_interior() {
        for m in [NoiseModel::gaussian(2.0), NoiseModel::rademacher(), NoiseModel::uniform(3.0)] {
            assert_eq!(m.domain(&[1e8]), DomainQuery::Interior);
            assert!(m.logmgf(&[700.0]).unwrap().is_finite());
        }
    }

    #[test]
    fn small_argument_precision() {
        // Λ(u) ≈ Var/2 u² for tiny u must keep full relative precision
        let u = 1e-9;
        let r = NoiseModel::rademacher().logmgf(&[u]).unwrap();
        assert!((r / (0.5 * u * u) - 1.0).abs() < 1e-12);
        let un = NoiseModel::uniform(1.0).logmgf(&[u]).unwrap();
        assert!((un / (u * u / 6.0) - 1.0).abs() < 1e-12);
        let la = NoiseModel::laplace(1.0).logmgf(&[u]).unwrap();
        assert!((la / (u * u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_examples() {
        let g = NoiseModel::gaussian(1.0);
        assert!((g.legendre(&[1.5], 1e-8).unwrap() - 1.125).abs() < 1e-9);
        for m in [
            NoiseModel::gaussian(1.0),
            NoiseModel::rademacher(),
            NoiseModel::laplace(1.0),
            NoiseModel::uniform(1.0),
        ] {
            assert_eq!(m.legendre(&[0.0], 1e-8).unwrap(), 0.0);
        }
        // brute force: sup over a wide λ grid of λ − log cosh λ
        let brute = (0..=40_000)
            .map(|k| {
                let l = k as f64 * 1e-3;
                l - log_cosh(l)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let r = NoiseModel::rademacher().legendre(&[1.0], 1e-8).unwrap();
        assert!((brute - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((r - brute).abs() < 1e-10, "{r}");
    }

    #[test]
    fn legendre_outside_support_is_infinite() {
        assert_eq!(NoiseModel::rademacher().legendre(&[1.2], 1e-8).unwrap(), f64::INFINITY);
        assert_eq!(NoiseModel::uniform(1.0).legendre(&[-1.01], 1e-8).unwrap(), f64::INFINITY);
    }

    #[test]
    fn legendre_rademacher_closed_form() {
        // Λ*(x) = ((1+x)ln(1+x) + (1-x)ln(1-x))/2
        let x: f64 = 0.6;
        let exact = 0.5 * ((1.0 + x) * (1.0 + x).ln() + (1.0 - x) * (1.0 - x).ln());
        let r = NoiseModel::rademacher().legendre(&[x], 1e-8).unwrap();
        assert!((r - exact).abs() < 1e-12);
    }

    #[test]
    fn legendre_rejects_bad_tol() {
        assert!(NoiseModel::gaussian(1.0).legendre(&[1.0], 0.0).is_err());
    }

    #[test]
    fn legendre_full_gaussian_matches_inverse() {
        let cov = SymPsd::from_rows(&[vec![2.0, 0.7], vec![0.7, 1.0]]).unwrap();
        let m = NoiseModel::new(NoiseKind::GaussianFull { covariance: cov.clone() }, 2).unwrap();
        let x = [0.8, -0.3];
        let exact = 0.5 * cov.pinv_quad(&x).unwrap();
        let r = m.legendre(&x, 1e-6).unwrap();
        assert!((r - exact).abs() < 1e-9, "{r} vs {exact}");
    }

    #[test]
    fn samples_support_and_moments() {
        let mut rng = StreamRng::new(42, 0);
        let r = NoiseModel::rademacher().sample(&mut rng, 4);
        assert!(r.iter().all(|z| z[0] == 1.0 || z[0] == -1.0));

        let n = 100_000;
        let g = NoiseModel::gaussian(1.0).sample(&mut StreamRng::new(1, 0), n);
        let mean = g.iter().map(|z| z[0]).sum::<f64>() / n as f64;
        let var = g.iter().map(|z| (z[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{var}");
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());

        // Laplace(1): E Z^4 = 4! = 24
        let l = NoiseModel::laplace(1.0).sample(&mut StreamRng::new(2, 0), n);
        let m4 = l.iter().map(|z| z[0].powi(4)).sum::<f64>() / n as f64;
        assert!((m4 / 24.0 - 1.0).abs() < 0.05, "{m4}");
    }

    #[test]
    fn laplace_fourth_moment_by_quadrature() {
        // ∫ z^4 e^{-|z|}/2 dz, independent of the sampler
        let r = crate::quadrature::tanh_sinh_semi_infinite(|z: f64| (4.0 * z.ln() - z).exp(), 0.0, 1e-13);
        assert!((r.value - 24.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn samples_deterministic_per_stream() {
        let m = NoiseModel::laplace(0.5);
        let a = m.sample(&mut StreamRng::new(9, 5), 16);
        let b = m.sample(&mut StreamRng::new(9, 5), 16);
        assert_eq!(a, b);
    }

    #[test]
    fn tilt_examples() {
        let g = NoiseModel::gaussian(1.0).tilt(&[0.7]).unwrap();
        assert!((g.mean()[0] - 0.7).abs() < 1e-8);

        let id = NoiseModel::rademacher().tilt(&[0.0]).unwrap();
        assert_eq!(id.log_weight(&[1.0]), 0.0);
        assert_eq!(id.mean()[0], 0.0);

        let l = NoiseModel::laplace(1.0).tilt(&[0.5]).unwrap();
        let analytic = 2.0 * 0.5 / (1.0 - 0.25);
        assert!((l.mean()[0] - analytic).abs() < 1e-7);
        assert!((l.mean()[0] - 1.3333).abs() < 1e-4);
    }

    #[test]
    fn tilt_domain_errors() {
        let l = NoiseModel::laplace(1.0);
        assert!(matches!(l.tilt(&[1.0]), Err(Error::Domain(_))));
        assert!(l.tilt(&[3.0]).is_err());
    }

    #[test]
    fn tilted_sample_means() {
        let n = 100_000;
        for (m, theta) in [
            (NoiseModel::gaussian(2.0), 0.4),
            (NoiseModel::rademacher(), 0.8),
            (NoiseModel::laplace(1.0), 0.3),
            (NoiseModel::uniform(2.0), -0.9),
        ] {
            let t = m.tilt(&[theta]).unwrap();
            let mut rng = StreamRng::new(17, 1);
            let xs = t.sample(&mut rng, n);
            let mean = xs.iter().map(|z| z[0]).sum::<f64>() / n as f64;
            let var = xs.iter().map(|z| (z[0] - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - t.mean()[0]).abs() < 3.0 * se,
                "{:?}: {mean} vs {}",
                m.kind(),
                t.mean()[0]
            );
        }
    }

    #[test]
    fn analytic_gradients_match_differences() {
        for m in [
            NoiseModel::rademacher(),
            NoiseModel::laplace(0.7),
            NoiseModel::uniform(1.3),
            NoiseModel::gaussian(0.5),
        ] {
            for &u in &[0.01, 0.05, 0.3, -0.9, 1.2] {
                if m.domain(&[u]) != DomainQuery::Interior {
                    continue;
                }
                let mut g = [0.0];
                let mut h = [0.0];
                m.gradient(&[u], &mut g);
                m.hessian(&[u], &mut h);
                let fd = m.fd_gradient(&[u])[0];
                assert!((g[0] - fd).abs() < 1e-7, "{:?} {u}", m.kind());
                let eps = 1e-5;
                let fdh = (m.scalar_grad(u + eps) - m.scalar_grad(u - eps)) / (2.0 * eps);
                assert!((h[0] - fdh).abs() < 1e-6, "{:?} {u}", m.kind());
            }
        }
    }

    #[test]
    fn quadratic_origin_behavior() {
        // |Λ(λ) − ½λΣλ| ≤ C|λ|³ on |λ| ≤ 0.1, with C fitted on a coarse grid
        // and re-checked on a fine grid.
        for m in [
            NoiseModel::rademacher(),
            NoiseModel::laplace(1.0),
            NoiseModel::uniform(1.0),
            NoiseModel::gaussian(1.0),
        ] {
            let cov = m.covariance();
            let excess = |l: f64| (m.value(&[l]) - 0.5 * cov.quad(&[l])).abs() / l.abs().powi(3);
            let c = (1..=10).map(|k| excess(0.01 * k as f64)).fold(0.0, f64::max);
            for k in 1..=1000 {
                let l = 1e-4 * k as f64;
                assert!(excess(l) <= c * 1.01 + 1e-9, "{:?} at {l}", m.kind());
                assert!(excess(-l) <= c * 1.01 + 1e-9);
            }
        }
    }
}
