//! Normalizers a_n, speeds b_n and the implicit sequence γ_n for the
//! short-memory (S1–S4) and long-memory (R1–R4) scenarios, plus the
//! balanced-regular-variation data (β, τ, ζ) of Λ.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::linalg::SymPsd;
use crate::noise::NoiseModel;
use crate::potential::Potential;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type SphereFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Tau {
    /// τ(t) = c t^β
    Power { coefficient: f64 },
    Custom(ScalarFn),
}

#[derive(Clone)]
pub enum Zeta {
    Constant(f64),
    /// ζ(u) = ½ u·Σu
    Quadratic(SymPsd),
    Custom(SphereFn),
}

#[derive(Clone)]
pub struct LambdaRV {
    beta: f64,
    dim: usize,
    tau: Tau,
    zeta: Zeta,
}

impl fmt::Debug for LambdaRV {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tau = match &self.tau {
            Tau::Power { coefficient } => format!("{coefficient}·t^{}", self.beta),
            Tau::Custom(_) => "custom".into(),
        };
        let zeta = match &self.zeta {
            Zeta::Constant(c) => format!("const {c}"),
            Zeta::Quadratic(_) => "quadratic".into(),
            Zeta::Custom(_) => "custom".into(),
        };
        f.debug_struct("LambdaRV")
            .field("beta", &self.beta)
            .field("dim", &self.dim)
            .field("tau", &tau)
            .field("zeta", &zeta)
            .finish()
    }
}

impl LambdaRV {
    pub fn new(beta: f64, dim: usize, tau: Tau, zeta: Zeta) -> Result<Self> {
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::invalid("regular-variation exponent β must exceed 1"));
        }
        if dim == 0 || dim > crate::noise::MAX_DIM {
            return Err(Error::invalid("dimension must be 1..=3"));
        }
        if let Tau::Power { coefficient } = tau {
            if !(coefficient > 0.0) {
                return Err(Error::invalid("τ coefficient must be positive"));
            }
        }
        match &zeta {
            Zeta::Constant(c) if !(*c >= 0.0) => {
                return Err(Error::invalid("ζ must be nonnegative"));
            }
            Zeta::Quadratic(s) if s.dim() != dim => {
                return Err(Error::invalid("ζ covariance size does not match dim"));
            }
            _ => {}
        }
        Ok(Self { beta, dim, tau, zeta })
    }

    /// τ(t) = t², ζ(u) = ½u·Σu: the data of the Gaussian log-MGF.
    pub fn gaussian(sigma: SymPsd) -> Self {
        let dim = sigma.dim();
        Self {
            beta: 2.0,
            dim,
            tau: Tau::Power { coefficient: 1.0 },
            zeta: Zeta::Quadratic(sigma),
        }
    }

    /// τ(t) = t^β, constant ζ.
    pub fn power(beta: f64, zeta: f64, dim: usize) -> Result<Self> {
        Self::new(beta, dim, Tau::Power { coefficient: 1.0 }, Zeta::Constant(zeta))
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau_kind(&self) -> &Tau {
        &self.tau
    }

    pub fn zeta_kind(&self) -> &Zeta {
        &self.zeta
    }

    pub fn tau(&self, t: f64) -> f64 {
        match &self.tau {
            Tau::Power { coefficient } => coefficient * t.powf(self.beta),
            Tau::Custom(f) => f(t),
        }
    }

    /// ζ at a unit vector.
    pub fn zeta(&self, u: &[f64]) -> f64 {
        match &self.zeta {
            Zeta::Constant(c) => *c,
            Zeta::Quadratic(s) => 0.5 * s.quad(u),
            Zeta::Custom(f) => f(u),
        }
    }

    /// Λ^h(λ) = ζ(λ/|λ|) |λ|^β, zero at the origin.
    pub fn lambda_h(&self, lambda: &[f64]) -> f64 {
        let r = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let u: Vec<f64> = lambda.iter().map(|v| v / r).collect();
        self.zeta(&u) * r.powf(self.beta)
    }
}

impl Potential for LambdaRV {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.lambda_h(u)
    }

    fn label(&self) -> &'static str {
        "lambda_h"
    }
}

const RV_FIT_T: [f64; 9] = [1e2, 3.16e2, 1e3, 3.16e3, 1e4, 3.16e4, 1e5, 3.16e5, 1e6];
const RV_BETA_MIN_MARGIN: f64 = 1e-2;
const RV_AGREEMENT: f64 = 1e-2;

fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut u = vec![0.0; dim];
            u[i] = s;
            out.push(u);
        }
    }
    if dim > 1 {
        let c = 1.0 / (dim as f64).sqrt();
        out.push(vec![c; dim]);
        out.push(vec![-c; dim]);
    }
    out
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fits (β, ζ) for a noise law with `F_Λ = R^d` from the growth of Λ along
/// rays; rejects laws whose growth is not superlinear or not balanced.
pub fn rv_of_lambda(model: &NoiseModel) -> Result<LambdaRV> {
    if !model.has_full_domain() {
        return Err(Error::Domain(
            "log-MGF has a bounded effective domain; no regular variation at infinity".into(),
        ));
    }
    let dim = model.dim();
    let logs: Vec<f64> = RV_FIT_T.iter().map(|t| t.ln()).collect();
    let mut betas = Vec::new();
    for u in probe_directions(dim) {
        let ys: Vec<f64> = RV_FIT_T
            .iter()
            .map(|&t| {
                let l: Vec<f64> = u.iter().map(|v| v * t).collect();
                model.logmgf(&l).map(|v| v.max(f64::MIN_POSITIVE).ln())
            })
            .collect::<Result<_>>()?;
        betas.push(fit_slope(&logs, &ys));
    }
    let bmin = betas.iter().cloned().fold(f64::INFINITY, f64::min);
    let bmax = betas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if bmin < 1.0 + RV_BETA_MIN_MARGIN {
        return Err(Error::Scenario(format!(
            "fitted growth exponent {bmin:.4} is not above 1"
        )));
    }
    if (bmax - bmin) / bmin > RV_AGREEMENT {
        return Err(Error::Scenario(format!(
            "directional exponents disagree: {bmin:.4} vs {bmax:.4}"
        )));
    }
    let beta = betas.iter().sum::<f64>() / betas.len() as f64;
    let t_ref = *RV_FIT_T.last().expect("non-empty");
    let noise = model.clone();
    let zeta: SphereFn = Arc::new(move |u: &[f64]| {
        let l: Vec<f64> = u.iter().map(|v| v * t_ref).collect();
        noise.logmgf(&l).unwrap_or(f64::INFINITY) / t_ref.powf(beta)
    });
    LambdaRV::new(beta, dim, Tau::Power { coefficient: 1.0 }, Zeta::Custom(zeta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioTag {
    S1,
    S2,
    S3,
    S4,
    R1,
    R2,
    R3,
    R4,
}

impl ScenarioTag {
    pub fn is_long_memory(self) -> bool {
        matches!(self, Self::R1 | Self::R2 | Self::R3 | Self::R4)
    }

    /// Large-deviation scenarios with `b_n = n`.
    pub fn is_large(self) -> bool {
        matches!(self, Self::S1 | Self::S2 | Self::R1 | Self::R2)
    }

    pub fn is_moderate(self) -> bool {
        matches!(self, Self::S3 | Self::R3)
    }

    pub fn is_huge(self) -> bool {
        matches!(self, Self::S4 | Self::R4)
    }
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for ScenarioTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "S1" => Self::S1,
            "S2" => Self::S2,
            "S3" => Self::S3,
            "S4" => Self::S4,
            "R1" => Self::R1,
            "R2" => Self::R2,
            "R3" => Self::R3,
            "R4" => Self::R4,
            _ => return Err(Error::Scenario(format!("unknown scenario tag {s:?}"))),
        })
    }
}

const PROBE_LO: u64 = 1 << 10;
const PROBE_HI: u64 = 1 << 20;
const GAMMA_MAX_STEPS: usize = 400;

/// A scenario bundles the noise, the coefficients, the normalizer
/// `a_n = n^ρ Ψ_n^κ` and, for S4/R4, the regular-variation data of Λ.
#[derive(Debug, Clone)]
pub struct Scenario {
    tag: ScenarioTag,
    noise: NoiseModel,
    coeffs: CoefficientModel,
    rho: f64,
    kappa: f64,
    lambda_rv: Option<LambdaRV>,
}

impl Scenario {
    /// Scenario with its canonical normalizer (`a_n = n` or `nΨ_n`).
    /// S3/R3/S4/R4 need an explicit exponent; use [`Scenario::with_exponents`].
    pub fn standard(tag: ScenarioTag, noise: NoiseModel, coeffs: CoefficientModel) -> Result<Self> {
        let (rho, kappa) = match tag {
            ScenarioTag::S1 | ScenarioTag::S2 => (1.0, 0.0),
            ScenarioTag::R1 | ScenarioTag::R2 => (1.0, 1.0),
            _ => {
                return Err(Error::Scenario(format!(
                    "{tag} needs an explicit normalizer exponent"
                )))
            }
        };
        Self::with_exponents(tag, noise, coeffs, rho, kappa, None)
    }

    pub fn with_exponents(
        tag: ScenarioTag,
        noise: NoiseModel,
        coeffs: CoefficientModel,
        rho: f64,
        kappa: f64,
        lambda_rv: Option<LambdaRV>,
    ) -> Result<Self> {
        if !rho.is_finite() || !kappa.is_finite() {
            return Err(Error::Scenario("normalizer exponents must be finite".into()));
        }
        if tag.is_long_memory() != coeffs.is_long_memory() {
            return Err(Error::Scenario(format!(
                "{tag} requires {} coefficients",
                if tag.is_long_memory() { "long-memory" } else { "short-memory" }
            )));
        }
        if !tag.is_long_memory() && kappa != 0.0 {
            return Err(Error::Scenario("Ψ_n factors only apply to long memory".into()));
        }
        if matches!(tag, ScenarioTag::S2 | ScenarioTag::R2) && !noise.has_full_domain() {
            return Err(Error::Scenario(format!(
                "{tag} needs a log-MGF finite on all of R^d"
            )));
        }
        if tag.is_huge() {
            match &lambda_rv {
                None => {
                    return Err(Error::Scenario(format!(
                        "{tag} requires regular-variation data for Λ"
                    )))
                }
                Some(rv) if rv.dim != noise.dim() => {
                    return Err(Error::Scenario("regular-variation data dimension mismatch".into()))
                }
                _ => {}
            }
        }
        let s = Self {
            tag,
            noise,
            coeffs,
            rho,
            kappa,
            lambda_rv,
        };
        s.check_window()?;
        Ok(s)
    }

    fn check_window(&self) -> Result<()> {
        let (rho, kappa) = (self.rho, self.kappa);
        let bad = |what: &str| {
            Err(Error::Scenario(format!(
                "normalizer n^{rho}·Ψ_n^{kappa} is outside the {} window: {what}",
                self.tag
            )))
        };
        match self.tag {
            ScenarioTag::S1 | ScenarioTag::S2 => {
                if rho != 1.0 {
                    return bad("a_n must equal n");
                }
            }
            ScenarioTag::R1 | ScenarioTag::R2 => {
                if rho != 1.0 || kappa != 1.0 {
                    return bad("a_n must equal nΨ_n");
                }
            }
            ScenarioTag::S3 => {
                if !(rho > 0.5 && rho < 1.0) {
                    return bad("need 1/2 < ρ < 1");
                }
            }
            ScenarioTag::S4 => {
                if !(rho > 1.0) {
                    return bad("need ρ > 1");
                }
            }
            ScenarioTag::R3 => {
                // a_n / (√n Ψ_n) must grow and a_n / (nΨ_n) must decay
                let lo = self.ratio_probe(PROBE_LO)?;
                let hi = self.ratio_probe(PROBE_HI)?;
                if !(hi.0 > lo.0) {
                    return bad("a_n/(√n Ψ_n) does not grow");
                }
                if !(hi.1 < lo.1) {
                    return bad("a_n/(nΨ_n) does not decay");
                }
            }
            ScenarioTag::R4 => {
                let lo = self.ratio_probe(PROBE_LO)?;
                let hi = self.ratio_probe(PROBE_HI)?;
                if !(hi.1 > lo.1) {
                    return bad("a_n/(nΨ_n) does not grow");
                }
            }
        }
        Ok(())
    }

    fn ratio_probe(&self, n: u64) -> Result<(f64, f64)> {
        let a = self.normalizer(n)?;
        let psi = self.coeffs.psi_partial(n)?;
        let nf = n as f64;
        Ok((a / (nf.sqrt() * psi), a / (nf * psi)))
    }

    pub fn tag(&self) -> ScenarioTag {
        self.tag
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn coeffs(&self) -> &CoefficientModel {
        &self.coeffs
    }

    pub fn exponents(&self) -> (f64, f64) {
        (self.rho, self.kappa)
    }

    pub fn lambda_rv(&self) -> Option<&LambdaRV> {
        self.lambda_rv.as_ref()
    }

    fn psi_n(&self, n: u64) -> Result<f64> {
        self.coeffs.psi_partial(n)
    }

    /// a_n = n^ρ Ψ_n^κ
    pub fn normalizer(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        let nf = n as f64;
        let base = if self.rho == 1.0 { nf } else { nf.powf(self.rho) };
        if self.kappa == 0.0 {
            return Ok(base);
        }
        let psi = self.psi_n(n)?;
        Ok(if self.kappa == 1.0 {
            base * psi
        } else {
            base * psi.powf(self.kappa)
        })
    }

    pub fn speed(&self, n: u64) -> Result<f64> {
        let nf = n as f64;
        match self.tag {
            ScenarioTag::S1 | ScenarioTag::S2 | ScenarioTag::R1 | ScenarioTag::R2 => {
                if n == 0 {
                    return Err(Error::invalid("n must be positive"));
                }
                Ok(nf)
            }
            ScenarioTag::S3 => {
                let a = self.normalizer(n)?;
                Ok(a * a / nf)
            }
            ScenarioTag::R3 => {
                let a = self.normalizer(n)?;
                let psi = self.psi_n(n)?;
                Ok(a * a / (nf * psi * psi))
            }
            ScenarioTag::S4 => {
                let g = self.gamma(n)?;
                Ok(nf * self.rv()?.tau(g))
            }
            ScenarioTag::R4 => {
                let g = self.gamma(n)?;
                let psi = self.psi_n(n)?;
                Ok(nf * self.rv()?.tau(psi * g))
            }
        }
    }

    fn rv(&self) -> Result<&LambdaRV> {
        self.lambda_rv
            .as_ref()
            .ok_or_else(|| Error::Scenario("regular-variation data missing".into()))
    }

    /// γ_n = sup{x : τ(s x)/x ≤ a_n/n}, with s = 1 (S4) or s = Ψ_n (R4).
    pub fn gamma(&self, n: u64) -> Result<f64> {
        let scale = match self.tag {
            ScenarioTag::S4 => 1.0,
            ScenarioTag::R4 => self.psi_n(n)?,
            _ => {
                return Err(Error::Scenario(format!(
                    "γ_n is only defined for S4 and R4, not {}",
                    self.tag
                )))
            }
        };
        let rv = self.rv()?;
        let target = self.normalizer(n)? / n as f64;
        solve_gamma(|x| rv.tau(scale * x), target)
    }
}

/// sup{x > 0 : τ(x)/x ≤ c} by geometric bracketing from [1, 4] and
/// bisection down to adjacent floating-point numbers.
pub fn solve_gamma<F: Fn(f64) -> f64>(tau: F, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("a_n/n must be positive and finite"));
    }
    let ratio = |x: f64| tau(x) / x;
    let not_increasing = |x: f64| {
        Error::Diagnostic(format!(
            "τ(x)/x is not increasing near x = {x:.3e}; the β > 1 premise fails"
        ))
    };
    let (mut lo, mut hi) = (1.0f64, 4.0f64);
    let (mut r_lo, mut r_hi) = (ratio(lo), ratio(hi));
    if !(r_hi > r_lo) {
        return Err(not_increasing(lo));
    }
    let mut steps = 0;
    while r_lo > c {
        steps += 1;
        if steps > GAMMA_MAX_STEPS || lo < 1e-300 {
            return Err(not_increasing(lo));
        }
        hi = lo;
        r_hi = r_lo;
        lo /= 4.0;
        r_lo = ratio(lo);
        if !(r_lo < r_hi) {
            return Err(not_increasing(lo));
        }
    }
    while r_hi <= c {
        steps += 1;
        if steps > GAMMA_MAX_STEPS || !r_hi.is_finite() {
            return Err(not_increasing(hi));
        }
        lo = hi;
        r_lo = r_hi;
        hi *= 4.0;
        r_hi = ratio(hi);
        if !(r_hi > r_lo) {
            return Err(not_increasing(hi));
        }
    }
    // invariant: ratio(lo) <= c < ratio(hi)
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio(mid) <= c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
