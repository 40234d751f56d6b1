//! The long-memory Gaussian constant σ², the Riesz-type operator
//! T_θψ(t) = ∫ Σψ(s) |t − s|^{−θ} ds, and the Gaussian rate (G_Σ)*_α.

use nalgebra::{DMatrix, DVector};

use super::GridFunction;
use crate::error::{Error, Result};
use crate::linalg::SymPsd;
use crate::quadrature::tanh_sinh;

const SIGMA2_TOL: f64 = 1e-14;
const RIDGE: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-6;

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("θ must lie in (0, 1), got {theta}")));
    }
    Ok(())
}

/// σ² = (1−α)² ∫ |x+1|^{−α}|x|^{−α} w(x+1) w(x) dx with w = p on [0, ∞)
/// and q on (−∞, 0); computed by quadrature on the three sign regions.
pub fn gaussian_sigma2(alpha: f64, p: f64, q: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Domain(format!("σ² needs 1/2 < α < 1, got {alpha}")));
    }
    if !(p >= 0.0 && q >= 0.0) {
        return Err(Error::invalid("weights p, q must be nonnegative"));
    }
    // x > 0 (and, mirrored, x < −1): ∫_0^∞ x^{−α}(1+x)^{−α} dx
    let near = tanh_sinh(|x: f64| x.powf(-alpha) * (1.0 + x).powf(-alpha), 0.0, 1.0, SIGMA2_TOL);
    // x = 1/u on [1, ∞)
    let far = tanh_sinh(
        |u: f64| u.powf(2.0 * alpha - 2.0) * (1.0 + u).powf(-alpha),
        0.0,
        1.0,
        SIGMA2_TOL,
    );
    let same_sign = near.value + far.value;
    // −1 < x < 0: ∫_0^1 u^{−α}(1−u)^{−α} du, folded at 1/2
    let straddle = 2.0
        * tanh_sinh(|u: f64| u.powf(-alpha) * (1.0 - u).powf(-alpha), 0.0, 0.5, SIGMA2_TOL).value;
    let b = 1.0 - alpha;
    Ok(b * b * ((p * p + q * q) * same_sign + p * q * straddle))
}

/// ∫_c^d |t − s|^{−θ} ds
pub fn riesz_cell_integral(theta: f64, t: f64, c: f64, d: f64) -> f64 {
    let e = 1.0 - theta;
    if t <= c {
        ((d - t).powf(e) - (c - t).powf(e)) / e
    } else if t >= d {
        ((t - c).powf(e) - (t - d).powf(e)) / e
    } else {
        ((t - c).powf(e) + (d - t).powf(e)) / e
    }
}

/// T_θψ(t) for piecewise-constant ψ, by exact per-cell integration.
pub fn riesz_apply(sigma: &SymPsd, theta: f64, psi: &GridFunction, t: f64) -> Result<Vec<f64>> {
    check_theta(theta)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} lies outside [0, 1]")));
    }
    if psi.dim() != sigma.dim() {
        return Err(Error::invalid("ψ dimension does not match Σ"));
    }
    let m = psi.cells();
    let mf = m as f64;
    let d = sigma.dim();
    let mut acc = vec![0.0; d];
    for (j, v) in psi.values().iter().enumerate() {
        let w = riesz_cell_integral(theta, t, j as f64 / mf, (j + 1) as f64 / mf);
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    let mut out = vec![0.0; d];
    sigma.apply(&acc, &mut out);
    Ok(out)
}

fn g2(theta: f64, u: f64) -> f64 {
    u.abs().powf(2.0 - theta) / ((1.0 - theta) * (2.0 - theta))
}

/// ∫_a^b ∫_c^d |t − s|^{−θ} ds dt
pub(crate) fn interval_gram(theta: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    g2(theta, b - c) - g2(theta, a - c) - g2(theta, b - d) + g2(theta, a - d)
}

/// Second difference g(r+1) − 2g(r) + g(r−1) of g(u) = |u|^{2−θ}/((1−θ)(2−θ)),
/// formed from first differences that avoid cancellation.
fn unit_gram(theta: f64, r: usize) -> f64 {
    let beta = 2.0 - theta;
    let norm = (1.0 - theta) * (2.0 - theta);
    if r == 0 {
        return 2.0 / norm;
    }
    let rf = r as f64;
    let up = rf.powf(beta) * (beta * (1.0 / rf).ln_1p()).exp_m1();
    let down = if r == 1 {
        1.0
    } else {
        let l = rf - 1.0;
        l.powf(beta) * (beta * (1.0 / l).ln_1p()).exp_m1()
    };
    (up - down) / norm
}

/// Gram matrix K_jl = ∫_{I_j}∫_{I_l} |t − s|^{−θ} on m equal cells.
pub fn cell_gram(theta: f64, m: usize) -> Result<DMatrix<f64>> {
    check_theta(theta)?;
    let w = (1.0 / m as f64).powf(2.0 - theta);
    let kappa: Vec<f64> = (0..m).map(|r| w * unit_gram(theta, r)).collect();
    Ok(DMatrix::from_fn(m, m, |j, l| kappa[j.abs_diff(l)]))
}

#[derive(Debug, Clone, Copy)]
pub enum GaussianMode<'a> {
    /// Maximize over ψ constant on the cells of φ's grid.
    Variational,
    /// (1/2σ²)(h, T h) for the supplied h, after checking φ = T h on cells.
    ClosedForm(&'a GridFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRate {
    pub value: f64,
    /// Maximizing ψ (variational mode, finite value).
    pub psi: Option<GridFunction>,
    /// Ridge added to a numerically singular Gram matrix.
    pub ridge: Option<f64>,
}

/// (G_Σ)*_α(φ) = sup_ψ (ψ, φ) − (σ²/2)(ψ, T_{2α−1}ψ).
///
/// Values outside the range of Σ on any cell give +∞ (a pseudo-inverse
/// extension of the kernel convention).
pub fn gaussian_rate_alpha(
    sigma: &SymPsd,
    alpha: f64,
    p: f64,
    phi: &GridFunction,
    mode: GaussianMode<'_>,
) -> Result<GaussianRate> {
    let s2 = gaussian_sigma2(alpha, p, 1.0 - p)?;
    let theta = 2.0 * alpha - 1.0;
    let d = sigma.dim();
    if phi.dim() != d {
        return Err(Error::invalid("φ dimension does not match Σ"));
    }
    match mode {
        GaussianMode::Variational => {
            let m = phi.cells();
            if phi.is_zero() {
                return Ok(GaussianRate {
                    value: 0.0,
                    psi: Some(GridFunction::zero(m, d)),
                    ridge: None,
                });
            }
            let big_phi: Vec<Vec<f64>> = (0..m).map(|j| phi.cell_integral(j)).collect();
            let mut pinv = Vec::with_capacity(m);
            for f in &big_phi {
                match sigma.pinv_apply(f) {
                    Some(v) => pinv.push(v),
                    None => {
                        return Ok(GaussianRate {
                            value: f64::INFINITY,
                            psi: None,
                            ridge: None,
                        })
                    }
                }
            }
            let k = cell_gram(theta, m)?;
            let (chol, ridge) = match k.clone().cholesky() {
                Some(c) => (c, None),
                None => {
                    let r = RIDGE * k.trace() / m as f64;
                    let kr = k + DMatrix::identity(m, m) * r;
                    let c = kr.cholesky().ok_or_else(|| {
                        Error::Diagnostic("Gram matrix is singular even after ridge".into())
                    })?;
                    (c, Some(r))
                }
            };
            let mut value = 0.0;
            let mut psi = vec![vec![0.0; d]; m];
            for c in 0..d {
                let rhs = DVector::from_fn(m, |j, _| big_phi[j][c]);
                let y = chol.solve(&rhs);
                for j in 0..m {
                    value += pinv[j][c] * y[j];
                }
                // ψ_j = Σ^+ y_j / σ², assembled per component below
                for j in 0..m {
                    psi[j][c] = y[j];
                }
            }
            for row in psi.iter_mut() {
                let v = sigma.pinv_apply(row).unwrap_or_else(|| vec![0.0; d]);
                *row = v.into_iter().map(|x| x / s2).collect();
            }
            Ok(GaussianRate {
                value: value / (2.0 * s2),
                psi: Some(GridFunction::new(psi)?),
                ridge,
            })
        }
        GaussianMode::ClosedForm(h) => {
            if h.dim() != d {
                return Err(Error::invalid("h dimension does not match Σ"));
            }
            let (mh, mp) = (h.cells() as f64, phi.cells() as f64);
            // cell averages of T h on φ's grid
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..phi.cells() {
                let (a, b) = (j as f64 / mp, (j + 1) as f64 / mp);
                let mut acc = vec![0.0; d];
                for (l, hv) in h.values().iter().enumerate() {
                    let g = interval_gram(theta, a, b, l as f64 / mh, (l + 1) as f64 / mh);
                    for (x, y) in acc.iter_mut().zip(hv) {
                        *x += g * y;
                    }
                }
                let mut th = vec![0.0; d];
                sigma.apply(&acc, &mut th);
                for (t, f) in th.iter().zip(&phi.values()[j]) {
                    worst = worst.max((t * mp - f).abs());
                    scale = scale.max(f.abs());
                }
            }
            if worst > RESIDUAL_TOL * scale.max(1.0) {
                return Err(Error::invalid(format!(
                    "φ differs from T h by {worst:.3e} on the grid"
                )));
            }
            let mut quad = 0.0;
            for (j, hj) in h.values().iter().enumerate() {
                let mut sh = vec![0.0; d];
                for (l, hl) in h.values().iter().enumerate() {
                    let g = interval_gram(
                        theta,
                        j as f64 / mh,
                        (j + 1) as f64 / mh,
                        l as f64 / mh,
                        (l + 1) as f64 / mh,
                    );
                    for (x, y) in sh.iter_mut().zip(hl) {
                        *x += g * y;
                    }
                }
                let mut ssh = vec![0.0; d];
                sigma.apply(&sh, &mut ssh);
                quad += hj.iter().zip(&ssh).map(|(a, b)| a * b).sum::<f64>();
            }
            Ok(GaussianRate {
                value: quad / (2.0 * s2),
                psi: None,
                ridge: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    fn beta_sigma2(alpha: f64, p: f64) -> f64 {
        let q = 1.0 - p;
        (1.0 - alpha).powi(2)
            * ((p * p + q * q) * beta(1.0 - alpha, 2.0 * alpha - 1.0) + p * q * beta(1.0 - alpha, 1.0 - alpha))
    }

    #[test]
    fn sigma2_beta_identity() {
        let s = gaussian_sigma2(0.75, 1.0, 0.0).unwrap();
        assert!((s / beta_sigma2(0.75, 1.0) - 1.0).abs() < 1e-12, "{s}");
        assert!((s - 0.327757).abs() < 1e-6);
        for &(a, p) in &[(0.6, 0.5), (0.95, 0.3), (0.55, 0.9)] {
            let s = gaussian_sigma2(a, p, 1.0 - p).unwrap();
            assert!((s / beta_sigma2(a, p) - 1.0).abs() < 1e-10, "α={a}");
        }
    }

    #[test]
    fn sigma2_sign_expansion() {
        // w(x) = ½ everywhere gives ¼ of the unweighted integral, which is the
        // sum of the p²-, q²- and pq-region pieces at p = q = 1
        let half = gaussian_sigma2(0.7, 0.5, 0.5).unwrap();
        let unweighted = gaussian_sigma2(0.7, 1.0, 1.0).unwrap();
        assert!((half - 0.25 * unweighted).abs() < 1e-14);
        let pp = gaussian_sigma2(0.7, 1.0, 0.0).unwrap();
        let pq = unweighted - 2.0 * pp;
        assert!((half - (0.25 * 2.0 * pp + 0.25 * pq)).abs() < 1e-14);
    }

    #[test]
    fn sigma2_decreases_in_alpha() {
        assert!(gaussian_sigma2(0.9, 1.0, 0.0).unwrap() < gaussian_sigma2(0.75, 1.0, 0.0).unwrap());
    }

    #[test]
    fn riesz_constant_closed_form() {
        let s = SymPsd::identity_scaled(1, 1.0);
        let c = 1.3;
        let psi = GridFunction::constant(7, vec![c]);
        for &(theta, t) in &[(0.5, 0.5), (0.3, 0.1), (0.8, 1.0), (0.5, 0.0)] {
            let got = riesz_apply(&s, theta, &psi, t).unwrap()[0];
            let want = c * (t.powf(1.0 - theta) + (1.0 - t).powf(1.0 - theta)) / (1.0 - theta);
            assert!((got - want).abs() < 1e-13, "{got} {want}");
        }
        let one = GridFunction::constant(3, vec![1.0]);
        let v = riesz_apply(&s, 0.5, &one, 0.5).unwrap()[0];
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-13);
        assert_eq!(riesz_apply(&s, 0.5, &GridFunction::zero(4, 1), 0.3).unwrap(), vec![0.0]);
        assert!(matches!(riesz_apply(&s, 0.5, &one, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn gram_sums_to_double_integral() {
        for &theta in &[0.2, 0.5, 0.9] {
            let k = cell_gram(theta, 64).unwrap();
            let total: f64 = k.iter().sum();
            let want = 2.0 / ((1.0 - theta) * (2.0 - theta));
            assert!((total / want - 1.0).abs() < 1e-12, "{total} {want}");
            let direct = interval_gram(theta, 3.0 / 64.0, 4.0 / 64.0, 40.0 / 64.0, 41.0 / 64.0);
            assert!((k[(3, 40)] / direct - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rate_zero_and_degenerate() {
        let s = SymPsd::identity_scaled(1, 1.0);
        let r = gaussian_rate_alpha(&s, 0.75, 1.0, &GridFunction::zero(8, 1), GaussianMode::Variational).unwrap();
        assert_eq!(r.value, 0.0);
        let sd = SymPsd::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let phi = GridFunction::constant(16, vec![0.0, 1.0]);
        let r = gaussian_rate_alpha(&sd, 0.75, 1.0, &phi, GaussianMode::Variational).unwrap();
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn closed_form_and_variational_agree() {
        let alpha = 0.75;
        let theta = 0.5;
        let s = SymPsd::identity_scaled(1, 1.0);
        let s2 = gaussian_sigma2(alpha, 1.0, 0.0).unwrap();
        let h = GridFunction::constant(1, vec![1.0]);
        let phi = GridFunction::cell_averages(64, 1, |t| {
            vec![(t.powf(1.0 - theta) + (1.0 - t).powf(1.0 - theta)) / (1.0 - theta)]
        });
        let closed = gaussian_rate_alpha(&s, alpha, 1.0, &phi, GaussianMode::ClosedForm(&h)).unwrap();
        assert!((closed.value - (8.0 / 3.0) / (2.0 * s2)).abs() < 1e-12);
        let var = gaussian_rate_alpha(&s, alpha, 1.0, &phi, GaussianMode::Variational).unwrap();
        assert!((var.value / closed.value - 1.0).abs() < 1e-9);
        let psi = var.psi.unwrap();
        assert!(psi.values().iter().all(|v| (v[0] - 1.0 / s2).abs() < 1e-6));
    }

    #[test]
    fn closed_form_rejects_mismatched_phi() {
        let s = SymPsd::identity_scaled(1, 1.0);
        let h = GridFunction::constant(1, vec![1.0]);
        let phi = GridFunction::constant(8, vec![1.0]);
        assert!(gaussian_rate_alpha(&s, 0.75, 1.0, &phi, GaussianMode::ClosedForm(&h)).is_err());
    }

    #[test]
    fn refinement_increases_for_nonrepresentable_h() {
        // h(t) = t is not piecewise constant on any grid
        let alpha = 0.7;
        let theta = 2.0 * alpha - 1.0;
        let s = SymPsd::identity_scaled(1, 1.0);
        let th = |t: f64| {
            // ∫_0^1 s |t − s|^{−θ} ds
            let e = 1.0 - theta;
            let a = t.powf(2.0 - theta) / e - t.powf(2.0 - theta) / (2.0 - theta);
            let b = t * (1.0 - t).powf(e) / e + (1.0 - t).powf(2.0 - theta) / (2.0 - theta);
            vec![a + b]
        };
        let mut last = 0.0;
        for m in [4, 16, 64, 256] {
            let phi = GridFunction::cell_averages(m, 1, th);
            let v = gaussian_rate_alpha(&s, alpha, 1.0, &phi, GaussianMode::Variational).unwrap().value;
            assert!(v >= last - 1e-12);
            last = v;
        }
        let s2 = gaussian_sigma2(alpha, 1.0, 0.0).unwrap();
        let closed = tanh_sinh(|t| t * th(t)[0], 0.0, 1.0, 1e-13).value / (2.0 * s2);
        assert!(last <= closed * (1.0 + 1e-12));
        assert!((last / closed - 1.0).abs() < 1e-3, "{last} {closed}");
    }
}
