//! Truncated feasibility check for the Π sets of admissible levels.

use serde::Serialize;

use super::PartitionLevels;
use crate::coefficients::{CoefficientModel, WindowSumTable};
use crate::error::{Error, Result};
use crate::noise::{DomainQuery, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PiVerdict {
    /// No violation for 1 ≤ n ≤ n_max, |j| ≤ j_max. Not a proof of membership.
    FeasibleUpTo { n_max: u64, j_max: i64 },
    /// The windowed argument of Λ left the domain at (n, j).
    InfeasibleAt { n: u64, j: i64 },
    /// A level condition fails; `level` is the 0-based index of λ_i.
    DomainViolation { level: usize },
}

impl PiVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            PiVerdict::FeasibleUpTo { .. } => "FeasibleUpTo",
            PiVerdict::InfeasibleAt { .. } => "InfeasibleAt",
            PiVerdict::DomainViolation { .. } => "DomainViolation",
        }
    }
}

/// Scans Λ(c_n Σ_i λ_i φ_{j+[nt_{i−1}], [nt_i]−[nt_{i−1}]}) over
/// 1 ≤ n ≤ `n_max`, |j| ≤ `j_max`, with c_n = 1 in short memory and 1/Ψ_n
/// in long memory, then checks the level conditions: λ_i ∈ F_Λ° (short
/// memory, α = 1), or (p∧q)λ_i ∈ F_Λ° checked before the scan (α < 1).
pub fn pi_membership(
    noise: &NoiseModel,
    coeffs: &CoefficientModel,
    pl: &PartitionLevels,
    n_max: u64,
    j_max: i64,
) -> Result<PiVerdict> {
    if pl.dim() != noise.dim() {
        return Err(Error::invalid("level dimension does not match the noise"));
    }
    if n_max == 0 || j_max < 0 {
        return Err(Error::invalid("truncation parameters must be positive"));
    }
    let feasible = PiVerdict::FeasibleUpTo { n_max, j_max };
    if noise.has_full_domain() {
        return Ok(feasible);
    }
    let interior = |l: &[f64]| noise.domain(l) == DomainQuery::Interior;
    let long = coeffs.long_params().ok();
    if let Some((alpha, p, q)) = long {
        if alpha < 1.0 {
            let c = p.min(q);
            for (i, l) in pl.levels().iter().enumerate() {
                let scaled: Vec<f64> = l.iter().map(|v| c * v).collect();
                if !interior(&scaled) {
                    return Ok(PiVerdict::DomainViolation { level: i });
                }
            }
        }
    }

    let table = WindowSumTable::new(coeffs);
    let d = pl.dim();
    let k = pl.k();
    let mut arg = vec![0.0; d];
    let mut psi_n = 0.0;
    for n in 1..=n_max {
        let scale = if long.is_some() {
            psi_n += coeffs.psi(n as f64)?;
            1.0 / psi_n
        } else {
            1.0
        };
        let nf = n as f64;
        let cuts: Vec<i64> = (0..=k).map(|i| (nf * pl.t(i)).floor() as i64).collect();
        for j in -j_max..=j_max {
            arg.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..k {
                let len = cuts[i + 1] - cuts[i];
                if len == 0 {
                    continue;
                }
                let wsum = table.window_sum_clamped(j + cuts[i], len) * scale;
                for (a, l) in arg.iter_mut().zip(&pl.levels()[i]) {
                    *a += l * wsum;
                }
            }
            if !interior(&arg) {
                return Ok(PiVerdict::InfeasibleAt { n, j });
            }
        }
    }

    if long.is_none_or(|(alpha, _, _)| alpha == 1.0) {
        for (i, l) in pl.levels().iter().enumerate() {
            if !interior(l) {
                return Ok(PiVerdict::DomainViolation { level: i });
            }
        }
    }
    Ok(feasible)
}
