//! Coefficient sequences φ_i, windowed sums φ_{i,n} = φ_{i+1} + … + φ_{i+n},
//! and the long-memory normalizers ψ(n), Ψ_n.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// φ_i ∝ ρ^{|i|}, normalized over the whole line.
    Geometric { rho: f64 },
    /// Explicit `(index, value)` pairs, normalized to sum one.
    FiniteSupport { entries: Vec<(i64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowlyVarying {
    None,
    /// L(x) = (log x)^c
    LogPower(f64),
}

impl SlowlyVarying {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowlyVarying::None => 1.0,
            SlowlyVarying::LogPower(c) => {
                if x <= 1.0 {
                    0.0
                } else {
                    x.ln().powf(c)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    ShortMemory(Generator),
    /// φ_i = p ψ(i) for i ≥ 1, φ_0 = p, φ_{-i} = q ψ(i), ψ(x) = x^{-α} L(x).
    LongMemory {
        alpha: f64,
        p: f64,
        slowly_varying: SlowlyVarying,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    regime: Regime,
    radius: i64,
    /// Normalizing constant (short memory) or 1.
    scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvReport {
    pub ratio: f64,
    pub target: f64,
    pub rel_error: f64,
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.hi + x;
        if self.hi.abs() >= x.abs() {
            self.lo += (self.hi - t) + x;
        } else {
            self.lo += (x - t) + self.hi;
        }
        self.hi = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.hi + self.lo
    }

    fn diff(&self, other: &Compensated) -> f64 {
        (self.hi - other.hi) + (self.lo - other.lo)
    }
}

impl CoefficientModel {
    pub fn short_memory(generator: Generator, radius: i64) -> Result<Self> {
        if radius < 0 {
            return Err(Error::invalid("truncation radius must be nonnegative"));
        }
        let scale = match &generator {
            Generator::Geometric { rho } => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::invalid("geometric rate must lie in (0, 1)"));
                }
                (1.0 - rho) / (1.0 + rho)
            }
            Generator::FiniteSupport { entries } => {
                if entries.is_empty() {
                    return Err(Error::invalid("finite support needs at least one entry"));
                }
                if let Some((i, _)) = entries.iter().find(|(i, _)| i.abs() > radius) {
                    return Err(Error::OutOfRange {
                        index: *i,
                        radius,
                        hint: "raise the truncation radius A".into(),
                    });
                }
                let s: f64 = entries.iter().map(|(_, v)| v).sum();
                if !s.is_finite() || s.abs() < 1e-300 {
                    return Err(Error::invalid("finite-support coefficients must have nonzero sum"));
                }
                1.0 / s
            }
        };
        Ok(Self {
            regime: Regime::ShortMemory(generator),
            radius,
            scale,
        })
    }

    pub fn long_memory(alpha: f64, p: f64, slowly_varying: SlowlyVarying, radius: i64) -> Result<Self> {
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(Error::invalid("long-memory exponent must lie in (1/2, 1]"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("weight p must lie in [0, 1]"));
        }
        if radius < 1 {
            return Err(Error::invalid("truncation radius must be positive"));
        }
        Ok(Self {
            regime: Regime::LongMemory {
                alpha,
                p,
                slowly_varying,
            },
            radius,
            scale: 1.0,
        })
    }

    pub fn identity(radius: i64) -> Self {
        Self::short_memory(
            Generator::FiniteSupport {
                entries: vec![(0, 1.0)],
            },
            radius,
        )
        .expect("identity filter is valid")
    }

    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn with_radius(&self, radius: i64) -> Result<Self> {
        match &self.regime {
            Regime::ShortMemory(g) => Self::short_memory(g.clone(), radius),
            Regime::LongMemory {
                alpha,
                p,
                slowly_varying,
            } => Self::long_memory(*alpha, *p, *slowly_varying, radius),
        }
    }

    pub fn is_long_memory(&self) -> bool {
        matches!(self.regime, Regime::LongMemory { .. })
    }

    /// `(α, p, q)` for long memory.
    pub fn long_params(&self) -> Result<(f64, f64, f64)> {
        match self.regime {
            Regime::LongMemory { alpha, p, .. } => Ok((alpha, p, 1.0 - p)),
            _ => Err(Error::Regime {
                expected: "long-memory",
            }),
        }
    }

    /// ψ(x) = x^{-α} L(x) for real `x > 0`.
    pub fn psi(&self, x: f64) -> Result<f64> {
        match self.regime {
            Regime::LongMemory {
                alpha,
                slowly_varying,
                ..
            } => Ok(x.powf(-alpha) * slowly_varying.eval(x)),
            _ => Err(Error::Regime {
                expected: "long-memory",
            }),
        }
    }

    /// φ_i ignoring the truncation radius.
    pub fn phi_untruncated(&self, i: i64) -> f64 {
        match &self.regime {
            Regime::ShortMemory(Generator::Geometric { rho }) => {
                self.scale * rho.powi(i.unsigned_abs().min(i32::MAX as u64) as i32)
            }
            Regime::ShortMemory(Generator::FiniteSupport { entries }) => {
                self.scale * entries.iter().filter(|(j, _)| *j == i).fold(0.0, |acc, (_, v)| acc + v)
            }
            Regime::LongMemory {
                alpha,
                p,
                slowly_varying,
            } => {
                let w = if i >= 0 { *p } else { 1.0 - p };
                if i == 0 {
                    w
                } else {
                    let x = i.unsigned_abs() as f64;
                    w * x.powf(-alpha) * slowly_varying.eval(x)
                }
            }
        }
    }

    pub fn phi(&self, i: i64) -> Result<f64> {
        if i.abs() > self.radius {
            return Err(Error::OutOfRange {
                index: i,
                radius: self.radius,
                hint: "raise the truncation radius A".into(),
            });
        }
        Ok(self.phi_untruncated(i))
    }

    /// Ψ_n = Σ_{1≤i≤n} ψ(i), compensated.
    pub fn psi_partial(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("Ψ_n needs n >= 1"));
        }
        match self.regime {
            Regime::LongMemory {
                alpha,
                slowly_varying,
                ..
            } => {
                let mut acc = Compensated::default();
                // summing small terms first
                for i in (1..=n).rev() {
                    let x = i as f64;
                    acc.add(x.powf(-alpha) * slowly_varying.eval(x));
                }
                Ok(acc.value())
            }
            _ => Err(Error::Regime {
                expected: "long-memory",
            }),
        }
    }

    /// Compares ψ(nx)/ψ(n) with x^{-α}.
    pub fn rv_diagnostic(&self, x: f64, n: u64) -> Result<RvReport> {
        let (alpha, _, _) = self.long_params()?;
        if !(x > 0.0) {
            return Err(Error::invalid("x must be positive"));
        }
        let nx = n as f64 * x;
        let ratio = if x == 1.0 {
            1.0
        } else {
            self.psi(nx)? / self.psi(n as f64)?
        };
        let target = x.powf(-alpha);
        Ok(RvReport {
            ratio,
            target,
            rel_error: (ratio - target).abs() / target,
        })
    }

    /// Σ_{|i|≤A} |φ_i|
    pub fn abs_sum(&self) -> f64 {
        let mut acc = Compensated::default();
        for i in -self.radius..=self.radius {
            acc.add(self.phi_untruncated(i).abs());
        }
        acc.value()
    }

    /// Analytic estimate of the coefficient mass dropped by truncating at
    /// `A` in a sum of squared windows of length `n`: for long memory
    /// `n² (p² + q²) ψ(A)² A / (2α − 1)`; geometric tails for short memory.
    pub fn square_tail_bound(&self, n: u64) -> f64 {
        let a = self.radius as f64;
        let n = n as f64;
        match &self.regime {
            Regime::LongMemory { alpha, p, .. } => {
                let q = 1.0 - p;
                let psi_a = self.psi(a.max(1.0)).unwrap_or(0.0);
                n * n * (p * p + q * q) * psi_a * psi_a * a / (2.0 * alpha - 1.0)
            }
            Regime::ShortMemory(Generator::Geometric { rho }) => {
                // every window picks up at most the geometric tail mass
                let tail = 2.0 * self.scale * rho.powf(a + 1.0) / (1.0 - rho);
                tail * tail * (n + 2.0 * a) + 2.0 * tail * n
            }
            Regime::ShortMemory(Generator::FiniteSupport { .. }) => 0.0,
        }
    }

    /// Σ_l (φ^{(A)}_{l,n})² over every window of the truncated sequence
    /// (φ_i = 0 for |i| > A): the variance of S_n for unit-variance noise.
    /// Streams over the coefficients with O(n) memory.
    pub fn truncated_square_sum(&self, n: u64) -> f64 {
        let n = n as usize;
        let a = self.radius;
        let coeffs = (2 * a + 1) as usize;
        // ring holds prefix values P(k-n..=k); unwritten slots are P(j <= 0) = 0
        let len = n + 1;
        let mut ring = vec![Compensated::default(); len];
        let mut prefix = Compensated::default();
        let mut total = Compensated::default();
        for k in 1..(coeffs + n) {
            if k <= coeffs {
                prefix.add(self.phi_untruncated(-a + k as i64 - 1));
            }
            ring[k % len] = prefix;
            let w = prefix.diff(&ring[(k + 1) % len]);
            total.add(w * w);
        }
        total.value()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,phi")?;
        for i in -self.radius..=self.radius {
            writeln!(w, "{},{}", i, self.phi_untruncated(i))?;
        }
        Ok(())
    }
}

/// Compensated prefix sums of φ and |φ| over `[-A, A]`.
#[derive(Debug, Clone)]
pub struct WindowSumTable {
    radius: i64,
    prefix: Vec<Compensated>,
    abs_prefix: Vec<Compensated>,
}

impl WindowSumTable {
    pub fn new(model: &CoefficientModel) -> Self {
        let radius = model.radius();
        let len = (2 * radius + 2) as usize;
        let mut prefix = Vec::with_capacity(len);
        let mut abs_prefix = Vec::with_capacity(len);
        let mut acc = Compensated::default();
        let mut abs_acc = Compensated::default();
        prefix.push(acc);
        abs_prefix.push(abs_acc);
        for i in -radius..=radius {
            let v = model.phi_untruncated(i);
            acc.add(v);
            abs_acc.add(v.abs());
            prefix.push(acc);
            abs_prefix.push(abs_acc);
        }
        Self {
            radius,
            prefix,
            abs_prefix,
        }
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    fn check(&self, i: i64, n: i64) -> Result<()> {
        if n < 0 {
            return Err(Error::invalid("window length must be nonnegative"));
        }
        if n == 0 {
            return Ok(());
        }
        let (lo, hi) = (i + 1, i + n);
        if lo < -self.radius || hi > self.radius {
            let index = if lo < -self.radius { lo } else { hi };
            return Err(Error::OutOfRange {
                index,
                radius: self.radius,
                hint: "window exits the materialized range; raise A".into(),
            });
        }
        Ok(())
    }

    #[inline]
    fn slot(&self, j: i64) -> usize {
        (j + self.radius) as usize
    }

    /// φ_{i,n} = φ_{i+1} + … + φ_{i+n}.
    pub fn window_sum(&self, i: i64, n: i64) -> Result<f64> {
        self.check(i, n)?;
        Ok(self.window_unchecked(i, n))
    }

    /// |φ|_{i,n} = |φ_{i+1}| + … + |φ_{i+n}|.
    pub fn abs_window_sum(&self, i: i64, n: i64) -> Result<f64> {
        self.check(i, n)?;
        if n == 0 {
            return Ok(0.0);
        }
        let (a, b) = (self.slot(i + 1), self.slot(i + n) + 1);
        Ok(self.abs_prefix[b].diff(&self.abs_prefix[a]))
    }

    #[inline]
    pub(crate) fn window_unchecked(&self, i: i64, n: i64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let (a, b) = (self.slot(i + 1), self.slot(i + n) + 1);
        self.prefix[b].diff(&self.prefix[a])
    }

    /// Window sum of the truncated sequence (zero outside `[-A, A]`).
    pub fn window_sum_clamped(&self, i: i64, n: i64) -> f64 {
        let lo = (i + 1).max(-self.radius);
        let hi = (i + n).min(self.radius);
        if hi < lo {
            return 0.0;
        }
        self.prefix[self.slot(hi) + 1].diff(&self.prefix[self.slot(lo)])
    }

    pub fn total(&self) -> f64 {
        self.prefix.last().expect("non-empty").value()
    }
}
