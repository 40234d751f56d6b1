//! Derivative-free maximization of concave functions.
//!
//! Objectives may return `-inf` outside their effective domain. Line searches
//! bracket by step doubling and then run golden-section search; the outer
//! loop is cyclic coordinate ascent with a pattern move along the net
//! displacement of each sweep.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy)]
pub struct MaximizerOptions {
    pub max_sweeps: usize,
    /// A coordinate is never moved further than this from its start of sweep.
    pub probe_radius: f64,
    /// Golden-section stops when the bracket is narrower than `x_tol * (1 + |t|)`.
    pub x_tol: f64,
    /// Sweeps stop once the objective gains less than `f_tol * (1 + |f|)`.
    pub f_tol: f64,
}

impl Default for MaximizerOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 200,
            probe_radius: 1e6,
            x_tol: 1e-11,
            f_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Objective still rising at the probe radius: the supremum is `+inf`.
    pub unbounded: bool,
    pub sweeps: usize,
}

struct LineOutcome {
    t: f64,
    value: f64,
    unbounded: bool,
}

fn golden<G: FnMut(f64) -> f64>(g: &mut G, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= x_tol * (1.0 + 0.5 * (lo + hi).abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = g(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximize a concave function of one variable starting from `start`, whose
/// value `f_start` is already known.
fn line_search<G: FnMut(f64) -> f64>(
    g: &mut G,
    start: f64,
    f_start: f64,
    step0: f64,
    opts: &MaximizerOptions,
) -> LineOutcome {
    let mut best_t = start;
    let mut best_f = f_start;

    for dir in [1.0, -1.0] {
        let mut step = step0;
        let mut prev_t = start;
        let mut prev_f = f_start;
        let mut cur_t = start + dir * step;
        let mut cur_f = g(cur_t);
        if !(cur_f > f_start) {
            if dir > 0.0 {
                if cur_f > best_f {
                    best_t = cur_t;
                    best_f = cur_f;
                }
                continue;
            }
            // neither direction improves on a step of size step0:
            // the maximum lies in [start - step0, start + step0]
            let (t, f) = golden(g, start - step0, start + step0, opts.x_tol);
            return pick(best_t, best_f, t, f);
        }
        loop {
            step *= 2.0;
            let next_t = start + dir * step;
            if step > opts.probe_radius {
                // still rising at the probe radius
                let rise = cur_f - prev_f;
                let unbounded = rise > 1e-9 * (1.0 + cur_f.abs());
                return LineOutcome {
                    t: cur_t,
                    value: cur_f,
                    unbounded,
                };
            }
            let next_f = g(next_t);
            if next_f == cur_f {
                // flat: plateau or saturation
                return LineOutcome {
                    t: next_t,
                    value: next_f,
                    unbounded: false,
                };
            }
            if !(next_f > cur_f) {
                let (lo, hi) = if dir > 0.0 {
                    (prev_t, next_t)
                } else {
                    (next_t, prev_t)
                };
                let (t, f) = golden(g, lo, hi, opts.x_tol);
                return pick(cur_t, cur_f, t, f);
            }
            prev_t = cur_t;
            prev_f = cur_f;
            cur_t = next_t;
            cur_f = next_f;
        }
    }
    LineOutcome {
        t: best_t,
        value: best_f,
        unbounded: false,
    }
}

fn pick(t0: f64, f0: f64, t1: f64, f1: f64) -> LineOutcome {
    if f1 >= f0 {
        LineOutcome {
            t: t1,
            value: f1,
            unbounded: false,
        }
    } else {
        LineOutcome {
            t: t0,
            value: f0,
            unbounded: false,
        }
    }
}

/// Maximize a concave `f: R^n -> [-inf, inf)` from `start` (which must have a
/// finite value). The returned value is never below `f(start)`.
pub fn maximize_concave<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    opts: &MaximizerOptions,
) -> Maximum {
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    if n == 0 {
        return Maximum {
            value: fx,
            argmax: x,
            unbounded: false,
            sweeps: 0,
        };
    }
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let f_before = fx;
        let x_before = x.clone();
        for c in 0..n {
            let c0 = x[c];
            let step0 = 0.25 * (1.0 + c0.abs());
            let mut probe = x.clone();
            let mut g = |t: f64| {
                probe[c] = t;
                f(&probe)
            };
            let out = line_search(&mut g, c0, fx, step0, opts);
            if out.unbounded {
                x[c] = out.t;
                return Maximum {
                    value: f64::INFINITY,
                    argmax: x,
                    unbounded: true,
                    sweeps,
                };
            }
            if out.value > fx {
                x[c] = out.t;
                fx = out.value;
            }
        }
        if n > 1 {
            // pattern move along the sweep displacement
            let delta: Vec<f64> = x.iter().zip(&x_before).map(|(a, b)| a - b).collect();
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            if norm > 0.0 {
                let base = x.clone();
                let mut probe = x.clone();
                let mut g = |s: f64| {
                    for i in 0..n {
                        probe[i] = base[i] + s * delta[i];
                    }
                    f(&probe)
                };
                let out = line_search(&mut g, 0.0, fx, 0.5, opts);
                if out.unbounded {
                    return Maximum {
                        value: f64::INFINITY,
                        argmax: x,
                        unbounded: true,
                        sweeps,
                    };
                }
                if out.value > fx {
                    for i in 0..n {
                        x[i] = base[i] + out.t * delta[i];
                    }
                    fx = out.value;
                }
            }
        }
        if fx - f_before <= opts.f_tol * (1.0 + fx.abs()) {
            break;
        }
    }
    Maximum {
        value: fx,
        argmax: x,
        unbounded: false,
        sweeps,
    }
}
