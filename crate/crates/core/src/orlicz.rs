//! Orlicz functions, Luxemburg norms, convex conjugates, and heart
//! membership at finite scale.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::scenario::{Position, ScenarioSpace};

/// Built-in Orlicz functions: convex, increasing, left-continuous, zero at
/// zero. `LinftyType` is `0` on `[0,1]` and `+inf` beyond; left-continuity
/// puts the value `0` at the jump point itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrliczFunction {
    Power { p: f64 },
    ScaledPower { p: f64, c: f64 },
    LinftyType,
    ExpMinusOne,
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl OrliczFunction {
    /// Validates parameters and probes the shape requirements (zero at zero,
    /// monotone, midpoint-convex) on a grid.
    pub fn validate(&self) -> Result<()> {
        match self {
            OrliczFunction::Power { p } => {
                if !p.is_finite() || *p < 1.0 {
                    return Err(EngineError::InvalidParameter {
                        name: "p",
                        reason: format!("power Orlicz function requires p >= 1, got {p}"),
                    });
                }
            }
            OrliczFunction::ScaledPower { p, c } => {
                if !p.is_finite() || *p < 1.0 || !c.is_finite() || *c <= 0.0 {
                    return Err(EngineError::InvalidParameter {
                        name: "scaled_power",
                        reason: format!("requires p >= 1 and c > 0, got p={p}, c={c}"),
                    });
                }
            }
            OrliczFunction::LinftyType | OrliczFunction::ExpMinusOne => {}
            OrliczFunction::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(EngineError::InvalidParameter {
                        name: "knots",
                        reason: "at least one knot is required".into(),
                    });
                }
            }
        }
        // Probe grid.
        if self.eval(0.0) != 0.0 {
            return Err(EngineError::InvalidParameter {
                name: "phi",
                reason: "phi(0) must be 0".into(),
            });
        }
        let grid: Vec<f64> = (0..=64).map(|i| i as f64 * 0.25).collect();
        let mut prev = 0.0f64;
        for &x in &grid {
            let v = self.eval(x);
            if v.is_nan() || v < prev {
                return Err(EngineError::InvalidParameter {
                    name: "phi",
                    reason: format!("not increasing at x = {x}"),
                });
            }
            prev = v;
        }
        for w in grid.windows(3).step_by(2) {
            let (a, m, b) = (self.eval(w[0]), self.eval(w[1]), self.eval(w[2]));
            if a.is_finite() && b.is_finite() && m > 0.5 * (a + b) + 1e-9 {
                return Err(EngineError::InvalidParameter {
                    name: "phi",
                    reason: format!("midpoint convexity fails near x = {}", w[1]),
                });
            }
        }
        Ok(())
    }

    /// Evaluates at `x >= 0`; may return `+inf`.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self {
            OrliczFunction::Power { p } => {
                if *p == 1.0 {
                    x
                } else if *p == 2.0 {
                    x * x
                } else {
                    x.powf(*p)
                }
            }
            OrliczFunction::ScaledPower { p, c } => c * OrliczFunction::Power { p: *p }.eval(x),
            OrliczFunction::LinftyType => {
                if x <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            OrliczFunction::ExpMinusOne => x.exp_m1(),
            OrliczFunction::PiecewiseLinear { knots } => {
                let mut prev = (0.0, 0.0);
                for &(kx, ky) in knots {
                    if x <= kx {
                        let t = (x - prev.0) / (kx - prev.0);
                        return prev.1 + t * (ky - prev.1);
                    }
                    prev = (kx, ky);
                }
                let (lx, ly) = *knots.last().unwrap();
                let before = if knots.len() >= 2 { knots[knots.len() - 2] } else { (0.0, 0.0) };
                let slope = (ly - before.1) / (lx - before.0);
                ly + slope * (x - lx)
            }
        }
    }

    fn is_finite_valued(&self) -> bool {
        !matches!(self, OrliczFunction::LinftyType)
    }
}

/// `E_P[phi(|X|/lambda)]`, skipping zero-mass scenarios so that `0 * inf`
/// never appears.
fn modular(space: &ScenarioSpace, x: &Position, phi: &OrliczFunction, prior: usize, lambda: f64) -> f64 {
    let p = &space.priors()[prior].weights;
    let mut total = 0.0;
    for (v, &w) in x.payoffs().iter().zip(p) {
        if w > 0.0 {
            let term = phi.eval(v.abs() / lambda);
            if term.is_infinite() {
                return f64::INFINITY;
            }
            total += w * term;
        }
    }
    total
}

/// Luxemburg norm `inf{lambda > 0 ; E_P[phi(|X|/lambda)] <= 1}` under one
/// prior.
///
/// The gauge `lambda -> E_P[phi(|X|/lambda)]` is nonincreasing, so the norm
/// is found by bracketing (doubling/halving from `max|X| + 1`) and bisecting
/// to relative width `1e-10`. `LinftyType` has a pure jump gauge, so its norm
/// is returned exactly as the essential sup under the prior.
pub fn luxemburg_norm(
    space: &ScenarioSpace,
    x: &Position,
    phi: &OrliczFunction,
    prior: usize,
) -> Result<f64> {
    phi.validate()?;
    space.prior(prior)?;
    let p = &space.priors()[prior].weights;
    let ess_sup = x
        .payoffs()
        .iter()
        .zip(p)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    if ess_sup == 0.0 {
        return Ok(0.0);
    }
    if let OrliczFunction::LinftyType = phi {
        return Ok(ess_sup);
    }

    let feasible = |lambda: f64| modular(space, x, phi, prior, lambda) <= 1.0;
    let mut hi = ess_sup + 1.0;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(EngineError::Internal("Luxemburg bracket escaped upward".into()));
        }
    }
    let mut lo = hi;
    loop {
        lo *= 0.5;
        if !feasible(lo) {
            break;
        }
        hi = lo;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm).max(fc).max(fd))
}

/// Convex conjugate `phi*(y) = sup{x y - phi(x) ; x >= 0}` for `y >= 0`.
///
/// Analytic for the power family, `LinftyType`, and `ExpMinusOne`; otherwise
/// golden-section maximization of the concave objective on `[0, cap]`, with
/// the cap doubled until the supremum stalls (increment below `1e-12`) and
/// `+inf` reported if it is still growing at `cap = 1e9`.
pub fn conjugate(phi: &OrliczFunction, y: f64) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return Err(EngineError::InvalidParameter {
            name: "y",
            reason: format!("conjugate argument must be >= 0, got {y}"),
        });
    }
    phi.validate()?;
    match phi {
        OrliczFunction::Power { p } => conjugate_scaled_power(*p, 1.0, y),
        OrliczFunction::ScaledPower { p, c } => conjugate_scaled_power(*p, *c, y),
        OrliczFunction::LinftyType => Ok(y),
        OrliczFunction::ExpMinusOne => {
            if y <= 1.0 {
                Ok(0.0)
            } else {
                Ok(y * y.ln() - y + 1.0)
            }
        }
        OrliczFunction::PiecewiseLinear { .. } => {
            let objective = |x: f64| {
                let v = phi.eval(x);
                if v.is_infinite() {
                    f64::NEG_INFINITY
                } else {
                    x * y - v
                }
            };
            let mut cap = 1.0;
            let mut best = 0.0f64; // x = 0 always attains xy - phi(x) = 0
            loop {
                let (_, val) = golden_max(objective, 0.0, cap, 160);
                let grew = val > best + 1e-12;
                best = best.max(val);
                if !grew {
                    return Ok(best);
                }
                cap *= 2.0;
                if cap > 1e9 {
                    return Ok(f64::INFINITY);
                }
            }
        }
    }
}

fn conjugate_scaled_power(p: f64, c: f64, y: f64) -> Result<f64> {
    if p == 1.0 {
        return Ok(if y <= c { 0.0 } else { f64::INFINITY });
    }
    // Maximizer of x y - c x^p on x >= 0.
    let x = (y / (c * p)).powf(1.0 / (p - 1.0));
    Ok(x * y - c * x.powf(p))
}

/// Heart membership: `E_P[phi(|X|/lambda)] < inf` for every `lambda > 0`.
/// Decided analytically for the built-ins: finite-valued functions always
/// qualify on a finite space; `LinftyType` requires `X = 0` almost surely
/// under the prior.
pub fn in_heart(space: &ScenarioSpace, x: &Position, phi: &OrliczFunction, prior: usize) -> Result<bool> {
    phi.validate()?;
    let p = &space.prior(prior)?.weights;
    if phi.is_finite_valued() {
        return Ok(true);
    }
    Ok(x.payoffs().iter().zip(p).all(|(v, &w)| w == 0.0 || *v == 0.0))
}

/// Result of a doubling-condition probe.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Delta2Report {
    /// True when the probed ratios `phi(2x)/phi(x)` stay bounded and stop
    /// growing on the grid.
    pub plausible: bool,
    /// Largest finite ratio observed, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_ratio: Option<f64>,
    /// Probe point witnessing a failure (infinite or still-growing ratio).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_x: Option<f64>,
    pub x_min: f64,
    pub x_max: f64,
}

/// Probes the doubling condition `phi(2x) < k phi(x)` for large `x` on a log
/// grid over `[x_min, x_max]`.
pub fn delta2_probe(phi: &OrliczFunction, x_min: f64, x_max: f64) -> Result<Delta2Report> {
    phi.validate()?;
    if !(x_min > 0.0 && x_max > x_min) {
        return Err(EngineError::InvalidParameter {
            name: "probe range",
            reason: "need 0 < x_min < x_max".into(),
        });
    }
    const POINTS: usize = 256;
    let log_lo = x_min.ln();
    let log_hi = x_max.ln();
    let mut ratios: Vec<(f64, f64)> = Vec::with_capacity(POINTS);
    for i in 0..POINTS {
        let x = (log_lo + (log_hi - log_lo) * i as f64 / (POINTS - 1) as f64).exp();
        let a = phi.eval(x);
        let b = phi.eval(2.0 * x);
        if !a.is_finite() {
            continue;
        }
        if a == 0.0 {
            if b > 0.0 {
                return Ok(Delta2Report {
                    plausible: false,
                    sup_ratio: None,
                    witness_x: Some(x),
                    x_min,
                    x_max,
                });
            }
            continue;
        }
        if !b.is_finite() {
            return Ok(Delta2Report {
                plausible: false,
                sup_ratio: None,
                witness_x: Some(x),
                x_min,
                x_max,
            });
        }
        ratios.push((x, b / a));
    }
    if ratios.is_empty() {
        return Ok(Delta2Report { plausible: true, sup_ratio: None, witness_x: None, x_min, x_max });
    }
    let sup = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    // Still growing at the top of the range means the ratio is unbounded.
    let quarter = ratios.len() / 4;
    let mid_max = ratios[quarter..2 * quarter].iter().map(|r| r.1).fold(0.0, f64::max);
    let top_max = ratios[ratios.len() - quarter..].iter().map(|r| r.1).fold(0.0, f64::max);
    if top_max > mid_max * 1.05 {
        let witness = ratios.last().map(|r| r.0);
        return Ok(Delta2Report {
            plausible: false,
            sup_ratio: Some(sup),
            witness_x: witness,
            x_min,
            x_max,
        });
    }
    Ok(Delta2Report { plausible: true, sup_ratio: Some(sup), witness_x: None, x_min, x_max })
}
