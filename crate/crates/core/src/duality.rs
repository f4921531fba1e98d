//! Convex conjugates of risk functionals, biconjugate reconstruction over the
//! negative dual domains, strictly-positive supporting functionals, and
//! polar/bipolar computations for solid subsets of the positive cone.
//!
//! Dual elements are stored as weight vectors acting by plain dot product,
//! `phi(X) = sum_i w_i X_i`; a density `Z` against a prior `P` enters through
//! `w_i = P_i Z_i`, so both views share one arithmetic. Monotone functionals
//! force finite conjugates onto `w <= 0`, and S-additive ones additionally
//! onto the hyperplane `phi(S) = -1`.
//!
//! Polytopal solid sets are handled exactly: membership, ray-shooting gauges,
//! and supporting functionals reduce to dense linear programs small enough to
//! solve by enumerating basic solutions, which avoids pivoting edge cases at
//! these dimensions.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{EngineError, Result};
use crate::par::map_trials;
use crate::risk::{RiskFunctional, RiskKind, RiskValue};
use crate::robust::{DualMeasure, DualTerm};
use crate::sampler::trial_rng;
use crate::scenario::{Position, ScenarioSpace};

/// A linear functional `phi(X) = sum_i w_i X_i` over scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualElement {
    weights: Vec<f64>,
}

impl DualElement {
    /// Raw weights; entries off the union of supports are zeroed so the
    /// functional respects quasi-sure classes.
    pub fn from_weights(space: &ScenarioSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(EngineError::LengthMismatch { expected: space.len(), got: weights.len() });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(EngineError::NonFinitePayoff { index: i });
        }
        Ok(DualElement { weights: space.canonicalize(weights).payoffs().to_vec() })
    }

    /// Density view: `phi(X) = E_P[Z X]`, i.e. `w_i = P_i Z_i`.
    pub fn from_density(space: &ScenarioSpace, prior: usize, density: &[f64]) -> Result<Self> {
        let p = space.prior(prior)?;
        if density.len() != space.len() {
            return Err(EngineError::LengthMismatch { expected: space.len(), got: density.len() });
        }
        let weights = p.weights.iter().zip(density).map(|(w, z)| w * z).collect();
        DualElement::from_weights(space, weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, x: &Position) -> f64 {
        x.dot(&self.weights)
    }

    pub fn is_nonpositive(&self) -> bool {
        self.weights.iter().all(|&w| w <= 0.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Exact dense LP by enumeration of basic solutions.
// ---------------------------------------------------------------------------

const LP_FEAS_TOL: f64 = 1e-9;

#[allow(clippy::needless_range_loop)]
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (piv, max) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if max < 1e-11 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

struct LpSolution {
    value: f64,
    /// Simplex multipliers `y` of the optimal basis (`E_B^T y = c_B`).
    dual: Vec<f64>,
}

/// Maximizes `c.x` subject to `E x = b, x >= 0` by enumerating basic
/// solutions. Intended for a handful of rows and columns; the objective must
/// be bounded on the feasible set.
fn lp_max(c: &[f64], e: &[Vec<f64>], b: &[f64]) -> Option<LpSolution> {
    let rows = e.len();
    let cols = c.len();
    debug_assert!(rows <= cols);
    let mut best: Option<LpSolution> = None;
    let mut basis: Vec<usize> = (0..rows).collect();
    loop {
        // Try the current basis.
        let a: Vec<Vec<f64>> = (0..rows).map(|r| basis.iter().map(|&j| e[r][j]).collect()).collect();
        if let Some(xb) = solve_square(a.clone(), b.to_vec()) {
            if xb.iter().all(|&v| v >= -LP_FEAS_TOL) {
                let value: f64 = basis.iter().zip(&xb).map(|(&j, &v)| c[j] * v).sum();
                if best.as_ref().is_none_or(|s| value > s.value + 1e-12) {
                    // Multipliers from the transposed basis system.
                    let at: Vec<Vec<f64>> =
                        (0..rows).map(|r| (0..rows).map(|s| e[s][basis[r]]).collect()).collect();
                    let cb: Vec<f64> = basis.iter().map(|&j| c[j]).collect();
                    let dual = solve_square(at, cb).unwrap_or_else(|| vec![0.0; rows]);
                    best = Some(LpSolution { value, dual });
                }
            }
        }
        // Advance the combination.
        let mut i = rows;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if basis[i] != i + cols - rows {
                basis[i] += 1;
                for j in i + 1..rows {
                    basis[j] = basis[j - 1] + 1;
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Solid subsets of the positive cone.
// ---------------------------------------------------------------------------

type GaugeOracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum SolidRepr {
    /// `{0 <= X <= upper}`.
    Box { upper: Vec<f64> },
    /// Down-closed hull `{X >= 0 ; X <= sum_j lambda_j v_j, lambda in simplex}`.
    Polytope { vertices: Vec<Vec<f64>> },
    /// `{X >= 0 ; gauge(X) <= level}` for a convex gauge oracle.
    Sublevel { gauge: GaugeOracle, level: f64 },
}

impl fmt::Debug for SolidRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolidRepr::Box { upper } => write!(f, "Box {{ upper: {upper:?} }}"),
            SolidRepr::Polytope { vertices } => write!(f, "Polytope {{ vertices: {vertices:?} }}"),
            SolidRepr::Sublevel { level, .. } => write!(f, "Sublevel {{ level: {level} }}"),
        }
    }
}

/// A convex solid subset of the positive cone.
#[derive(Debug, Clone)]
pub struct SolidSet {
    repr: SolidRepr,
    claims_radially_bounded: bool,
    dim: usize,
}

/// Gauge value with an exactness marker (`false` for bisected sublevel
/// oracles).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaugeValue {
    pub value: f64,
    pub exact: bool,
}

impl SolidSet {
    pub fn boxed(upper: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = upper.iter().enumerate().find(|(_, &v)| v < 0.0 || !v.is_finite()) {
            return Err(EngineError::NegativeEntry { index: i, value: v });
        }
        let dim = upper.len();
        Ok(SolidSet { repr: SolidRepr::Box { upper }, claims_radially_bounded: true, dim })
    }

    pub fn polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(EngineError::InvalidParameter {
                name: "vertices",
                reason: "a polytope needs at least one vertex".into(),
            });
        }
        let dim = vertices[0].len();
        for v in &vertices {
            if v.len() != dim {
                return Err(EngineError::LengthMismatch { expected: dim, got: v.len() });
            }
            if let Some((i, &x)) = v.iter().enumerate().find(|(_, &x)| x < 0.0 || !x.is_finite()) {
                return Err(EngineError::NegativeEntry { index: i, value: x });
            }
        }
        Ok(SolidSet { repr: SolidRepr::Polytope { vertices }, claims_radially_bounded: true, dim })
    }

    pub fn sublevel(dim: usize, gauge: GaugeOracle, level: f64, claims_radially_bounded: bool) -> Self {
        SolidSet { repr: SolidRepr::Sublevel { gauge, level }, claims_radially_bounded, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn claims_radially_bounded(&self) -> bool {
        self.claims_radially_bounded
    }

    /// Membership for a nonnegative vector.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim {
            return Err(EngineError::LengthMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|&v| v < 0.0) {
            return Ok(false);
        }
        match &self.repr {
            SolidRepr::Box { upper } => Ok(x.iter().zip(upper).all(|(a, b)| a <= b)),
            SolidRepr::Polytope { vertices } => Ok(self.polytope_margin(vertices, x) >= -1e-10),
            SolidRepr::Sublevel { gauge, level } => Ok(gauge(x) <= *level),
        }
    }

    /// Largest `z` with `V lambda >= x + z` for simplex `lambda`; membership
    /// holds iff the margin is nonnegative.
    fn polytope_margin(&self, vertices: &[Vec<f64>], x: &[f64]) -> f64 {
        let n = self.dim;
        let m = vertices.len();
        // Columns: lambda (m), z+, z-, slack (n). Rows: n balance + 1 simplex.
        let cols = m + 2 + n;
        let mut e = vec![vec![0.0; cols]; n + 1];
        for i in 0..n {
            for j in 0..m {
                e[i][j] = vertices[j][i];
            }
            e[i][m] = -1.0;
            e[i][m + 1] = 1.0;
            e[i][m + 2 + i] = -1.0;
        }
        for cell in e[n].iter_mut().take(m) {
            *cell = 1.0;
        }
        let mut c = vec![0.0; cols];
        c[m] = 1.0;
        c[m + 1] = -1.0;
        let mut b = x.to_vec();
        b.push(1.0);
        lp_max(&c, &e, &b).map(|s| s.value).unwrap_or(f64::NEG_INFINITY)
    }

    /// Gauge of `x >= 0` with respect to the set: `1 / sup{t ; t x in C}`,
    /// with `gauge(0) = 0` and `+inf` when no positive multiple fits.
    ///
    /// Exact (closed form or LP) for boxes and polytopes; bisected for
    /// sublevel oracles.
    pub fn gauge(&self, x: &[f64]) -> Result<GaugeValue> {
        if x.len() != self.dim {
            return Err(EngineError::LengthMismatch { expected: self.dim, got: x.len() });
        }
        if let Some((i, &v)) = x.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(EngineError::NegativeEntry { index: i, value: v });
        }
        if x.iter().all(|&v| v == 0.0) {
            return Ok(GaugeValue { value: 0.0, exact: true });
        }
        match &self.repr {
            SolidRepr::Box { upper } => {
                let mut g = 0.0f64;
                for (a, b) in x.iter().zip(upper) {
                    if *a > 0.0 {
                        if *b == 0.0 {
                            return Ok(GaugeValue { value: f64::INFINITY, exact: true });
                        }
                        g = g.max(a / b);
                    }
                }
                Ok(GaugeValue { value: g, exact: true })
            }
            SolidRepr::Polytope { .. } => {
                let (t, _) = self.ray_shoot_lp(x)?;
                if t <= 1e-300 {
                    Ok(GaugeValue { value: f64::INFINITY, exact: true })
                } else {
                    Ok(GaugeValue { value: 1.0 / t, exact: true })
                }
            }
            SolidRepr::Sublevel { .. } => {
                let t = self.ray_shoot_bisect(x)?;
                match t {
                    Some(t) if t > 0.0 => Ok(GaugeValue { value: 1.0 / t, exact: false }),
                    Some(_) => Ok(GaugeValue { value: f64::INFINITY, exact: false }),
                    None => Ok(GaugeValue { value: 0.0, exact: false }), // ray never leaves
                }
            }
        }
    }

    /// LP ray-shoot for polytopes: `max t` with `t x <= V lambda`. Also
    /// returns the supporting weights `w >= 0` (unnormalized) from the dual.
    fn ray_shoot_lp(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let SolidRepr::Polytope { vertices } = &self.repr else {
            return Err(EngineError::Internal("ray_shoot_lp on non-polytope".into()));
        };
        let n = self.dim;
        let m = vertices.len();
        // Columns: t, lambda (m), slack (n). Rows: n balance + 1 simplex.
        let cols = 1 + m + n;
        let mut e = vec![vec![0.0; cols]; n + 1];
        for i in 0..n {
            e[i][0] = -x[i];
            for j in 0..m {
                e[i][1 + j] = vertices[j][i];
            }
            e[i][1 + m + i] = -1.0;
        }
        for cell in e[n].iter_mut().skip(1).take(m) {
            *cell = 1.0;
        }
        let mut c = vec![0.0; cols];
        c[0] = 1.0;
        let mut b = vec![0.0; n + 1];
        b[n] = 1.0;
        let sol = lp_max(&c, &e, &b)
            .ok_or_else(|| EngineError::Internal("ray-shoot LP infeasible".into()))?;
        // Dual rows 0..n carry -w; clamp stray signs from degenerate bases.
        let w: Vec<f64> = sol.dual[..n].iter().map(|&y| (-y).max(0.0)).collect();
        Ok((sol.value, w))
    }

    /// Bisection ray-shoot for sublevel oracles. `Ok(None)` means the ray
    /// stayed inside out to the radial probe cap.
    fn ray_shoot_bisect(&self, x: &[f64]) -> Result<Option<f64>> {
        const RADIAL_CAP: f64 = 1e9;
        let scaled = |t: f64| -> Vec<f64> { x.iter().map(|v| t * v).collect() };
        if !self.contains(&scaled(1e-12))? {
            return Ok(Some(0.0));
        }
        let mut lo = 1e-12;
        let mut hi = 1.0;
        while self.contains(&scaled(hi))? {
            lo = hi;
            hi *= 2.0;
            if hi > RADIAL_CAP {
                return Ok(None);
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.contains(&scaled(mid))? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(lo))
    }

    /// Exact maximum of a nonnegative linear functional over the set
    /// (boxes/polytopes); numeric boundary search for sublevel oracles, with
    /// a stall flag.
    fn linear_sup(&self, w: &[f64]) -> Result<(f64, bool)> {
        debug_assert!(w.iter().all(|&v| v >= 0.0));
        match &self.repr {
            SolidRepr::Box { upper } => {
                Ok((w.iter().zip(upper).map(|(a, b)| a * b).sum(), true))
            }
            SolidRepr::Polytope { vertices } => {
                let best = vertices
                    .iter()
                    .map(|v| v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                    .fold(0.0, f64::max);
                Ok((best, true))
            }
            SolidRepr::Sublevel { .. } => {
                // Boundary sampling along random nonnegative directions.
                let mut best = 0.0f64;
                let mut stalled = false;
                let mut rounds = 0;
                let mut samples = 64u64;
                loop {
                    let prev = best;
                    let vals = map_trials(samples, |t| {
                        let mut rng = trial_rng(0x501D ^ samples, t);
                        let dir: Vec<f64> =
                            (0..self.dim).map(|_| rng.gen_range(0.0..1.0f64).powi(2)).collect();
                        if dir.iter().all(|&d| d == 0.0) {
                            return Ok(0.0);
                        }
                        match self.ray_shoot_bisect(&dir)? {
                            Some(t) => {
                                Ok(dir.iter().zip(w).map(|(d, ww)| d * t * ww).sum::<f64>())
                            }
                            None => Err(EngineError::NotRadiallyBounded { reached: 1e9 }),
                        }
                    });
                    for v in vals {
                        best = best.max(v?);
                    }
                    rounds += 1;
                    if best <= prev * (1.0 + 1e-6) + 1e-12 {
                        stalled = true;
                        break;
                    }
                    if rounds >= 8 {
                        break;
                    }
                    samples *= 2;
                }
                Ok((best, stalled))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Supporting functionals and polars.
// ---------------------------------------------------------------------------

/// A strictly positive functional supporting a radially bounded solid set.
#[derive(Debug, Clone, Serialize)]
pub struct SupportCertificate {
    /// Strictly positive weights.
    pub weights: Vec<f64>,
    /// `sup_{X in C} <weights, X>`; `1` after normalization unless the set is
    /// `{0}`.
    pub sup_value: f64,
}

/// Builds a strictly positive functional with finite supremum over the set:
/// the uniform density is certified by exact support-function maximization
/// and rescaled so the supremum is `1`. Sublevel sets are probed along rays
/// and rejected as "not radially bounded" when a scaled member survives out
/// to `t = 1e9`.
pub fn support_functional(c: &SolidSet) -> Result<SupportCertificate> {
    if !c.claims_radially_bounded() {
        return Err(EngineError::MissingClaim("radially_bounded"));
    }
    let n = c.dim();
    let u = vec![1.0 / n as f64; n];
    if let SolidRepr::Sublevel { .. } = &c.repr {
        // Radial probe along sampled members.
        for t in 0..16u64 {
            let mut rng = trial_rng(0xB0B, t);
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            if dir.iter().all(|&d| d == 0.0) {
                continue;
            }
            if c.ray_shoot_bisect(&dir)?.is_none() {
                return Err(EngineError::NotRadiallyBounded { reached: 1e9 });
            }
        }
    }
    let (sup, _stalled) = c.linear_sup(&u)?;
    if sup <= 0.0 {
        return Ok(SupportCertificate { weights: u, sup_value: 0.0 });
    }
    let weights: Vec<f64> = u.iter().map(|v| v / sup).collect();
    let (certified, _) = c.linear_sup(&weights)?;
    Ok(SupportCertificate { weights, sup_value: certified })
}

/// Verdict of a polar membership query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarVerdict {
    Member,
    NotMember,
    Inconclusive,
}

const POLAR_TOL: f64 = 1e-10;

/// Tests `Z >= 0` for membership in the polar `C° = {Z ; sup_C E_P[Z X] <= 1}`
/// under the designated prior. Exact for boxes and polytopes; sublevel
/// oracles that fail to converge report `Inconclusive` rather than a false
/// positive.
pub fn polar_membership(
    space: &ScenarioSpace,
    c: &SolidSet,
    z: &[f64],
    prior: usize,
) -> Result<(PolarVerdict, f64)> {
    let p = space.prior(prior)?;
    if z.len() != c.dim() || c.dim() != space.len() {
        return Err(EngineError::LengthMismatch { expected: c.dim(), got: z.len() });
    }
    if let Some((i, &v)) = z.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(EngineError::NegativeEntry { index: i, value: v });
    }
    let w: Vec<f64> = p.weights.iter().zip(z).map(|(a, b)| a * b).collect();
    let (sup, converged) = c.linear_sup(&w)?;
    if sup <= 1.0 + POLAR_TOL {
        if converged {
            Ok((PolarVerdict::Member, sup))
        } else {
            Ok((PolarVerdict::Inconclusive, sup))
        }
    } else {
        Ok((PolarVerdict::NotMember, sup))
    }
}

/// Membership of a positive measure in the robust polar
/// `C° = {mu >= 0 ; sup_C E_mu[X] <= 1}`, via its canonical scenario masses.
pub fn robust_polar_membership(
    space: &ScenarioSpace,
    c: &SolidSet,
    mu: &DualMeasure,
) -> Result<(PolarVerdict, f64)> {
    if c.dim() != space.len() {
        return Err(EngineError::LengthMismatch { expected: space.len(), got: c.dim() });
    }
    let d = mu.canonical_density(space);
    if let Some((i, &v)) = d.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(EngineError::NegativeEntry { index: i, value: v });
    }
    let (sup, converged) = c.linear_sup(&d)?;
    if sup <= 1.0 + POLAR_TOL {
        if converged {
            Ok((PolarVerdict::Member, sup))
        } else {
            Ok((PolarVerdict::Inconclusive, sup))
        }
    } else {
        Ok((PolarVerdict::NotMember, sup))
    }
}

/// Strictly positive element of the polar (densities against the prior),
/// obtained from the supporting functional.
pub fn polar_positive_witness(
    space: &ScenarioSpace,
    c: &SolidSet,
    prior: usize,
) -> Result<(Vec<f64>, f64)> {
    let p = space.prior(prior)?.clone();
    let cert = support_functional(c)?;
    let z: Vec<f64> = cert
        .weights
        .iter()
        .zip(&p.weights)
        .map(|(w, &pw)| if pw > 0.0 { w / pw } else { 1.0 })
        .collect();
    let w: Vec<f64> = p.weights.iter().zip(&z).map(|(a, b)| a * b).collect();
    let (sup, _) = c.linear_sup(&w)?;
    Ok((z, sup))
}

/// Outcome of one bipolar round trip.
#[derive(Debug, Clone, Serialize)]
pub struct BipolarReport {
    pub gauge: f64,
    pub member: bool,
    /// Membership and `gauge <= 1` agree (up to the boundary tolerance).
    pub agree: bool,
    /// `|gauge - 1| <= 1e-9`: the query sits on the boundary.
    pub boundary: bool,
    pub exact: bool,
}

const BIPOLAR_TOL: f64 = 1e-9;

/// Checks the bipolar identity at one point: `X in C` iff the supremum of
/// `E[Z X]` over the polar — equivalently the gauge of `X`, by positive
/// homogeneity — is at most one.
pub fn bipolar_check(c: &SolidSet, x: &[f64]) -> Result<BipolarReport> {
    let gauge = c.gauge(x)?;
    let member = c.contains(x)?;
    let boundary = (gauge.value - 1.0).abs() <= BIPOLAR_TOL;
    let agree = boundary || member == (gauge.value <= 1.0);
    Ok(BipolarReport { gauge: gauge.value, member, agree, boundary, exact: gauge.exact })
}

/// Robust bipolar round trip: the polar pairing runs through positive
/// measures spanned by `mu_{P,Z}`, i.e. through canonical scenario masses on
/// the union of supports. Returns the report together with a maximizing
/// measure in span form when one is available (boxes and polytopes).
pub fn bipolar_check_robust(
    space: &ScenarioSpace,
    c: &SolidSet,
    x: &Position,
) -> Result<(BipolarReport, Option<DualMeasure>)> {
    if c.dim() != space.len() {
        return Err(EngineError::LengthMismatch { expected: space.len(), got: c.dim() });
    }
    let report = bipolar_check(c, x.payoffs())?;
    let witness = polar_maximizer_masses(c, x.payoffs())?
        .map(|d| measure_from_scenario_masses(space, &d))
        .transpose()?;
    Ok((report, witness))
}

/// Scenario-mass vector of a polar element attaining the gauge, when the
/// representation makes one available exactly.
fn polar_maximizer_masses(c: &SolidSet, x: &[f64]) -> Result<Option<Vec<f64>>> {
    if x.iter().all(|&v| v == 0.0) {
        return Ok(Some(vec![0.0; c.dim()]));
    }
    match &c.repr {
        SolidRepr::Box { upper } => {
            let mut best = (0usize, 0.0f64);
            for (i, (&xi, &ui)) in x.iter().zip(upper).enumerate() {
                if xi > 0.0 {
                    let ratio = if ui == 0.0 { f64::INFINITY } else { xi / ui };
                    if ratio > best.1 {
                        best = (i, ratio);
                    }
                }
            }
            let (i, ratio) = best;
            if !ratio.is_finite() {
                return Ok(None);
            }
            let mut d = vec![0.0; c.dim()];
            d[i] = 1.0 / upper[i];
            Ok(Some(d))
        }
        SolidRepr::Polytope { .. } => {
            let (t, w) = c.ray_shoot_lp(x)?;
            if t <= 1e-300 {
                return Ok(None);
            }
            // Normalize the supporting weights so sup over C equals 1.
            let (sup, _) = c.linear_sup(&w)?;
            if sup <= 0.0 {
                return Ok(None);
            }
            Ok(Some(w.iter().map(|v| v / sup).collect()))
        }
        SolidRepr::Sublevel { .. } => Ok(None),
    }
}

/// Lifts a canonical scenario-mass vector into span form, grouping the mass
/// by a prior that charges each scenario.
pub fn measure_from_scenario_masses(space: &ScenarioSpace, masses: &[f64]) -> Result<DualMeasure> {
    if masses.len() != space.len() {
        return Err(EngineError::LengthMismatch { expected: space.len(), got: masses.len() });
    }
    let mut densities: Vec<Option<Vec<f64>>> = vec![None; space.priors().len()];
    for (i, &d) in masses.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let k = space
            .priors()
            .iter()
            .position(|p| p.weights[i] > 0.0)
            .ok_or_else(|| EngineError::InvalidParameter {
                name: "masses",
                reason: format!("scenario {i} carries mass but is null under every prior"),
            })?;
        let slot = densities[k].get_or_insert_with(|| vec![0.0; space.len()]);
        slot[i] = d / space.priors()[k].weights[i];
    }
    let terms: Vec<DualTerm> = densities
        .into_iter()
        .enumerate()
        .filter_map(|(k, z)| z.map(|density| DualTerm { prior: k, density, coeff: 1.0 }))
        .collect();
    DualMeasure::new(space, terms)
}

// ---------------------------------------------------------------------------
// Conjugates and biconjugates of risk functionals.
// ---------------------------------------------------------------------------

const SUM_TOL: f64 = 1e-12;

/// Convex conjugate `rho*(phi) = sup_X (phi(X) - rho(X))`.
///
/// Closed forms for the linear, worst-case-loss, and expected-shortfall
/// functionals; otherwise a multi-start coordinate ascent over a growing box,
/// reporting `+inf` when the supremum keeps growing (the stall test only ever
/// errs toward `+inf`, never toward a finite lie).
pub fn conjugate_rho(space: &ScenarioSpace, rho: &RiskFunctional, phi: &DualElement) -> Result<f64> {
    if !rho.claims().convex {
        return Err(EngineError::MissingClaim("convex"));
    }
    if !rho.claims().monotone {
        return Err(EngineError::MissingClaim("monotone"));
    }
    let w = phi.weights();
    match rho.kind() {
        RiskKind::ExpectedLoss { prior } => {
            let p = &space.priors()[*prior].weights;
            let matches = w.iter().zip(p).all(|(a, b)| *a == -*b);
            Ok(if matches { 0.0 } else { f64::INFINITY })
        }
        RiskKind::MaxLoss => {
            let mut sum = 0.0;
            #[allow(clippy::needless_range_loop)]
            for i in 0..space.len() {
                if space.support().contains(i) {
                    if w[i] > 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    sum += w[i];
                } else if w[i] != 0.0 {
                    return Ok(f64::INFINITY);
                }
            }
            Ok(if (sum + 1.0).abs() <= SUM_TOL { 0.0 } else { f64::INFINITY })
        }
        RiskKind::Es { alpha, prior } => {
            let p = &space.priors()[*prior].weights;
            let mut sum = 0.0;
            for i in 0..space.len() {
                if p[i] == 0.0 {
                    if w[i] != 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    continue;
                }
                if w[i] > 0.0 || -w[i] > p[i] / alpha + SUM_TOL {
                    return Ok(f64::INFINITY);
                }
                sum += w[i];
            }
            Ok(if (sum + 1.0).abs() <= SUM_TOL { 0.0 } else { f64::INFINITY })
        }
        _ => conjugate_numeric(space, rho, w),
    }
}

/// Multi-start coordinate ascent for `sup_X (<w, X> - rho(X))` over a box
/// `[-L, L]^n`, with `L` doubled until the running supremum stalls (relative
/// increment below `1e-9` across a doubling) or `L = 1e6`.
fn conjugate_numeric(space: &ScenarioSpace, rho: &RiskFunctional, w: &[f64]) -> Result<f64> {
    let n = space.len();
    let h = |x: &Position| -> Result<f64> {
        Ok(match rho.eval(space, x)? {
            RiskValue::Finite(v) => x.dot(w) - v,
            RiskValue::PosInf => f64::NEG_INFINITY,
        })
    };
    let ascent = |l: f64| -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for start in 0..8u64 {
            let mut rng = trial_rng(0xC0 ^ start, l.to_bits());
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-l..=l)).collect();
            let mut cur = h(&space.canonicalize(x.clone()))?;
            for _sweep in 0..60 {
                let before = cur;
                for i in 0..n {
                    let f = |v: f64| {
                        let mut y = x.clone();
                        y[i] = v;
                        h(&space.canonicalize(y)).unwrap_or(f64::NEG_INFINITY)
                    };
                    let (xm, fm) = golden_max_1d(&f, -l, l, 90);
                    if fm > cur {
                        cur = fm;
                        x[i] = xm;
                    }
                }
                if cur - before < 1e-11 * (1.0 + cur.abs()) {
                    break;
                }
            }
            best = best.max(cur);
        }
        Ok(best)
    };
    let mut l = 8.0;
    let mut prev = ascent(l)?;
    loop {
        l *= 2.0;
        if l > 1e6 {
            return Ok(f64::INFINITY);
        }
        let cur = ascent(l)?;
        let grew = cur > prev + 1e-9 * (1.0 + prev.abs());
        let best = cur.max(prev);
        if !grew {
            return Ok(best);
        }
        prev = best;
    }
}

fn golden_max_1d(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
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

/// Biconjugate value together with the maximizing dual weights.
#[derive(Debug, Clone, Serialize)]
pub struct BiconjugateResult {
    pub value: f64,
    pub witness: Vec<f64>,
}

/// Dual domain for biconjugate reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualDomain {
    /// Nonpositive functionals; the objective pairs against `-X^-`
    /// (surplus-invariant form).
    Negative,
    /// Nonpositive functionals with `phi(S) = -1`, `S` taken from the
    /// functional.
    SAdditive,
}

/// Biconjugate value `sup_phi (phi(target) - rho*(phi))` over the constrained
/// dual domain, by projected-gradient ascent with 16 seeded restarts and a
/// diminishing `1/k` step schedule; restart results are reduced
/// deterministically (max value, then lowest restart index).
pub fn biconjugate(
    space: &ScenarioSpace,
    rho: &RiskFunctional,
    x: &Position,
    domain: DualDomain,
    seed: u64,
) -> Result<BiconjugateResult> {
    let claims = rho.claims();
    if !claims.convex {
        return Err(EngineError::MissingClaim("convex"));
    }
    if !claims.monotone {
        return Err(EngineError::MissingClaim("monotone"));
    }
    match domain {
        DualDomain::Negative => {
            if !claims.surplus_invariant {
                return Err(EngineError::MissingClaim("surplus_invariant"));
            }
        }
        DualDomain::SAdditive => {
            if !claims.s_additive {
                return Err(EngineError::MissingClaim("s_additive"));
            }
        }
    }
    match (rho.kind(), domain) {
        (RiskKind::ExpectedLoss { prior }, DualDomain::SAdditive) => {
            let s = rho.numeraire().expect("S-additive functional has S");
            let p = &space.priors()[*prior].weights;
            let es: f64 = p.iter().zip(s.payoffs()).map(|(a, b)| a * b).sum();
            if (es - 1.0).abs() > 1e-9 {
                return Err(EngineError::InfeasibleDualDomain(format!(
                    "the only candidate density has phi(S) = {} != -1",
                    -es
                )));
            }
            let witness: Vec<f64> = p.iter().map(|w| -w).collect();
            let value = -p.iter().zip(x.payoffs()).map(|(a, b)| a * b).sum::<f64>();
            Ok(BiconjugateResult { value, witness })
        }
        (RiskKind::Es { alpha, prior }, DualDomain::SAdditive) => {
            let p = space.priors()[*prior].weights.clone();
            let lower: Vec<f64> = p.iter().map(|&w| -w / alpha).collect();
            let s = rho.numeraire().expect("S-additive functional has S").clone();
            projected_ascent_linear(x, &lower, &s, seed)
        }
        (RiskKind::MaxLoss, DualDomain::SAdditive) => {
            let s = rho.numeraire().expect("S-additive functional has S").clone();
            let lower: Vec<f64> = (0..space.len())
                .map(|i| if space.support().contains(i) { -1.0 / s.get(i) } else { 0.0 })
                .collect();
            projected_ascent_linear(x, &lower, &s, seed)
        }
        (RiskKind::ShortfallValue { loss, prior }, DualDomain::Negative) => {
            // Separable in the dual weights: maximize per coordinate
            // sup_{y >= 0} (y * X^-_i - l*(y)) scaled by the prior mass.
            let p = &space.priors()[*prior].weights;
            let neg = x.neg_part();
            let mut total = 0.0;
            let mut witness = vec![0.0; space.len()];
            for i in 0..space.len() {
                if p[i] == 0.0 {
                    continue;
                }
                let target = neg.get(i);
                let f = |y: f64| {
                    let c = loss.conjugate(y);
                    if c.is_finite() {
                        y * target - c
                    } else {
                        f64::NEG_INFINITY
                    }
                };
                let mut cap = 1.0;
                let mut best = f(0.0);
                let mut best_y = 0.0;
                loop {
                    let (ym, v) = golden_max_1d(&f, 0.0, cap, 120);
                    let grew = v > best + 1e-12 * (1.0 + best.abs());
                    if v > best {
                        best = v;
                        best_y = ym;
                    }
                    if !grew {
                        break;
                    }
                    cap *= 2.0;
                    if cap > 1e12 {
                        return Err(EngineError::InvalidParameter {
                            name: "loss",
                            reason: "dual objective keeps growing; conjugate domain unbounded".into(),
                        });
                    }
                }
                total += p[i] * best;
                witness[i] = -p[i] * best_y;
            }
            Ok(BiconjugateResult { value: total, witness })
        }
        _ => Err(EngineError::InvalidParameter {
            name: "rho",
            reason: format!(
                "biconjugate reconstruction is implemented for the built-in convex functionals, \
                 not `{}` over {:?}",
                rho.label(),
                domain
            ),
        }),
    }
}

/// Exact maximizer of `<w, x>` over `{lower <= w <= 0, <S, w> = -1}` by
/// greedy budget allocation: writing `u = -w`, one unit of the budget
/// `<S, u> = 1` placed at coordinate `i` costs `x_i / S_i`, so filling the
/// cheapest coordinates first (up to their caps) is optimal.
fn exact_linear_max(x: &Position, lower: &[f64], s: &Position) -> (f64, Vec<f64>) {
    let n = lower.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| lower[i] < 0.0 && s.get(i) > 0.0).collect();
    order.sort_by(|&i, &j| {
        let ri = x.get(i) / s.get(i);
        let rj = x.get(j) / s.get(j);
        ri.partial_cmp(&rj).unwrap().then(i.cmp(&j))
    });
    let mut w = vec![0.0; n];
    let mut budget = 1.0;
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let cap = -lower[i];
        let take = cap.min(budget / s.get(i));
        w[i] = -take;
        budget -= take * s.get(i);
    }
    let value = w.iter().zip(x.payoffs()).map(|(a, b)| a * b).sum();
    (value, w)
}

/// Projected-gradient ascent for a linear objective `<w, x>` over
/// `{lower <= w <= 0, <S, w> = -1}` (coordinates with `lower_i = 0` are
/// pinned to zero), polished by the exact greedy maximizer: the diminishing
/// step schedule alone stalls short of tight tolerances when coordinates of
/// `x` nearly tie.
fn projected_ascent_linear(
    x: &Position,
    lower: &[f64],
    s: &Position,
    seed: u64,
) -> Result<BiconjugateResult> {
    let feas_min: f64 = s.payoffs().iter().zip(lower).map(|(a, b)| a * b).sum();
    if feas_min > -1.0 + 1e-12 {
        return Err(EngineError::InfeasibleDualDomain(format!(
            "phi(S) ranges down to {feas_min}, cannot reach -1"
        )));
    }
    let project = |v: &[f64]| -> Vec<f64> {
        // w(lam) = clamp(v + lam * S, lower, 0); <S, w(lam)> is nondecreasing
        // in lam, so bisect.
        let dot = |lam: f64| -> f64 {
            v.iter()
                .zip(s.payoffs())
                .zip(lower)
                .map(|((vi, si), li)| (vi + lam * si).clamp(*li, 0.0) * si)
                .sum()
        };
        let mut lo = -1.0;
        let mut hi = 1.0;
        while dot(lo) > -1.0 {
            lo *= 2.0;
            if lo < -1e18 {
                break;
            }
        }
        while dot(hi) < -1.0 {
            hi *= 2.0;
            if hi > 1e18 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dot(mid) < -1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        v.iter()
            .zip(s.payoffs())
            .zip(lower)
            .map(|((vi, si), li)| (vi + lam * si).clamp(*li, 0.0))
            .collect()
    };

    let width = lower.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let step0 = (width + 1.0) / (1.0 + x.sup_norm());
    let results: Vec<(f64, u64, Vec<f64>)> = map_trials(16, |restart| {
        let mut rng = trial_rng(seed ^ 0xB1C0, restart);
        let init: Vec<f64> = lower.iter().map(|&l| rng.gen_range(l..=0.0)).collect();
        let mut w = project(&init);
        let mut best = f64::NEG_INFINITY;
        let mut best_w = w.clone();
        for k in 1..=500usize {
            let obj: f64 = w.iter().zip(x.payoffs()).map(|(a, b)| a * b).sum();
            if obj > best {
                best = obj;
                best_w = w.clone();
            }
            let eta = step0 / k as f64;
            let stepped: Vec<f64> =
                w.iter().zip(x.payoffs()).map(|(wi, xi)| wi + eta * xi).collect();
            w = project(&stepped);
        }
        let obj: f64 = w.iter().zip(x.payoffs()).map(|(a, b)| a * b).sum();
        if obj > best {
            best = obj;
            best_w = w;
        }
        (best, restart, best_w)
    });
    let best = results
        .into_iter()
        .fold((f64::NEG_INFINITY, u64::MAX, Vec::new()), |acc, (v, r, w)| {
            if v > acc.0 || (v == acc.0 && r < acc.1) {
                (v, r, w)
            } else {
                acc
            }
        });
    let (exact_value, exact_w) = exact_linear_max(x, lower, s);
    if exact_value > best.0 {
        Ok(BiconjugateResult { value: exact_value, witness: exact_w })
    } else {
        Ok(BiconjugateResult { value: best.0, witness: best.2 })
    }
}

/// Primal/dual comparison emitted by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct DualReport {
    pub primal: RiskValue,
    pub dual: f64,
    pub gap: Option<f64>,
    pub witness_density: Vec<f64>,
}

use rand::Rng;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::LossFunction;
    use crate::sampler::PositionSampler;

    fn uniform2() -> ScenarioSpace {
        ScenarioSpace::uniform(2)
    }

    #[test]
    fn conjugate_expected_loss() {
        let s = uniform2();
        let rho = RiskFunctional::expected_loss(&s, 0).unwrap();
        let minus_p = DualElement::from_density(&s, 0, &[-1.0, -1.0]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &minus_p).unwrap(), 0.0);
        let other = DualElement::from_weights(&s, vec![-0.7, -0.3]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &other).unwrap(), f64::INFINITY);
    }

    #[test]
    fn conjugate_max_loss() {
        let s = uniform2();
        let rho = RiskFunctional::max_loss(&s);
        // phi = 0: sup of min(X) over all X is unbounded.
        let zero = DualElement::from_weights(&s, vec![0.0, 0.0]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &zero).unwrap(), f64::INFINITY);
        // Negative weights summing to -1 lie in the dual simplex.
        let q = DualElement::from_weights(&s, vec![-0.25, -0.75]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &q).unwrap(), 0.0);
        // A positive weight escapes along that coordinate.
        let positive = DualElement::from_weights(&s, vec![0.5, -1.5]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &positive).unwrap(), f64::INFINITY);
    }

    #[test]
    fn conjugate_es_matches_brute_force() {
        let s = uniform2();
        let rho = RiskFunctional::es(&s, 0.5, 0).unwrap();
        // Inside the ES dual polytope: q = (0.6, 0.4), caps p/alpha = 1.
        let inside = DualElement::from_weights(&s, vec![-0.6, -0.4]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &inside).unwrap(), 0.0);
        // Violates the density cap.
        let outside = DualElement::from_weights(&s, vec![-1.2, 0.2 - 0.2]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &outside).unwrap(), f64::INFINITY);

        // Brute-force corroboration on a coarse grid for the finite case.
        let sampler = PositionSampler::new(&s, 5.0);
        let mut grid_best = f64::NEG_INFINITY;
        let mut rng = trial_rng(3, 0);
        for _ in 0..4000 {
            let x = sampler.sample(&mut rng);
            let v = crate::risk::es(&s, &x, 0.5, 0).unwrap();
            grid_best = grid_best.max(inside.apply(&x) - v);
        }
        assert!(grid_best <= 1e-9, "finite conjugate should dominate samples: {grid_best}");
    }

    #[test]
    fn numeric_conjugate_is_grid_sound() {
        let s = uniform2();
        let rho = RiskFunctional::shortfall_value(&s, LossFunction::Power { p: 2.0 }, 0).unwrap();
        let phi = DualElement::from_weights(&s, vec![-0.5, -0.25]).unwrap();
        let numeric = conjugate_rho(&s, &rho, &phi).unwrap();
        // Exact separable value: sum_i p_i l*(q_i/p_i), l*(y) = y^2/4.
        let exact = 0.5 * (1.0f64).powi(2) / 4.0 + 0.5 * (0.5f64).powi(2) / 4.0;
        assert!((numeric - exact).abs() < 1e-6, "{numeric} vs {exact}");

        // Grid oracle: step 0.05 over [-5, 5]^2.
        let mut grid_best = f64::NEG_INFINITY;
        let steps = 201;
        for i in 0..steps {
            for j in 0..steps {
                let x = s
                    .position(vec![-5.0 + 0.05 * i as f64, -5.0 + 0.05 * j as f64])
                    .unwrap();
                let v = crate::risk::shortfall(&s, &x, &LossFunction::Power { p: 2.0 }, 0).unwrap();
                grid_best = grid_best.max(phi.apply(&x) - v);
            }
        }
        assert!(numeric >= grid_best - 1e-6, "numeric {numeric} below grid {grid_best}");

        // A positive weight makes the supremum genuinely infinite.
        let bad = DualElement::from_weights(&s, vec![0.3, -0.25]).unwrap();
        assert_eq!(conjugate_rho(&s, &rho, &bad).unwrap(), f64::INFINITY);
    }

    #[test]
    fn fenchel_inequality_on_probes() {
        let s = uniform2();
        let sampler = PositionSampler::new(&s, 5.0);
        let rhos = vec![
            RiskFunctional::es(&s, 0.5, 0).unwrap(),
            RiskFunctional::max_loss(&s),
            RiskFunctional::expected_loss(&s, 0).unwrap(),
            RiskFunctional::shortfall_value(&s, LossFunction::Power { p: 2.0 }, 0).unwrap(),
        ];
        for rho in &rhos {
            for t in 0..40 {
                let mut rng = trial_rng(7, t);
                let x = sampler.sample(&mut rng);
                let w: Vec<f64> = (0..2).map(|_| -rng.gen_range(0.0..1.5f64)).collect();
                let phi = DualElement::from_weights(&s, w).unwrap();
                let conj = conjugate_rho(&s, rho, &phi).unwrap();
                let val = rho.eval(&s, &x).unwrap();
                if let (RiskValue::Finite(v), true) = (val, conj.is_finite()) {
                    assert!(
                        phi.apply(&x) <= v + conj + 1e-8,
                        "{}: {} > {} + {}",
                        rho.label(),
                        phi.apply(&x),
                        v,
                        conj
                    );
                }
            }
        }
    }

    #[test]
    fn biconjugate_recovers_es_and_max_loss() {
        let s = uniform2();
        let es_rho = RiskFunctional::es(&s, 0.5, 0).unwrap();
        let x = s.position(vec![-1.0, 2.0]).unwrap();
        let dual = biconjugate(&s, &es_rho, &x, DualDomain::SAdditive, 1).unwrap();
        assert!((dual.value - 1.0).abs() < 1e-6, "{}", dual.value);
        // The witness stays in the dual domain.
        assert!(dual.witness.iter().all(|&w| w <= 1e-12));
        assert!((dual.witness.iter().sum::<f64>() + 1.0).abs() < 1e-9);

        let ml = RiskFunctional::max_loss(&s);
        let dual = biconjugate(&s, &ml, &x, DualDomain::SAdditive, 1).unwrap();
        assert!((dual.value - 1.0).abs() < 1e-6, "{}", dual.value);

        let el = RiskFunctional::expected_loss(&s, 0).unwrap();
        let dual = biconjugate(&s, &el, &x, DualDomain::SAdditive, 1).unwrap();
        assert!((dual.value - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn biconjugate_shortfall_depends_on_loss_profile_only() {
        let s = uniform2();
        let rho = RiskFunctional::shortfall_value(&s, LossFunction::Power { p: 2.0 }, 0).unwrap();
        let x = s.position(vec![-1.5, 2.0]).unwrap();
        let a = biconjugate(&s, &rho, &x, DualDomain::Negative, 3).unwrap().value;
        let b = biconjugate(&s, &rho, &x.neg_part().negate(), DualDomain::Negative, 3)
            .unwrap()
            .value;
        assert!((a - b).abs() <= 1e-6);
        // And it recovers the primal for the convex loss.
        let primal = rho.eval(&s, &x).unwrap().finite().unwrap();
        assert!((a - primal).abs() <= 1e-6, "{a} vs {primal}");
    }

    #[test]
    fn biconjugate_checks_claims() {
        let s = uniform2();
        let var_rho = RiskFunctional::var(&s, 0.4, 0).unwrap();
        let x = s.position(vec![1.0, -1.0]).unwrap();
        assert!(matches!(
            biconjugate(&s, &var_rho, &x, DualDomain::SAdditive, 0),
            Err(EngineError::MissingClaim("convex"))
        ));
        let es_rho = RiskFunctional::es(&s, 0.5, 0).unwrap();
        assert!(matches!(
            biconjugate(&s, &es_rho, &x, DualDomain::Negative, 0),
            Err(EngineError::MissingClaim("surplus_invariant"))
        ));
    }

    #[test]
    fn support_functional_examples() {
        let c = SolidSet::boxed(vec![1.0, 1.0]).unwrap();
        let cert = support_functional(&c).unwrap();
        assert_eq!(cert.weights, vec![0.5, 0.5]);
        assert!((cert.sup_value - 1.0).abs() < 1e-12);

        let zero = SolidSet::boxed(vec![0.0, 0.0]).unwrap();
        let cert = support_functional(&zero).unwrap();
        assert_eq!(cert.sup_value, 0.0);
        assert!(cert.weights.iter().all(|&w| w > 0.0));

        let orthant = SolidSet::sublevel(2, Arc::new(|_| 0.0), 1.0, true);
        assert!(matches!(
            support_functional(&orthant),
            Err(EngineError::NotRadiallyBounded { .. })
        ));
    }

    #[test]
    fn polar_membership_examples() {
        // C = {X >= 0 ; E_P[X] <= 1} over the uniform 2-point space is the
        // down-hull of (2,0) and (0,2).
        let s = uniform2();
        let c = SolidSet::polytope(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let (v, sup) = polar_membership(&s, &c, &[1.0, 1.0], 0).unwrap();
        assert_eq!(v, PolarVerdict::Member);
        assert!((sup - 1.0).abs() < 1e-12);
        let (v, sup) = polar_membership(&s, &c, &[3.0, 0.0], 0).unwrap();
        assert_eq!(v, PolarVerdict::NotMember);
        assert!((sup - 3.0).abs() < 1e-12);
        let (v, _) = polar_membership(&s, &c, &[0.0, 0.0], 0).unwrap();
        assert_eq!(v, PolarVerdict::Member);
    }

    #[test]
    fn robust_polar_membership_of_measures() {
        let s = ScenarioSpace::new(
            vec!["a", "b"],
            vec![("P1", vec![1.0, 0.0]), ("P2", vec![0.5, 0.5])],
        )
        .unwrap();
        let c = SolidSet::polytope(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        // Canonical masses (0.25, 0.25): sup over C of the pairing is 0.5.
        let mu = DualMeasure::generator(&s, 1, vec![0.5, 0.5]).unwrap();
        let (v, sup) = robust_polar_membership(&s, &c, &mu).unwrap();
        assert_eq!(v, PolarVerdict::Member);
        assert!((sup - 0.5).abs() < 1e-12);
        // Scaling out of the polar.
        let big = DualMeasure::generator(&s, 1, vec![3.0, 3.0]).unwrap();
        let (v, _) = robust_polar_membership(&s, &c, &big).unwrap();
        assert_eq!(v, PolarVerdict::NotMember);
        // Signed measures are rejected.
        let signed = DualMeasure::generator(&s, 1, vec![-1.0, 1.0]).unwrap();
        assert!(robust_polar_membership(&s, &c, &signed).is_err());
    }

    #[test]
    fn polar_positive_witness_is_strictly_positive_and_feasible() {
        let s = uniform2();
        let c = SolidSet::polytope(vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let (z, sup) = polar_positive_witness(&s, &c, 0).unwrap();
        assert!(z.iter().all(|&v| v > 0.0));
        assert!(sup <= 1.0 + 1e-9);
    }

    #[test]
    fn bipolar_examples() {
        let c = SolidSet::polytope(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let r = bipolar_check(&c, &[2.0, 0.0]).unwrap();
        assert!(r.member && r.boundary && r.agree);
        assert!((r.gauge - 1.0).abs() <= 1e-9);

        let r = bipolar_check(&c, &[4.0, 0.0]).unwrap();
        assert!(!r.member && r.agree);
        assert!((r.gauge - 2.0).abs() <= 1e-9);

        let r = bipolar_check(&c, &[0.0, 0.0]).unwrap();
        assert!(r.member && r.agree && r.gauge == 0.0);
    }

    #[test]
    fn robust_bipolar_produces_a_valid_measure_witness() {
        let s = ScenarioSpace::new(
            vec!["a", "b", "c"],
            vec![("P1", vec![0.5, 0.5, 0.0]), ("P2", vec![0.0, 0.5, 0.5])],
        )
        .unwrap();
        let c = SolidSet::polytope(vec![
            vec![2.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap();
        let x = s.position(vec![1.0, 0.5, 0.0]).unwrap();
        let (report, witness) = bipolar_check_robust(&s, &c, &x).unwrap();
        assert!(report.agree);
        let mu = witness.expect("polytopes produce witnesses");
        let pairing = crate::robust::pair(&s, &x, &mu);
        assert!((pairing - report.gauge).abs() <= 1e-9, "{pairing} vs {}", report.gauge);
        // The witness is feasible for the polar: sup over C of the pairing <= 1.
        let d = mu.canonical_density(&s);
        let (sup, _) = c.linear_sup(&d).unwrap();
        assert!(sup <= 1.0 + 1e-9);
    }

    #[test]
    fn box_gauge_against_membership_on_random_queries() {
        let c = SolidSet::boxed(vec![1.0, 2.0, 0.5]).unwrap();
        for t in 0..500u64 {
            let mut rng = trial_rng(11, t);
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..3.0)).collect();
            let r = bipolar_check(&c, &x).unwrap();
            assert!(r.agree, "{x:?}: {r:?}");
        }
    }

    #[test]
    fn lp_margin_membership_matches_halfspace_oracle() {
        // C = {x >= 0 ; x1 + x2 <= 2, x1/1 + x2/4 <= 1} has vertices
        // (0,0), (1,0)... build from vertices and compare against the
        // halfspace description.
        let a1 = [0.5, 0.5];
        let a2 = [1.0, 0.25];
        // Vertices: (0,0), (1,0), (0,2), and the intersection of the two
        // constraint lines: 0.5x+0.5y=1 and x+0.25y=1 -> x = 2/3... solve:
        // y = 2 - x; x + 0.25(2 - x) = 1 -> 0.75x = 0.5 -> x = 2/3, y = 4/3.
        let c = SolidSet::polytope(vec![
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0 / 3.0, 4.0 / 3.0],
        ])
        .unwrap();
        for t in 0..500u64 {
            let mut rng = trial_rng(13, t);
            let x = [rng.gen_range(0.0..1.6), rng.gen_range(0.0..2.4)];
            let oracle = a1[0] * x[0] + a1[1] * x[1] <= 1.0 + 1e-12
                && a2[0] * x[0] + a2[1] * x[1] <= 1.0 + 1e-12;
            let got = c.contains(&x).unwrap();
            let near = ((a1[0] * x[0] + a1[1] * x[1]) - 1.0).abs() < 1e-9
                || ((a2[0] * x[0] + a2[1] * x[1]) - 1.0).abs() < 1e-9;
            assert!(got == oracle || near, "{x:?}: got {got}, oracle {oracle}");
            let gauge = c.gauge(&x).unwrap();
            let expect = (a1[0] * x[0] + a1[1] * x[1]).max(a2[0] * x[0] + a2[1] * x[1]);
            if x[0] + x[1] > 0.0 {
                assert!((gauge.value - expect).abs() <= 1e-9, "{x:?}: {} vs {expect}", gauge.value);
            }
        }
    }
}
