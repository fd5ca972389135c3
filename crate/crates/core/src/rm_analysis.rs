//! Slow flow on the `(ϑ, ξ)` cylinder: critical points, safe-basin
//! boundaries, the critical forcing `F̂` and erosion profiles.
//!
//! Along every vertical line `ϑ = const` the conserved quantity
//! `C(ϑ, ·)` has a single interior hump (the resonance ridge). Level curves
//! are therefore found line by line as the root nearest to the ridge on the
//! requested side. On `ϑ = 0` the ridge is the saddle, on `ϑ = π` the
//! center.
//!
//! Basin geometry for this well, checked at runtime:
//!
//! * `F < F̂`: the maximum-mechanism curve through `(π, ξ_max)` lies above
//!   the saddle separatrix and wraps the cylinder (`SBMT_II`); the saddle
//!   basin `SBST` sits inside it.
//! * `F > F̂`: the curve through `(π, ξ_max)` closes around the center
//!   (`SBMT_I`, with a `ϑ` gap around `0`) and the two basins are disjoint.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;
use crate::roots::{brent, scan_brackets};
use crate::slowflow::{
    action, phase_point, well_geometry, CylinderPoint, EnergyTerms, SystemParams, BARRIER,
};

/// Lower end of the energy window used for bracketing.
pub const XI_FLOOR: f64 = 1e-6;
/// Upper end of the energy window used for bracketing.
pub const XI_CEIL: f64 = BARRIER - 1e-6;
/// Points of the per-line pre-scan.
pub const PRESCAN_POINTS: usize = 256;
/// Default number of `ϑ` samples on a boundary.
pub const DEFAULT_THETA_SAMPLES: usize = 720;
/// Search window for the critical forcing.
pub const FORCING_SEARCH: (f64, f64) = (1e-5, 0.2);

const ROOT_XTOL: f64 = 1e-15;
const TANGENT_TOL: f64 = 1e-13;

/// Which side of the resonance ridge a level-curve branch lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Below,
    Above,
}

/// The slow-flow quantity with the energy pre-scan cached.
///
/// The pre-scan terms do not depend on `ϑ`, so one `SlowFlow` serves every
/// line of the cylinder.
#[derive(Debug, Clone)]
pub struct SlowFlow {
    params: SystemParams,
    grid: Vec<EnergyTerms>,
}

impl SlowFlow {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        let h = (XI_CEIL - XI_FLOOR) / (PRESCAN_POINTS - 1) as f64;
        let grid = (0..PRESCAN_POINTS)
            .map(|i| EnergyTerms::at(XI_FLOOR + h * i as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params, grid })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// `C(ϑ, ξ)` for `ξ ∈ (0, 1/6]`; the separatrix uses the limits
    /// `A(1/6) = 0`, `J(1/6) = 3/(5π)`.
    pub fn value(&self, theta: f64, xi: f64) -> Result<f64> {
        if xi == BARRIER {
            return Ok(BARRIER - self.params.omega * action(BARRIER)?);
        }
        Ok(EnergyTerms::at(xi)?.conservation(theta, &self.params))
    }

    fn value_unchecked(&self, theta: f64, xi: f64) -> f64 {
        self.value(theta, xi).unwrap_or(f64::NAN)
    }

    fn dxi_unchecked(&self, theta: f64, xi: f64) -> f64 {
        EnergyTerms::at(xi)
            .map(|t| t.conservation_dxi(theta, &self.params))
            .unwrap_or(f64::NAN)
    }

    fn line(&self, theta: f64) -> Vec<f64> {
        let cos = theta.cos();
        let p = &self.params;
        self.grid
            .iter()
            .map(|t| t.geometry.xi - p.forcing * t.forcing_coeff * cos - p.omega * t.action)
            .collect()
    }

    /// Interior maximum `(ξ_r, C_r)` of `C(ϑ, ·)`, if there is one.
    pub fn ridge(&self, theta: f64) -> Option<(f64, f64)> {
        let values = self.line(theta);
        let (imax, _) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if imax == 0 || imax == values.len() - 1 {
            return None;
        }
        let lo = self.grid[imax - 1].geometry.xi;
        let hi = self.grid[imax + 1].geometry.xi;
        let xi = brent(|x| self.dxi_unchecked(theta, x), lo, hi, ROOT_XTOL).ok()?;
        Some((xi, self.value_unchecked(theta, xi)))
    }

    /// Root of `C(ϑ, ξ) = level` nearest to the ridge on the given side.
    pub fn root(&self, theta: f64, level: f64, branch: Branch) -> Option<f64> {
        let (xr, cr) = self.ridge(theta)?;
        self.root_with_ridge(theta, level, branch, xr, cr)
    }

    /// Both branch roots `(below, above)` of `C(ϑ, ξ) = level`, sharing one
    /// ridge computation.
    pub fn roots(&self, theta: f64, level: f64) -> (Option<f64>, Option<f64>) {
        match self.ridge(theta) {
            Some((xr, cr)) => (
                self.root_with_ridge(theta, level, Branch::Below, xr, cr),
                self.root_with_ridge(theta, level, Branch::Above, xr, cr),
            ),
            None => (None, None),
        }
    }

    fn root_with_ridge(
        &self,
        theta: f64,
        level: f64,
        branch: Branch,
        xr: f64,
        cr: f64,
    ) -> Option<f64> {
        if (level - cr).abs() <= TANGENT_TOL {
            return Some(xr);
        }
        if level > cr {
            return None;
        }
        let values = self.line(theta);
        let xs: Vec<f64> = self.grid.iter().map(|t| t.geometry.xi).collect();
        // walk away from the ridge until C drops below the level
        let mut x_in = xr;
        match branch {
            Branch::Below => {
                for i in (0..xs.len()).rev().filter(|&i| xs[i] < xr) {
                    let v = values[i] - level;
                    if v < 0.0 {
                        return brent(|x| self.value_unchecked(theta, x) - level, xs[i], x_in, ROOT_XTOL).ok();
                    }
                    x_in = xs[i];
                }
            }
            Branch::Above => {
                for i in (0..xs.len()).filter(|&i| xs[i] > xr) {
                    let v = values[i] - level;
                    if v < 0.0 {
                        return brent(|x| self.value_unchecked(theta, x) - level, x_in, xs[i], ROOT_XTOL).ok();
                    }
                    x_in = xs[i];
                }
                // the last pre-scan cell up to the separatrix itself
                let v_top = self.value_unchecked(theta, BARRIER) - level;
                if v_top <= 0.0 {
                    return brent(|x| self.value_unchecked(theta, x) - level, x_in, BARRIER, ROOT_XTOL).ok();
                }
            }
        }
        None
    }
}

/// A critical point of the slow flow together with its level and Hessian
/// diagonal `(C_ϑϑ, C_ξξ)` (the mixed derivative vanishes on `ϑ ∈ {0, π}`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: CylinderPoint,
    pub level: f64,
    pub hessian: (f64, f64),
    /// `|∂C/∂ξ|` at the returned point.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoints {
    pub saddle: CriticalPoint,
    pub center: CriticalPoint,
}

fn stationary_points(flow: &SlowFlow, theta: f64, xtol: f64) -> Vec<CriticalPoint> {
    let p = flow.params;
    let brackets = scan_brackets(|x| flow.dxi_unchecked(theta, x), XI_FLOOR, XI_CEIL, PRESCAN_POINTS);
    brackets
        .into_iter()
        .filter_map(|(a, b)| brent(|x| flow.dxi_unchecked(theta, x), a, b, xtol).ok())
        .filter_map(|xi| {
            let terms = EnergyTerms::at(xi).ok()?;
            let h = 1e-6 * xi.min(BARRIER - xi).max(1e-9).min(1.0).sqrt();
            let cxx = (flow.dxi_unchecked(theta, xi + h) - flow.dxi_unchecked(theta, xi - h)) / (2.0 * h);
            let ctt = p.forcing * terms.forcing_coeff * theta.cos();
            Some(CriticalPoint {
                point: CylinderPoint::new(theta, xi),
                level: terms.conservation(theta, &p),
                hessian: (ctt, cxx),
                residual: terms.conservation_dxi(theta, &p).abs(),
            })
        })
        .collect()
}

/// Saddle (on `ϑ = 0`) and center (on `ϑ = π`) of the 1:1 resonance.
pub fn critical_points(params: &SystemParams) -> Result<CriticalPoints> {
    critical_points_with_tol(params, ROOT_XTOL)
}

/// [`critical_points`] with an explicit root tolerance in `ξ`.
pub fn critical_points_with_tol(params: &SystemParams, xtol: f64) -> Result<CriticalPoints> {
    if params.forcing == 0.0 {
        return Err(Error::DegenerateFlow(
            "F = 0: the slow flow does not depend on the slow phase".into(),
        ));
    }
    let flow = SlowFlow::new(*params)?;
    critical_points_of(&flow, xtol)
}

fn critical_points_of(flow: &SlowFlow, xtol: f64) -> Result<CriticalPoints> {
    let pick = |theta: f64, want_saddle: bool| {
        stationary_points(flow, theta, xtol)
            .into_iter()
            .filter(|c| {
                let (ctt, cxx) = c.hessian;
                cxx < 0.0 && ((ctt * cxx < 0.0) == want_saddle)
            })
            .max_by(|a, b| a.level.total_cmp(&b.level))
    };
    let saddle = pick(0.0, true).ok_or_else(|| {
        Error::NoResonance(format!(
            "no saddle on ϑ = 0 for F = {}, Ω = {}",
            flow.params.forcing, flow.params.omega
        ))
    })?;
    let center = pick(PI, false).ok_or_else(|| {
        Error::NoResonance(format!(
            "no center on ϑ = π for F = {}, Ω = {}",
            flow.params.forcing, flow.params.omega
        ))
    })?;
    for c in [&saddle, &center] {
        if c.residual > 1e-10 {
            return Err(Error::Convergence(format!(
                "critical point residual {} exceeds 1e-10",
                c.residual
            )));
        }
    }
    Ok(CriticalPoints { saddle, center })
}

/// Sampling of the slow phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    thetas: Vec<f64>,
}

impl ThetaGrid {
    /// `n` uniform points on `[0, 2π)`. For even `n` the midpoint is exactly
    /// `π`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(domain("ThetaGrid", format!("need at least 3 points, got {n}")));
        }
        Ok(Self {
            thetas: (0..n)
                .map(|i| if 2 * i == n { PI } else { TAU * i as f64 / n as f64 })
                .collect(),
        })
    }

    /// Uniform points with step at most `delta` on `[0, 2π)`; the count is
    /// rounded up to an even number so that `π` is a sample.
    pub fn with_step(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(domain("ThetaGrid", format!("step {delta} must be positive")));
        }
        let n = ((TAU / delta).ceil() as usize).max(4);
        Self::uniform(n + n % 2)
    }

    pub fn from_points(thetas: Vec<f64>) -> Result<Self> {
        if thetas.len() < 3 || thetas.iter().any(|t| !t.is_finite()) {
            return Err(domain("ThetaGrid", "need at least 3 finite points"));
        }
        Ok(Self { thetas })
    }

    pub fn points(&self) -> &[f64] {
        &self.thetas
    }
}

/// Samples of one branch of a level set.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurve {
    pub points: Vec<CylinderPoint>,
    /// Grid angles where the branch has no root.
    pub missing: Vec<f64>,
}

/// Solve `C(ϑ, ξ) = level` on each grid angle, on one side of the ridge.
pub fn level_curve(
    level: f64,
    params: &SystemParams,
    grid: &ThetaGrid,
    branch: Branch,
) -> Result<LevelCurve> {
    let flow = SlowFlow::new(*params)?;
    level_curve_on(&flow, level, grid, branch)
}

pub(crate) fn level_curve_on(
    flow: &SlowFlow,
    level: f64,
    grid: &ThetaGrid,
    branch: Branch,
) -> Result<LevelCurve> {
    let roots: Vec<Option<f64>> = grid
        .thetas
        .par_iter()
        .map(|&th| flow.root(th, level, branch))
        .collect();
    let mut points = Vec::new();
    let mut missing = Vec::new();
    for (&th, r) in grid.thetas.iter().zip(roots) {
        match r {
            Some(xi) => points.push(CylinderPoint::new(th, xi)),
            None => missing.push(th),
        }
    }
    if points.is_empty() {
        return Err(Error::NoCurve(format!("no ϑ admits C = {level}")));
    }
    Ok(LevelCurve { points, missing })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// Saddle-type basin: below the separatrix through the saddle.
    #[serde(rename = "SBST")]
    Sbst,
    /// Maximum-type basin that does not wrap the cylinder.
    #[serde(rename = "SBMT_I")]
    SbmtI,
    /// Maximum-type basin that wraps the whole cylinder.
    #[serde(rename = "SBMT_II")]
    SbmtII,
    /// Phase-invariant basin, the flat circle `ξ = ξ̂`.
    #[serde(rename = "TRUE")]
    TrueCircle,
}

impl BoundaryKind {
    pub fn label(self) -> &'static str {
        match self {
            BoundaryKind::Sbst => "SBST",
            BoundaryKind::SbmtI => "SBMT_I",
            BoundaryKind::SbmtII => "SBMT_II",
            BoundaryKind::TrueCircle => "TRUE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub theta: f64,
    pub xi: f64,
    pub branch: Branch,
}

/// Sampled boundary of a safe basin on the cylinder.
///
/// Single-branch boundaries are the graph `ξ = ξ_b(ϑ)` over `[0, 2π)`.
/// `SBMT_I` boundaries are closed loops: the upper branch with ascending
/// `ϑ` followed by the lower branch with descending `ϑ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinBoundary {
    pub kind: BoundaryKind,
    pub level: f64,
    pub samples: Vec<BoundarySample>,
    /// `(−g, g)`: the slow-phase interval around `0` without boundary.
    pub theta_gap: Option<(f64, f64)>,
}

impl BasinBoundary {
    /// The phase-invariant circle `ξ = xi` sampled at `n` angles.
    pub fn circle(xi: f64, n: usize, params: &SystemParams) -> Result<Self> {
        let grid = ThetaGrid::uniform(n)?;
        let flow = SlowFlow::new(*params)?;
        let level = if params.forcing == 0.0 { flow.value(0.0, xi)? } else { f64::NAN };
        Ok(Self {
            kind: BoundaryKind::TrueCircle,
            level,
            samples: grid
                .thetas
                .iter()
                .map(|&theta| BoundarySample {
                    theta,
                    xi,
                    branch: Branch::Below,
                })
                .collect(),
            theta_gap: None,
        })
    }

    pub fn points(&self) -> impl Iterator<Item = CylinderPoint> + '_ {
        self.samples.iter().map(|s| CylinderPoint::new(s.theta, s.xi))
    }

    fn is_flat(&self) -> bool {
        let first = self.samples[0].xi;
        self.samples.iter().all(|s| s.xi == first)
    }
}

/// How the saddle basin sits relative to the maximum-type basin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasinRelation {
    /// SBST lies inside SBMT.
    Nested,
    /// SBST and SBMT share no interior points.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeBasins {
    pub critical: CriticalPoints,
    pub sbst: Option<BasinBoundary>,
    pub sbmt: Option<BasinBoundary>,
    pub relation: Option<BasinRelation>,
}

/// Level of the maximum-mechanism curve, `C(π, ξ_max)`.
pub fn maximum_level(params: &SystemParams) -> Result<f64> {
    SlowFlow::new(*params)?.value(PI, params.xi_max)
}

/// Boundaries of the saddle-type and maximum-type safe basins.
pub fn sb_boundaries(params: &SystemParams) -> Result<SafeBasins> {
    sb_boundaries_with(params, DEFAULT_THETA_SAMPLES)
}

/// [`sb_boundaries`] with `n_theta` uniform slow-phase samples (rounded up
/// to an even count so that the tangency angle `π` is sampled).
pub fn sb_boundaries_with(params: &SystemParams, n_theta: usize) -> Result<SafeBasins> {
    if params.forcing == 0.0 {
        return Err(Error::DegenerateFlow("F = 0 has no saddle".into()));
    }
    let grid = ThetaGrid::uniform(n_theta + n_theta % 2)?;
    let flow = SlowFlow::new(*params)?;
    let critical = critical_points_of(&flow, ROOT_XTOL)?;
    let sbst = saddle_boundary(&flow, &critical, &grid);
    let sbmt = maximum_boundary(&flow, &critical, &grid)?;

    let relation = match (&sbst, &sbmt) {
        (Some(s), Some(m)) => Some(relate(&flow, s, m)?),
        _ => None,
    };
    Ok(SafeBasins {
        critical,
        sbst,
        sbmt,
        relation,
    })
}

fn saddle_boundary(flow: &SlowFlow, critical: &CriticalPoints, grid: &ThetaGrid) -> Option<BasinBoundary> {
    let level = critical.saddle.level;
    let curve = level_curve_on(flow, level, grid, Branch::Below).ok()?;
    if !curve.missing.is_empty() {
        return None;
    }
    let samples = curve
        .points
        .iter()
        .map(|p| BoundarySample {
            theta: p.theta,
            xi: p.xi.min(critical.saddle.point.xi),
            branch: Branch::Below,
        })
        .collect();
    Some(BasinBoundary {
        kind: BoundaryKind::Sbst,
        level,
        samples,
        theta_gap: None,
    })
}

fn maximum_boundary(
    flow: &SlowFlow,
    critical: &CriticalPoints,
    grid: &ThetaGrid,
) -> Result<Option<BasinBoundary>> {
    let p = flow.params;
    if p.xi_max <= critical.center.point.xi {
        return Err(Error::Tangency(format!(
            "ξ_max = {} lies below the resonance center ξ_c = {}",
            p.xi_max, critical.center.point.xi
        )));
    }
    let level = flow.value(PI, p.xi_max)?;
    let upper: Vec<(f64, Option<(f64, f64)>, Option<f64>)> = grid
        .thetas
        .par_iter()
        .map(|&th| {
            let ridge = flow.ridge(th);
            let root = ridge.and_then(|(xr, cr)| {
                if th == PI {
                    // the tangency point itself
                    return Some(p.xi_max);
                }
                flow.root_with_ridge(th, level, Branch::Above, xr, cr)
            });
            (th, ridge, root)
        })
        .collect();

    let wraps = upper.iter().all(|(_, _, r)| r.is_some());
    let boundary = if wraps {
        BasinBoundary {
            kind: BoundaryKind::SbmtII,
            level,
            samples: upper
                .iter()
                .map(|&(theta, _, r)| BoundarySample {
                    theta,
                    xi: r.unwrap(),
                    branch: Branch::Above,
                })
                .collect(),
            theta_gap: None,
        }
    } else {
        closed_maximum_boundary(flow, level, grid)?
    };
    check_tangency(&boundary, p.xi_max)?;
    Ok(Some(boundary))
}

/// Half-width `g` of the gap `(−g, g)` where the ridge falls below `level`.
fn gap_half_width(flow: &SlowFlow, level: f64, grid: &ThetaGrid) -> Result<f64> {
    let ridge_excess = |th: f64| flow.ridge(th).map(|(_, cr)| cr - level).unwrap_or(-1.0);
    let mut inside = 0.0;
    let mut outside = PI;
    for &th in grid.thetas.iter().filter(|&&t| t <= PI) {
        if ridge_excess(th) < 0.0 {
            inside = th;
        } else {
            outside = th;
            break;
        }
    }
    if ridge_excess(outside) < 0.0 {
        return Err(Error::NoCurve(format!("level {level} misses the ridge on ϑ = π")));
    }
    brent(ridge_excess, inside, outside, 1e-12)
}

fn closed_maximum_boundary(flow: &SlowFlow, level: f64, grid: &ThetaGrid) -> Result<BasinBoundary> {
    let g = gap_half_width(flow, level, grid)?;
    let mut thetas = vec![g];
    thetas.extend(grid.thetas.iter().copied().filter(|&t| t > g && t < TAU - g));
    thetas.push(TAU - g);

    let pairs: Vec<(f64, Option<f64>, Option<f64>)> = thetas
        .par_iter()
        .map(|&th| {
            let Some((xr, cr)) = flow.ridge(th) else {
                return (th, None, None);
            };
            let at_edge = th == g || th == TAU - g;
            if at_edge {
                return (th, Some(xr), Some(xr));
            }
            let up = if th == PI {
                Some(flow.params.xi_max)
            } else {
                flow.root_with_ridge(th, level, Branch::Above, xr, cr)
            };
            (th, up, flow.root_with_ridge(th, level, Branch::Below, xr, cr))
        })
        .collect();

    let mut samples = Vec::with_capacity(2 * pairs.len());
    for &(theta, up, _) in &pairs {
        let xi = up.ok_or_else(|| Error::NoCurve(format!("upper branch missing at ϑ = {theta}")))?;
        samples.push(BoundarySample {
            theta,
            xi,
            branch: Branch::Above,
        });
    }
    for &(theta, _, lo) in pairs.iter().rev() {
        let xi = lo.ok_or_else(|| Error::NoCurve(format!("lower branch missing at ϑ = {theta}")))?;
        samples.push(BoundarySample {
            theta,
            xi,
            branch: Branch::Below,
        });
    }
    Ok(BasinBoundary {
        kind: BoundaryKind::SbmtI,
        level,
        samples,
        theta_gap: Some((-g, g)),
    })
}

/// The maximum-type boundary must touch `ξ_max` at `ϑ = π` and nowhere
/// exceed it.
fn check_tangency(boundary: &BasinBoundary, xi_max: f64) -> Result<()> {
    let (theta_top, xi_top) = boundary
        .samples
        .iter()
        .map(|s| (s.theta, s.xi))
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, s| if s.1 > acc.1 { s } else { acc });
    if xi_top > xi_max + 1e-12 {
        return Err(Error::Tangency(format!(
            "boundary reaches ξ = {xi_top} at ϑ = {theta_top}, expected the maximum ξ_max = {xi_max} at ϑ = π"
        )));
    }
    let at_pi = boundary
        .samples
        .iter()
        .find(|s| s.theta == PI && s.branch == Branch::Above)
        .ok_or_else(|| Error::Tangency("ϑ = π is not sampled".into()))?;
    if (at_pi.xi - xi_max).abs() > 1e-9 {
        return Err(Error::Tangency(format!(
            "boundary passes ϑ = π at ξ = {}, not ξ_max = {xi_max}",
            at_pi.xi
        )));
    }
    Ok(())
}

fn relate(flow: &SlowFlow, sbst: &BasinBoundary, sbmt: &BasinBoundary) -> Result<BasinRelation> {
    match sbmt.kind {
        BoundaryKind::SbmtII => {
            for (s, m) in sbst.samples.iter().zip(&sbmt.samples) {
                if s.xi > m.xi + 1e-12 {
                    return Err(Error::Geometry(format!(
                        "SBST leaves SBMT_II at ϑ = {} ({} > {})",
                        s.theta, s.xi, m.xi
                    )));
                }
            }
            Ok(BasinRelation::Nested)
        }
        BoundaryKind::SbmtI => {
            let lower = sbmt.samples.iter().filter(|s| s.branch == Branch::Below);
            for m in lower {
                let xs = flow
                    .root(m.theta, sbst.level, Branch::Below)
                    .ok_or_else(|| Error::Geometry(format!("SBST undefined at ϑ = {}", m.theta)))?;
                if xs > m.xi + 1e-12 {
                    return Err(Error::Geometry(format!(
                        "SBST overlaps SBMT_I at ϑ = {} ({xs} > {})",
                        m.theta, m.xi
                    )));
                }
            }
            Ok(BasinRelation::Disjoint)
        }
        _ => Err(Error::Geometry("unexpected maximum-type kind".into())),
    }
}

/// Point-membership test for the region enclosed by a boundary.
///
/// Single-branch boundaries enclose `0 ≤ ξ < ξ_b(ϑ)`; `SBMT_I` encloses the
/// loop between its branches.
pub fn contains(
    boundary: &BasinBoundary,
    flow: &SlowFlow,
    pt: CylinderPoint,
) -> Result<bool> {
    let theta = pt.theta.rem_euclid(TAU);
    match boundary.kind {
        BoundaryKind::TrueCircle => Ok(pt.xi < boundary.samples[0].xi),
        BoundaryKind::Sbst | BoundaryKind::SbmtII => {
            let branch = if boundary.kind == BoundaryKind::Sbst { Branch::Below } else { Branch::Above };
            let limit = if boundary.kind == BoundaryKind::SbmtII && theta == PI {
                Some(flow.params.xi_max)
            } else {
                flow.root(theta, boundary.level, branch)
            };
            Ok(limit.is_some_and(|x| pt.xi < x))
        }
        BoundaryKind::SbmtI => {
            let (_, g) = boundary.theta_gap.unwrap_or((0.0, 0.0));
            if theta <= g || theta >= TAU - g {
                return Ok(false);
            }
            let Some((xr, cr)) = flow.ridge(theta) else {
                return Ok(false);
            };
            let up = flow.root_with_ridge(theta, boundary.level, Branch::Above, xr, cr);
            let lo = flow.root_with_ridge(theta, boundary.level, Branch::Below, xr, cr);
            Ok(matches!((lo, up), (Some(l), Some(u)) if pt.xi > l && pt.xi < u))
        }
    }
}

/// The phase-invariant safe basin `[0, 2π) × [0, ξ̂]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueSafeBasin {
    pub xi_hat: f64,
    /// Slow phase where the boundary touches the circle.
    pub theta_min: f64,
    /// Level of the boundary that defines `ξ̂`.
    pub level: f64,
    /// Which boundary defines `ξ̂`.
    pub kind: BoundaryKind,
}

/// Level `ξ̂` of the phase-invariant safe basin.
///
/// Below the saddle connection it is the lowest point of the wrapping
/// maximum-type curve, `ξ_m(0)`; at and above it, the lowest point of the
/// saddle-type curve, `ξ_s(π)`.
pub fn true_sb_level(params: &SystemParams) -> Result<TrueSafeBasin> {
    params.validate()?;
    let flow = SlowFlow::new(*params)?;
    if params.forcing == 0.0 {
        return Ok(TrueSafeBasin {
            xi_hat: params.xi_max,
            theta_min: 0.0,
            level: flow.value(0.0, params.xi_max)?,
            kind: BoundaryKind::SbmtII,
        });
    }
    let critical = critical_points_of(&flow, ROOT_XTOL)?;
    let c_max = flow.value(PI, params.xi_max)?;
    if c_max < critical.saddle.level {
        let xi = flow
            .root(0.0, c_max, Branch::Above)
            .ok_or_else(|| Error::NoCurve("maximum-type curve misses ϑ = 0".into()))?;
        Ok(TrueSafeBasin {
            xi_hat: xi,
            theta_min: 0.0,
            level: c_max,
            kind: BoundaryKind::SbmtII,
        })
    } else {
        let xi = match flow.root(PI, critical.saddle.level, Branch::Below) {
            Some(xi) => xi,
            // the saddle level sits below the well bottom on ϑ = π: nothing is left
            None if critical.saddle.level <= flow.value(PI, XI_FLOOR)? => 0.0,
            None => return Err(Error::NoCurve("saddle curve misses ϑ = π".into())),
        };
        Ok(TrueSafeBasin {
            xi_hat: xi,
            theta_min: PI,
            level: critical.saddle.level,
            kind: BoundaryKind::Sbst,
        })
    }
}

/// `C(π, ξ_max) − C(0, ξ_saddle)`; zero at the saddle connection.
pub fn saddle_connection_residual(params: &SystemParams) -> Result<f64> {
    let flow = SlowFlow::new(*params)?;
    let critical = critical_points_of(&flow, ROOT_XTOL)?;
    Ok(flow.value(PI, params.xi_max)? - critical.saddle.level)
}

/// Critical forcing `F̂(Ω, ξ_max)` where the maximum-type curve becomes the
/// saddle connection.
pub fn critical_forcing(omega: f64, xi_max: f64) -> Result<f64> {
    let base = SystemParams::new(FORCING_SEARCH.0, omega, 0.0, xi_max)?;
    let residual = |f: f64| saddle_connection_residual(&base.with_forcing(f));

    // log-spaced scan, stopping where the saddle ceases to exist
    let n = 200;
    let ratio = (FORCING_SEARCH.1 / FORCING_SEARCH.0).ln() / (n - 1) as f64;
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    let mut vanished = None;
    for i in 0..n {
        let f = FORCING_SEARCH.0 * (ratio * i as f64).exp();
        match residual(f) {
            Ok(r) => {
                if let Some((fp, rp)) = prev {
                    if rp.signum() != r.signum() || r == 0.0 {
                        bracket = Some((fp, f));
                        break;
                    }
                }
                prev = Some((f, r));
            }
            Err(_) if prev.is_some() => {
                vanished = Some(f);
                break;
            }
            Err(_) => {}
        }
    }
    let (a, b) = bracket.ok_or_else(|| {
        let detail = match (prev, vanished) {
            (Some((fp, rp)), Some(fv)) => format!(
                "; the saddle disappears between F = {fp} and F = {fv} with residual {rp} still nonzero"
            ),
            _ => String::new(),
        };
        Error::NoConnection(format!(
            "no sign change of the saddle-connection residual for Ω = {omega}, ξ_max = {xi_max}{detail}"
        ))
    })?;
    let f_hat = brent(|f| residual(f).unwrap_or(f64::NAN), a, b, 1e-14)?;
    let r = residual(f_hat)?;
    if r.abs() > 1e-10 {
        return Err(Error::Convergence(format!("saddle-connection residual {r} at F̂ = {f_hat}")));
    }
    Ok(f_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErosionEntry {
    pub forcing: f64,
    pub xi_hat: f64,
    pub mu: f64,
}

/// Area of the phase-invariant safe basin against forcing amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErosionProfile {
    pub entries: Vec<ErosionEntry>,
    pub omega: f64,
    pub xi_max: f64,
    pub critical_forcing: Option<f64>,
}

/// Offset used to bracket the jump at `F̂`.
pub const JUMP_OFFSET: f64 = 1e-8;

pub fn erosion_profile(f_grid: &[f64], omega: f64, xi_max: f64) -> Result<ErosionProfile> {
    if f_grid.is_empty() {
        return Err(domain("erosion_profile", "empty forcing grid"));
    }
    if f_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("erosion_profile", "forcing grid must be strictly increasing"));
    }
    SystemParams::new(f_grid[0], omega, 0.0, xi_max)?;
    let f_hat = critical_forcing(omega, xi_max).ok();
    let mut forcings = f_grid.to_vec();
    if let Some(fh) = f_hat {
        let lo = fh - JUMP_OFFSET;
        let hi = fh + JUMP_OFFSET;
        if lo > f_grid[0] && hi < f_grid[f_grid.len() - 1] {
            forcings.push(lo);
            forcings.push(hi);
            forcings.sort_by(f64::total_cmp);
            forcings.dedup();
        }
    }
    let entries = forcings
        .par_iter()
        .map(|&f| {
            let params = SystemParams::new(f, omega, 0.0, xi_max)?;
            let t = true_sb_level(&params)?;
            Ok(ErosionEntry {
                forcing: f,
                xi_hat: t.xi_hat,
                mu: TAU * action(t.xi_hat)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErosionProfile {
        entries,
        omega,
        xi_max,
        critical_forcing: f_hat,
    })
}

fn validate_samples(boundary: &BasinBoundary) -> Result<()> {
    if boundary.samples.len() < 3 {
        return Err(Error::Geometry("fewer than three boundary samples".into()));
    }
    let upper: Vec<&BoundarySample> = match boundary.kind {
        BoundaryKind::SbmtI => boundary.samples.iter().filter(|s| s.branch == Branch::Above).collect(),
        _ => boundary.samples.iter().collect(),
    };
    if upper.windows(2).any(|w| !(w[1].theta > w[0].theta)) {
        return Err(Error::Geometry("boundary samples are not ordered in ϑ: self-intersecting polygon".into()));
    }
    if boundary.kind == BoundaryKind::SbmtI {
        let lower: Vec<&BoundarySample> =
            boundary.samples.iter().filter(|s| s.branch == Branch::Below).rev().collect();
        if lower.len() != upper.len()
            || upper.iter().zip(&lower).any(|(u, l)| u.theta != l.theta || l.xi > u.xi + 1e-12)
        {
            return Err(Error::Geometry("SBMT_I branches cross: self-intersecting polygon".into()));
        }
    }
    Ok(())
}

/// Area in the `(q, p)` plane of the region enclosed by a boundary.
///
/// The determinant of `(ϑ, ξ) ↦ (q, p)` is `J′(ξ)`, so the double integral
/// reduces to `∫ J(ξ_b(ϑ)) dϑ`. The boundary is re-solved at every
/// quadrature node rather than interpolated from the samples.
pub fn basin_area(boundary: &BasinBoundary, params: &SystemParams) -> Result<f64> {
    validate_samples(boundary)?;
    if boundary.kind == BoundaryKind::TrueCircle || boundary.is_flat() {
        let xi = boundary.samples[0].xi;
        return Ok(TAU * action(xi)?);
    }
    let flow = SlowFlow::new(*params)?;
    let j = |xi: f64| action(xi).unwrap_or(f64::NAN);
    let tol = 1e-12;
    let area = match boundary.kind {
        BoundaryKind::Sbst | BoundaryKind::SbmtII => {
            let branch = if boundary.kind == BoundaryKind::Sbst { Branch::Below } else { Branch::Above };
            let half = quad::integrate(
                |th| {
                    if boundary.kind == BoundaryKind::SbmtII && th == PI {
                        return j(params.xi_max);
                    }
                    flow.root(th, boundary.level, branch).map(j).unwrap_or(f64::NAN)
                },
                0.0,
                PI,
                tol,
            );
            2.0 * half
        }
        BoundaryKind::SbmtI => {
            let (_, g) = boundary.theta_gap.ok_or_else(|| Error::Geometry("SBMT_I without gap".into()))?;
            // ϑ = g + (π − g)s² removes the square-root behaviour at the gap edge
            let span = PI - g;
            let half = quad::integrate(
                |s| {
                    let th = g + span * s * s;
                    let Some((xr, cr)) = flow.ridge(th) else { return f64::NAN };
                    let up = if s == 1.0 {
                        Some(params.xi_max)
                    } else {
                        flow.root_with_ridge(th, boundary.level, Branch::Above, xr, cr)
                    };
                    let lo = flow.root_with_ridge(th, boundary.level, Branch::Below, xr, cr);
                    match (up, lo) {
                        (Some(u), Some(l)) => (j(u) - j(l)) * 2.0 * span * s,
                        _ => 0.0,
                    }
                },
                0.0,
                1.0,
                tol,
            );
            2.0 * half
        }
        BoundaryKind::TrueCircle => unreachable!(),
    };
    if !area.is_finite() {
        return Err(Error::Geometry("boundary could not be re-solved during integration".into()));
    }
    Ok(area)
}

/// Shoelace area of the boundary samples mapped to the `(q, p)` plane.
///
/// Cross-check for [`basin_area`]; accuracy is second order in the sample
/// spacing.
pub fn mapped_polygon_area(boundary: &BasinBoundary) -> Result<f64> {
    validate_samples(boundary)?;
    let mut pts = Vec::with_capacity(boundary.samples.len());
    for s in &boundary.samples {
        let g = well_geometry(s.xi)?;
        let big_k = PI / (2.0 * crate::elliptic::agm(1.0, g.kp));
        let pp = phase_point(&g, big_k, s.theta);
        pts.push((pp.q, pp.p));
    }
    let n = pts.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    Ok(0.5 * twice.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(f: f64) -> SystemParams {
        SystemParams::new(f, 0.89, 0.0, 0.1657).unwrap()
    }

    #[test]
    fn zero_forcing_is_degenerate() {
        assert!(matches!(critical_points(&params(0.0)), Err(Error::DegenerateFlow(_))));
    }

    #[test]
    fn saddle_and_center_positions() {
        let c = critical_points(&params(0.015)).unwrap();
        assert_eq!(c.saddle.point.theta, 0.0);
        assert_eq!(c.center.point.theta, PI);
        assert!(c.saddle.residual <= 1e-10 && c.center.residual <= 1e-10);
        assert!(c.saddle.hessian.0 * c.saddle.hessian.1 < 0.0);
        assert!(c.center.hessian.0 * c.center.hessian.1 > 0.0);
        assert!(c.saddle.point.xi < c.center.point.xi);
    }

    #[test]
    fn saddle_lies_on_its_level_set() {
        let p = params(0.012);
        let c = critical_points(&p).unwrap();
        let flow = SlowFlow::new(p).unwrap();
        let xi = flow.root(0.0, c.saddle.level, Branch::Below).unwrap();
        assert!((xi - c.saddle.point.xi).abs() < 1e-9);
    }

    #[test]
    fn flat_level_set_without_forcing() {
        let p = params(0.0);
        let level = 0.12 - 0.89 * action(0.12).unwrap();
        let grid = ThetaGrid::uniform(12).unwrap();
        let curve = level_curve(level, &p, &grid, Branch::Above).unwrap();
        assert!(curve.missing.is_empty());
        for pt in &curve.points {
            assert!((pt.xi - 0.12).abs() < 1e-10);
        }
    }

    #[test]
    fn theta_grid_needs_three_points() {
        assert!(ThetaGrid::uniform(2).is_err());
        assert!(ThetaGrid::with_step(0.0).is_err());
        assert_eq!(ThetaGrid::with_step(0.01).unwrap().points().len(), 630);
        assert_eq!(ThetaGrid::uniform(8).unwrap().points()[4], PI);
    }

    #[test]
    fn missing_level_reports_no_curve() {
        let grid = ThetaGrid::uniform(16).unwrap();
        let r = level_curve(1.0, &params(0.01), &grid, Branch::Above);
        assert!(matches!(r, Err(Error::NoCurve(_))));
    }

    #[test]
    fn kinds_on_both_sides_of_the_connection() {
        let below = sb_boundaries_with(&params(0.012), 90).unwrap();
        assert_eq!(below.sbmt.as_ref().unwrap().kind, BoundaryKind::SbmtII);
        assert_eq!(below.relation, Some(BasinRelation::Nested));
        let above = sb_boundaries_with(&params(0.02), 90).unwrap();
        let sbmt = above.sbmt.as_ref().unwrap();
        assert_eq!(sbmt.kind, BoundaryKind::SbmtI);
        assert!(sbmt.theta_gap.unwrap().1 > 0.0);
        assert!(above.sbst.is_some());
        assert_eq!(above.relation, Some(BasinRelation::Disjoint));
    }

    #[test]
    fn erosion_grid_validation() {
        assert!(erosion_profile(&[], 0.89, 0.1657).is_err());
        assert!(erosion_profile(&[0.01, 0.005], 0.89, 0.1657).is_err());
        assert!(erosion_profile(&[0.01], 0.89, 0.2).is_err());
    }

    #[test]
    fn polygon_rejects_unordered_samples() {
        let mut b = BasinBoundary::circle(0.1, 8, &params(0.0)).unwrap();
        b.kind = BoundaryKind::Sbst;
        b.samples.swap(2, 5);
        assert!(matches!(mapped_polygon_area(&b), Err(Error::Geometry(_))));
        assert!(matches!(basin_area(&b, &params(0.01)), Err(Error::Geometry(_))));
    }
}
