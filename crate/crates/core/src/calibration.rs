//! Effective escape threshold `ξ*` by bisection on level curves around the
//! resonance center.
//!
//! For a trial energy `ξ̃` the level curve `Γ` through `(π, ξ̃)` is sampled,
//! mapped to initial conditions and simulated. `𝔐(ξ̃) = 1` when any of them
//! escapes. `ξ*` is the largest level found safe, to within `ε`, below the
//! first escaping level.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rm_analysis::{critical_points, SlowFlow, ThetaGrid, XI_CEIL};
use crate::simulator::{simulate_escape_many, SimConfig};
use crate::slowflow::{initial_angle_offset, to_phase_plane, CylinderPoint, PhasePoint, SystemParams, BARRIER};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_DELTA: f64 = 0.01;
/// Step of the upward scan for `ξ†`, in units of `ε`.
pub const SCAN_STEP_EPSILONS: f64 = 5.0;

/// Result of one effective-threshold computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub forcing: f64,
    pub omega: f64,
    pub psi_used: f64,
    pub xi_star: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub t_max_periods: u32,
    /// Bisection iterations after the scan.
    pub iterations: u32,
    /// Center energy `ξ_c`, the lower end of the search.
    pub xi_center: f64,
    /// First escaping scan level, if any.
    pub xi_dagger: Option<f64>,
    /// No escaping level was found below the scan top; `ξ*` is the top.
    pub no_correction: bool,
    /// `𝔐(ξ*) = 0` and `𝔐(ξ* + ε) = 1` on independent re-evaluation.
    pub bracket_verified: bool,
    /// The three local-constancy probes agreed with the bracket.
    pub locally_constant: bool,
}

/// Initial conditions on the level curve through `(π, ξ̃)`.
///
/// Samples use slow-phase step `delta`. The upper branch is always taken;
/// when the curve closes around the center (it misses some `ϑ`), the lower
/// branch is pooled in as well.
pub fn curve_initial_conditions(xi_tilde: f64, params: &SystemParams, delta: f64) -> Result<Vec<PhasePoint>> {
    if !xi_tilde.is_finite() || xi_tilde <= 0.0 || xi_tilde >= BARRIER {
        return Err(domain("mapping_M", format!("level {xi_tilde} outside (0, 1/6)")));
    }
    let grid = ThetaGrid::with_step(delta)?;
    let flow = SlowFlow::new(*params)?;
    let level = flow.value(PI, xi_tilde)?;
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut closed = false;
    for &theta in grid.points() {
        let (below, above) = flow.roots(theta, level);
        let above = if theta == PI { Some(xi_tilde) } else { above };
        match above {
            Some(xi) => upper.push(CylinderPoint::new(theta, xi)),
            None => closed = true,
        }
        if let Some(xi) = below {
            lower.push(CylinderPoint::new(theta, xi));
        }
    }
    if upper.is_empty() {
        return Err(Error::NoCurve(format!("no level curve through (π, {xi_tilde})")));
    }
    let mut points = upper;
    if closed {
        points.extend(lower);
    }
    let offset = initial_angle_offset(params.psi);
    points
        .into_iter()
        .filter(|pt| pt.xi > 0.0 && pt.xi < BARRIER)
        .map(|pt| to_phase_plane(pt, offset))
        .collect()
}

/// `𝔐(ξ̃)`: `true` (1) when some initial condition on `Γ_ξ̃` escapes within
/// `t_max_periods`, `false` (0) when all are safe.
///
/// The escape threshold of the simulations is `params.xi_max`.
pub fn mapping_m(xi_tilde: f64, params: &SystemParams, delta: f64, cfg: &SimConfig) -> Result<bool> {
    let ics = curve_initial_conditions(xi_tilde, params, delta)?;
    Ok(simulate_escape_many(&ics, params, cfg)?.iter().any(|r| r.escaped))
}

fn check_tolerances(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(domain("effective_threshold", format!("epsilon {epsilon} must be > 0")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(domain("effective_threshold", format!("delta {delta} must be > 0")));
    }
    Ok(())
}

/// Bisection for the effective threshold `ξ*` at forcing phase
/// `params.psi`.
pub fn effective_threshold(params: &SystemParams, epsilon: f64, delta: f64, cfg: &SimConfig) -> Result<ThresholdResult> {
    check_tolerances(epsilon, delta)?;
    cfg.validate()?;
    let crit = critical_points(params)?;
    let xi_c = crit.center.point.xi;
    let m = |xi: f64| mapping_m(xi, params, delta, cfg);

    if m(xi_c)? {
        return Err(Error::InconsistentCenter(format!(
            "the center (π, {xi_c}) escapes for F = {}; the forcing is too large for the bisection",
            params.forcing
        )));
    }

    let top = XI_CEIL;
    let step = SCAN_STEP_EPSILONS * epsilon;
    let mut lo = xi_c;
    let mut dagger = None;
    let mut k = 1;
    loop {
        let xi = (xi_c + step * k as f64).min(top);
        if m(xi)? {
            dagger = Some(xi);
            break;
        }
        lo = xi;
        if xi >= top {
            break;
        }
        k += 1;
    }

    let mut result = ThresholdResult {
        forcing: params.forcing,
        omega: params.omega,
        psi_used: params.psi,
        xi_star: lo,
        epsilon,
        delta,
        t_max_periods: cfg.t_max_periods,
        iterations: 0,
        xi_center: xi_c,
        xi_dagger: dagger,
        no_correction: dagger.is_none(),
        bracket_verified: false,
        locally_constant: false,
    };
    let Some(mut hi) = dagger else {
        result.bracket_verified = !m(lo)?;
        result.locally_constant = result.bracket_verified;
        return Ok(result);
    };

    let mut iterations = 0;
    while hi - lo > epsilon {
        let mid = 0.5 * (lo + hi);
        if m(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    result.xi_star = lo;
    result.iterations = iterations;

    let above = (lo + epsilon).min(top);
    result.bracket_verified = !m(lo)? && m(above)?;
    let probes = [
        (lo - 0.1 * epsilon, false),
        (0.5 * (xi_c + lo), false),
        ((above + 0.1 * epsilon).min(top), true),
    ];
    let mut constant = true;
    for (xi, expected) in probes {
        if xi > xi_c && m(xi)? != expected {
            constant = false;
        }
    }
    result.locally_constant = constant;
    Ok(result)
}

/// [`effective_threshold`] over an increasing forcing grid. Failures are
/// collected per entry and the sweep continues.
pub fn threshold_sweep(
    f_grid: &[f64],
    base: &SystemParams,
    epsilon: f64,
    delta: f64,
    cfg: &SimConfig,
) -> Result<Vec<Result<ThresholdResult>>> {
    if f_grid.is_empty() || f_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("threshold_sweep", "forcing grid must be nonempty and strictly increasing"));
    }
    check_tolerances(epsilon, delta)?;
    Ok(f_grid
        .iter()
        .map(|&f| effective_threshold(&base.with_forcing(f), epsilon, delta, cfg))
        .collect())
}
