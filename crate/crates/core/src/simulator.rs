//! Brute-force escape simulation of `q̈ + q − q² = F sin(Ωt + ψ)`.
//!
//! The default integrator is the fourth-order Yoshida composition of
//! kick-drift-kick leapfrog steps. With `dt = (2π/Ω)/N` the forcing values
//! needed at the kick times repeat every `N` steps, so they are tabulated
//! once per trajectory configuration.
//!
//! Escape is checked on the step grid: a trajectory escapes at the first
//! step end (including `t = 0`) where `E = p²/2 + V(q) ≥ ξ_max`, or where the
//! state stops being finite.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::slowflow::{initial_angle_offset, potential, to_phase_plane, total_energy, CylinderPoint, PhasePoint, SystemParams, BARRIER};

pub const DEFAULT_T_MAX_PERIODS: u32 = 100;
pub const DEFAULT_DT_PER_PERIOD: u32 = 1024;
pub const DEFAULT_RESOLUTION: usize = 400;
/// Default `(q, p)` window: the separatrix bounding box padded by about 10%.
pub const DEFAULT_QP_WINDOW: Plane = Plane::Qp {
    q_lo: -0.65,
    q_hi: 1.15,
    p_lo: -0.65,
    p_hi: 0.65,
};

const CBRT2: f64 = 1.259_921_049_894_873_2;
const YOSHIDA_W1: f64 = 1.0 / (2.0 - CBRT2);
const YOSHIDA_W0: f64 = -CBRT2 / (2.0 - CBRT2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Fourth-order symmetric composition of leapfrog steps.
    #[default]
    Yoshida4,
    /// Second-order kick-drift-kick leapfrog.
    Leapfrog,
    /// Classical fourth-order Runge–Kutta (not symplectic).
    Rk4,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Yoshida4 => "yoshida4",
            Integrator::Leapfrog => "leapfrog",
            Integrator::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yoshida4" => Ok(Integrator::Yoshida4),
            "leapfrog" => Ok(Integrator::Leapfrog),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(domain("integrator", format!("unknown integrator {other:?}"))),
        }
    }
}

/// Integration horizon, resolution and scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_max_periods: u32,
    pub dt_per_period: u32,
    pub integrator: Integrator,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_max_periods: DEFAULT_T_MAX_PERIODS,
            dt_per_period: DEFAULT_DT_PER_PERIOD,
            integrator: Integrator::Yoshida4,
        }
    }
}

impl SimConfig {
    pub fn new(t_max_periods: u32, dt_per_period: u32) -> Result<Self> {
        let c = Self {
            t_max_periods,
            dt_per_period,
            integrator: Integrator::default(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max_periods < 1 {
            return Err(domain("SimConfig", "t_max_periods must be ≥ 1"));
        }
        if self.dt_per_period < 1 {
            return Err(domain("SimConfig", "dt_per_period must be ≥ 1"));
        }
        Ok(())
    }
}

/// Outcome of one escape simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub escaped: bool,
    /// First crossing time in forcing periods.
    pub t_escape: Option<f64>,
    /// Largest energy seen on the step grid.
    pub e_max: f64,
}

#[inline]
fn acceleration(q: f64, forcing: f64) -> f64 {
    -q + q * q + forcing
}

/// Forcing values `F sin(Ω(t_n + c_j·dt) + ψ)` for one period of steps.
struct ForcingTable {
    stride: usize,
    values: Vec<f64>,
}

impl ForcingTable {
    fn new(params: &SystemParams, n: usize, offsets: &[f64]) -> Self {
        let dt = TAU / params.omega / n as f64;
        let mut values = Vec::with_capacity(n * offsets.len());
        for i in 0..n {
            for &c in offsets {
                let t = (i as f64 + c) * dt;
                values.push(params.forcing * (params.omega * t + params.psi).sin());
            }
        }
        Self {
            stride: offsets.len(),
            values,
        }
    }

    #[inline]
    fn row(&self, step: usize, n: usize) -> &[f64] {
        let i = step % n;
        &self.values[i * self.stride..(i + 1) * self.stride]
    }
}

/// Kick times of one composed step as fractions of `dt`, and the drift
/// weights between them.
fn splitting(integrator: Integrator) -> (Vec<f64>, Vec<f64>) {
    match integrator {
        Integrator::Yoshida4 => (
            vec![0.0, YOSHIDA_W1, YOSHIDA_W1 + YOSHIDA_W0],
            vec![YOSHIDA_W1, YOSHIDA_W0, YOSHIDA_W1],
        ),
        _ => (vec![0.0], vec![1.0]),
    }
}

struct Stepper<'a> {
    table: ForcingTable,
    drifts: Vec<f64>,
    n: usize,
    dt: f64,
    integrator: Integrator,
    params: &'a SystemParams,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a SystemParams, cfg: &SimConfig) -> Self {
        let n = cfg.dt_per_period as usize;
        let (offsets, drifts) = match cfg.integrator {
            Integrator::Rk4 => (vec![0.0, 0.5], vec![]),
            other => splitting(other),
        };
        Self {
            table: ForcingTable::new(params, n, &offsets),
            drifts,
            n,
            dt: TAU / params.omega / n as f64,
            integrator: cfg.integrator,
            params,
        }
    }

    /// Advance `(q, p)` from step index `step` to `step + 1`. `acc` holds the
    /// acceleration at the current state and is updated in place.
    #[inline]
    fn step(&self, step: usize, q: &mut f64, p: &mut f64, acc: &mut f64) {
        let row = self.table.row(step, self.n);
        let next_f = self.table.row(step + 1, self.n)[0];
        let h = self.dt;
        match self.integrator {
            Integrator::Rk4 => {
                let f0 = row[0];
                let fh = row[1];
                let (q0, p0) = (*q, *p);
                let k1q = p0;
                let k1p = acceleration(q0, f0);
                let k2q = p0 + 0.5 * h * k1p;
                let k2p = acceleration(q0 + 0.5 * h * k1q, fh);
                let k3q = p0 + 0.5 * h * k2p;
                let k3p = acceleration(q0 + 0.5 * h * k2q, fh);
                let k4q = p0 + h * k3p;
                let k4p = acceleration(q0 + h * k3q, next_f);
                *q = q0 + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
                *p = p0 + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
                *acc = acceleration(*q, next_f);
            }
            _ => {
                let stages = self.drifts.len();
                for (j, &w) in self.drifts.iter().enumerate() {
                    let wh = w * h;
                    *p += 0.5 * wh * *acc;
                    *q += wh * *p;
                    let f = if j + 1 < stages { row[j + 1] } else { next_f };
                    *acc = acceleration(*q, f);
                    *p += 0.5 * wh * *acc;
                }
            }
        }
    }
}

fn check_ic(ic: PhasePoint) -> Result<()> {
    if !ic.q.is_finite() || !ic.p.is_finite() {
        return Err(domain("simulate_escape", "initial condition is not finite"));
    }
    Ok(())
}

/// Integrate from `ic` at `t = 0` until the energy reaches `params.xi_max`
/// or `t_max_periods` forcing periods have elapsed.
pub fn simulate_escape(
    ic: PhasePoint,
    params: &SystemParams,
    t_max_periods: u32,
    dt_per_period: u32,
) -> Result<EscapeRecord> {
    simulate_escape_with(ic, params, &SimConfig::new(t_max_periods, dt_per_period)?)
}

pub fn simulate_escape_with(ic: PhasePoint, params: &SystemParams, cfg: &SimConfig) -> Result<EscapeRecord> {
    check_ic(ic)?;
    params.validate()?;
    cfg.validate()?;
    Ok(run_escape(ic, &Stepper::new(params, cfg), cfg))
}

fn run_escape(ic: PhasePoint, stepper: &Stepper, cfg: &SimConfig) -> EscapeRecord {
    let threshold = stepper.params.xi_max;
    let n = stepper.n;
    let (mut q, mut p) = (ic.q, ic.p);
    let mut e_max = total_energy(ic);
    if e_max >= threshold || !e_max.is_finite() {
        return EscapeRecord {
            escaped: true,
            t_escape: Some(0.0),
            e_max,
        };
    }
    let mut acc = acceleration(q, stepper.table.row(0, n)[0]);
    let total = cfg.t_max_periods as usize * n;
    for step in 0..total {
        stepper.step(step, &mut q, &mut p, &mut acc);
        let e = 0.5 * p * p + potential(q);
        if !e.is_finite() || e >= threshold {
            return EscapeRecord {
                escaped: true,
                t_escape: Some((step + 1) as f64 / n as f64),
                e_max: if e.is_finite() { e.max(e_max) } else { f64::INFINITY },
            };
        }
        e_max = e_max.max(e);
    }
    EscapeRecord {
        escaped: false,
        t_escape: None,
        e_max,
    }
}

const LANES: usize = 8;

/// [`run_escape`] for up to [`LANES`] initial conditions at once.
///
/// Every lane performs exactly the scalar operation sequence, so results are
/// bit-identical to the one-at-a-time path; interleaving independent lanes
/// only hides floating-point latency.
fn run_escape_lanes(ics: &[PhasePoint], stepper: &Stepper, cfg: &SimConfig) -> Vec<EscapeRecord> {
    debug_assert!(ics.len() <= LANES);
    if stepper.integrator == Integrator::Rk4 {
        return ics.iter().map(|&ic| run_escape(ic, stepper, cfg)).collect();
    }
    let threshold = stepper.params.xi_max;
    let n = stepper.n;
    let stride = stepper.table.stride;
    let values = &stepper.table.values;
    let h = stepper.dt;
    let stages = stepper.drifts.len();

    let mut q = [0.0f64; LANES];
    let mut p = [0.0f64; LANES];
    let mut acc = [0.0f64; LANES];
    let mut e_max = [0.0f64; LANES];
    let mut alive = [false; LANES];
    let mut out: Vec<Option<EscapeRecord>> = vec![None; ics.len()];
    for (l, ic) in ics.iter().enumerate() {
        let e = total_energy(*ic);
        if e >= threshold || !e.is_finite() {
            out[l] = Some(EscapeRecord {
                escaped: true,
                t_escape: Some(0.0),
                e_max: e,
            });
        } else {
            q[l] = ic.q;
            p[l] = ic.p;
            e_max[l] = e;
            alive[l] = true;
        }
    }
    let mut n_alive = alive.iter().filter(|&&a| a).count();
    for l in 0..LANES {
        acc[l] = acceleration(q[l], values[0]);
    }

    'periods: for period in 0..cfg.t_max_periods as usize {
        for i in 0..n {
            let row = &values[i * stride..(i + 1) * stride];
            let next_f = if i + 1 < n { values[(i + 1) * stride] } else { values[0] };
            for (j, &w) in stepper.drifts.iter().enumerate() {
                let wh = w * h;
                let half = 0.5 * wh;
                let f = if j + 1 < stages { row[j + 1] } else { next_f };
                for l in 0..LANES {
                    p[l] += half * acc[l];
                    q[l] += wh * p[l];
                    acc[l] = acceleration(q[l], f);
                    p[l] += half * acc[l];
                }
            }
            for l in 0..LANES {
                if !alive[l] {
                    continue;
                }
                let e = 0.5 * p[l] * p[l] + potential(q[l]);
                if !e.is_finite() || e >= threshold {
                    out[l] = Some(EscapeRecord {
                        escaped: true,
                        t_escape: Some((period * n + i + 1) as f64 / n as f64),
                        e_max: if e.is_finite() { e.max(e_max[l]) } else { f64::INFINITY },
                    });
                    alive[l] = false;
                    q[l] = 0.0;
                    p[l] = 0.0;
                    acc[l] = 0.0;
                    n_alive -= 1;
                } else {
                    e_max[l] = e_max[l].max(e);
                }
            }
            if n_alive == 0 {
                break 'periods;
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(l, r)| {
            r.unwrap_or(EscapeRecord {
                escaped: false,
                t_escape: None,
                e_max: e_max[l],
            })
        })
        .collect()
}

/// [`simulate_escape_with`] for many initial conditions, in parallel.
///
/// The output order matches the input order.
pub fn simulate_escape_many(ics: &[PhasePoint], params: &SystemParams, cfg: &SimConfig) -> Result<Vec<EscapeRecord>> {
    for &ic in ics {
        check_ic(ic)?;
    }
    params.validate()?;
    cfg.validate()?;
    let stepper = Stepper::new(params, cfg);
    Ok(ics
        .par_chunks(LANES)
        .map(|chunk| run_escape_lanes(chunk, &stepper, cfg))
        .collect::<Vec<_>>()
        .concat())
}

/// One recorded state of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    pub e: f64,
}

/// Integrate without escape termination, recording every `stride`-th step.
///
/// Integration stops early only if the state stops being finite.
pub fn trajectory(
    ic: PhasePoint,
    params: &SystemParams,
    cfg: &SimConfig,
    stride: usize,
) -> Result<Vec<TrajectorySample>> {
    check_ic(ic)?;
    params.validate()?;
    cfg.validate()?;
    if stride == 0 {
        return Err(domain("trajectory", "stride must be ≥ 1"));
    }
    let stepper = Stepper::new(params, cfg);
    let n = stepper.n;
    let (mut q, mut p) = (ic.q, ic.p);
    let mut acc = acceleration(q, stepper.table.row(0, n)[0]);
    let mut out = vec![TrajectorySample {
        t: 0.0,
        q,
        p,
        e: total_energy(ic),
    }];
    let total = cfg.t_max_periods as usize * n;
    for step in 0..total {
        stepper.step(step, &mut q, &mut p, &mut acc);
        if !q.is_finite() || !p.is_finite() {
            break;
        }
        if (step + 1) % stride == 0 {
            out.push(TrajectorySample {
                t: (step + 1) as f64 * stepper.dt,
                q,
                p,
                e: 0.5 * p * p + potential(q),
            });
        }
    }
    Ok(out)
}

/// Integrate `steps` leapfrog-type steps of size `dt` (negative for backward
/// integration) from time `t0`, evaluating the forcing directly.
pub fn propagate(
    state: PhasePoint,
    params: &SystemParams,
    t0: f64,
    dt: f64,
    steps: usize,
    integrator: Integrator,
) -> Result<PhasePoint> {
    check_ic(state)?;
    params.validate()?;
    if !dt.is_finite() || dt == 0.0 {
        return Err(domain("propagate", "dt must be finite and nonzero"));
    }
    let force = |t: f64| params.forcing * (params.omega * t + params.psi).sin();
    let (mut q, mut p) = (state.q, state.p);
    let (offsets, drifts) = match integrator {
        Integrator::Rk4 => return Err(domain("propagate", "rk4 is not time-reversible")),
        other => splitting(other),
    };
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        let mut acc = acceleration(q, force(t));
        for (j, &w) in drifts.iter().enumerate() {
            let wh = w * dt;
            p += 0.5 * wh * acc;
            q += wh * p;
            let tj = if j + 1 < drifts.len() { t + offsets[j + 1] * dt } else { t + dt };
            acc = acceleration(q, force(tj));
            p += 0.5 * wh * acc;
        }
    }
    Ok(PhasePoint::new(q, p))
}

/// Where the grid nodes live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Plane {
    /// Window of the physical phase plane.
    Qp { q_lo: f64, q_hi: f64, p_lo: f64, p_hi: f64 },
    /// The resonance cylinder `[0, 2π) × [0, ξ_top]`.
    Cylinder { xi_top: f64 },
}

impl Plane {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Plane::Qp { q_lo, q_hi, p_lo, p_hi } => {
                [q_lo, q_hi, p_lo, p_hi].iter().all(|v| v.is_finite()) && q_hi > q_lo && p_hi > p_lo
            }
            Plane::Cylinder { xi_top } => xi_top.is_finite() && xi_top > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(domain("Plane", format!("zero-area or non-finite window {self:?}")))
        }
    }

    /// `(x_lo, x_hi, y_lo, y_hi)` of the plane.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        match *self {
            Plane::Qp { q_lo, q_hi, p_lo, p_hi } => (q_lo, q_hi, p_lo, p_hi),
            Plane::Cylinder { xi_top } => (0.0, TAU, 0.0, xi_top),
        }
    }
}

/// Provenance stored with every grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub params: SystemParams,
    pub psi: Vec<f64>,
    pub sim: SimConfig,
}

/// Boolean safe/escape raster.
///
/// Cell `(i, j)` has its node at the cell center; `i` runs along `q` (or
/// `ϑ`), `j` along `p` (or `ξ`), both ascending. Storage is row-major with
/// `j` as the row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub plane: Plane,
    pub nx: usize,
    pub ny: usize,
    pub safe: Vec<bool>,
    pub meta: GridMeta,
}

impl BasinGrid {
    /// Node coordinates of cell `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        node(&self.plane, self.nx, self.ny, i, j)
    }

    pub fn is_safe(&self, i: usize, j: usize) -> bool {
        self.safe[j * self.nx + i]
    }

    pub fn safe_count(&self) -> usize {
        self.safe.iter().filter(|&&s| s).count()
    }

    /// Area of one cell in plane units.
    pub fn cell_area(&self) -> f64 {
        let (x0, x1, y0, y1) = self.plane.extent();
        (x1 - x0) * (y1 - y0) / (self.nx * self.ny) as f64
    }
}

fn node(plane: &Plane, nx: usize, ny: usize, i: usize, j: usize) -> (f64, f64) {
    let (x0, x1, y0, y1) = plane.extent();
    (
        x0 + (i as f64 + 0.5) * (x1 - x0) / nx as f64,
        y0 + (j as f64 + 0.5) * (y1 - y0) / ny as f64,
    )
}

/// Initial condition of a grid node, or `None` when the node has no image
/// inside the well.
fn node_ic(plane: &Plane, x: f64, y: f64, psi: f64) -> Option<PhasePoint> {
    match plane {
        Plane::Qp { .. } => Some(PhasePoint::new(x, y)),
        Plane::Cylinder { .. } => {
            if y >= BARRIER {
                return None;
            }
            to_phase_plane(CylinderPoint::new(x, y), initial_angle_offset(psi)).ok()
        }
    }
}

fn check_resolution(nx: usize, ny: usize) -> Result<()> {
    if nx == 0 || ny == 0 {
        return Err(domain("basin_grid", "resolution must be at least 1×1"));
    }
    Ok(())
}

/// Mark every node safe or escaping. `mask` restricts the work to nodes that
/// are still `true`; the others stay unsafe.
fn classify(
    plane: &Plane,
    nx: usize,
    ny: usize,
    params: &SystemParams,
    cfg: &SimConfig,
    mask: Option<&[bool]>,
) -> Vec<bool> {
    let stepper = Stepper::new(params, cfg);
    let work: Vec<(usize, PhasePoint)> = (0..nx * ny)
        .filter(|&idx| mask.is_none_or(|m| m[idx]))
        .filter_map(|idx| {
            let (x, y) = node(plane, nx, ny, idx % nx, idx / nx);
            node_ic(plane, x, y, params.psi).map(|ic| (idx, ic))
        })
        .collect();
    let outcomes: Vec<bool> = work
        .par_chunks(LANES)
        .map(|chunk| {
            let ics: Vec<PhasePoint> = chunk.iter().map(|&(_, ic)| ic).collect();
            run_escape_lanes(&ics, &stepper, cfg)
                .into_iter()
                .map(|r| !r.escaped)
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat();
    let mut safe = vec![false; nx * ny];
    for (&(idx, _), ok) in work.iter().zip(outcomes) {
        safe[idx] = ok;
    }
    safe
}

/// Escape raster for one forcing phase.
pub fn basin_grid(plane: Plane, nx: usize, ny: usize, params: &SystemParams, cfg: &SimConfig) -> Result<BasinGrid> {
    plane.validate()?;
    check_resolution(nx, ny)?;
    params.validate()?;
    cfg.validate()?;
    Ok(BasinGrid {
        plane,
        nx,
        ny,
        safe: classify(&plane, nx, ny, params, cfg, None),
        meta: GridMeta {
            params: *params,
            psi: vec![params.psi],
            sim: *cfg,
        },
    })
}

/// Forcing phases `ψ_j = 2πj/n`, `j = 0..n`.
pub fn psi_list(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// Intersection of [`basin_grid`] over `ψ_j = 2πj/psi_count`.
///
/// `params.psi` is ignored. Nodes already unsafe for an earlier phase are not
/// simulated again.
pub fn true_basin_grid(
    plane: Plane,
    nx: usize,
    ny: usize,
    params: &SystemParams,
    psi_count: usize,
    cfg: &SimConfig,
) -> Result<BasinGrid> {
    if psi_count < 1 {
        return Err(domain("true_basin_grid", "psi_count must be ≥ 1"));
    }
    true_basin_grid_over(plane, nx, ny, params, &psi_list(psi_count), cfg)
}

/// Intersection of [`basin_grid`] over an explicit list of phases.
pub fn true_basin_grid_over(
    plane: Plane,
    nx: usize,
    ny: usize,
    params: &SystemParams,
    psis: &[f64],
    cfg: &SimConfig,
) -> Result<BasinGrid> {
    plane.validate()?;
    check_resolution(nx, ny)?;
    cfg.validate()?;
    if psis.is_empty() {
        return Err(domain("true_basin_grid", "empty phase list"));
    }
    let mut safe: Option<Vec<bool>> = None;
    for &psi in psis {
        let p = SystemParams::new(params.forcing, params.omega, psi, params.xi_max)?;
        safe = Some(classify(&plane, nx, ny, &p, cfg, safe.as_deref()));
    }
    Ok(BasinGrid {
        plane,
        nx,
        ny,
        safe: safe.unwrap_or_default(),
        meta: GridMeta {
            params: *params,
            psi: psis.to_vec(),
            sim: *cfg,
        },
    })
}

/// Safe area of a `(q, p)` raster: safe cells times cell area.
pub fn grid_area(grid: &BasinGrid) -> Result<f64> {
    match grid.plane {
        Plane::Qp { .. } => Ok(grid.safe_count() as f64 * grid.cell_area()),
        Plane::Cylinder { .. } => Err(Error::UnsupportedPlane(
            "areas are defined on the (q, p) plane, not on the cylinder".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(f: f64, xi_max: f64) -> SystemParams {
        SystemParams::new(f, 0.89, 0.0, xi_max).unwrap()
    }

    #[test]
    fn yoshida_weights_sum_to_one() {
        assert!((2.0 * YOSHIDA_W1 + YOSHIDA_W0 - 1.0).abs() < 1e-15);
        assert!((CBRT2.powi(3) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bottom_stays_put() {
        let r = simulate_escape(PhasePoint::new(0.0, 0.0), &params(1e-4, 0.1657), 100, 1024).unwrap();
        assert!(!r.escaped && r.t_escape.is_none());
    }

    #[test]
    fn escape_at_time_zero() {
        let r = simulate_escape(PhasePoint::new(1.0, 0.0), &params(0.01, 0.15), 10, 64).unwrap();
        assert!(r.escaped);
        assert_eq!(r.t_escape, Some(0.0));
    }

    #[test]
    fn blow_up_counts_as_escape() {
        let r = simulate_escape(PhasePoint::new(1e200, 0.0), &params(0.0, BARRIER), 1, 16).unwrap();
        assert!(r.escaped);
        let r = simulate_escape(PhasePoint::new(f64::NAN, 0.0), &params(0.0, BARRIER), 1, 16);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SimConfig::new(0, 16).is_err());
        assert!(SimConfig::new(1, 0).is_err());
        let p = params(0.0, 0.1);
        assert!(basin_grid(Plane::Qp { q_lo: 0.0, q_hi: 0.0, p_lo: 0.0, p_hi: 1.0 }, 2, 2, &p, &SimConfig::default()).is_err());
        assert!(basin_grid(DEFAULT_QP_WINDOW, 0, 2, &p, &SimConfig::default()).is_err());
        assert!(true_basin_grid(DEFAULT_QP_WINDOW, 2, 2, &p, 0, &SimConfig::default()).is_err());
    }

    #[test]
    fn integrators_agree_on_a_short_run() {
        let p = params(0.01, BARRIER);
        let ic = PhasePoint::new(0.1, 0.05);
        let mut finals = Vec::new();
        for integrator in [Integrator::Yoshida4, Integrator::Leapfrog, Integrator::Rk4] {
            let cfg = SimConfig::new(2, 1024).unwrap().with_integrator(integrator);
            let traj = trajectory(ic, &p, &cfg, 2048).unwrap();
            finals.push(*traj.last().unwrap());
        }
        assert!((finals[0].q - finals[2].q).abs() < 1e-9);
        assert!((finals[0].q - finals[1].q).abs() < 1e-4);
    }

    #[test]
    fn stepper_matches_direct_propagation() {
        let p = params(0.02, BARRIER);
        let ic = PhasePoint::new(0.2, -0.1);
        let cfg = SimConfig::new(3, 256).unwrap();
        let traj = trajectory(ic, &p, &cfg, 768).unwrap();
        let end = traj.last().unwrap();
        let dt = TAU / p.omega / 256.0;
        let direct = propagate(ic, &p, 0.0, dt, 768, Integrator::Yoshida4).unwrap();
        assert!((end.q - direct.q).abs() < 1e-12 && (end.p - direct.p).abs() < 1e-12);
    }

    #[test]
    fn lanes_match_scalar_bit_for_bit() {
        let p = params(0.012, 0.1657);
        let ics: Vec<PhasePoint> = (0..13)
            .map(|i| PhasePoint::new(-0.45 + 0.11 * i as f64, 0.3 - 0.05 * i as f64))
            .collect();
        for integrator in [Integrator::Yoshida4, Integrator::Leapfrog, Integrator::Rk4] {
            let cfg = SimConfig::new(20, 128).unwrap().with_integrator(integrator);
            let many = simulate_escape_many(&ics, &p, &cfg).unwrap();
            for (ic, r) in ics.iter().zip(&many) {
                let one = simulate_escape_with(*ic, &p, &cfg).unwrap();
                assert_eq!(one, *r);
            }
        }
    }

    #[test]
    fn grid_area_units() {
        let grid = BasinGrid {
            plane: Plane::Qp { q_lo: 0.0, q_hi: 1.0, p_lo: 0.0, p_hi: 1.0 },
            nx: 10,
            ny: 10,
            safe: vec![true; 100],
            meta: GridMeta {
                params: params(0.0, 0.1),
                psi: vec![0.0],
                sim: SimConfig::default(),
            },
        };
        assert!((grid_area(&grid).unwrap() - 1.0).abs() < 1e-15);
        let cyl = BasinGrid {
            plane: Plane::Cylinder { xi_top: 0.1 },
            ..grid
        };
        assert!(matches!(grid_area(&cyl), Err(Error::UnsupportedPlane(_))));
    }

    #[test]
    fn unforced_grid_is_the_energy_disc() {
        let p = params(0.0, 0.12);
        let cfg = SimConfig::new(2, 64).unwrap();
        let g = basin_grid(DEFAULT_QP_WINDOW, 24, 18, &p, &cfg).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (q, pp) = g.node(i, j);
                let inside = total_energy(PhasePoint::new(q, pp)) < 0.12 && q < 1.0;
                assert_eq!(g.is_safe(i, j), inside, "node ({q}, {pp})");
            }
        }
    }

    #[test]
    fn cylinder_nodes_above_barrier_are_unsafe() {
        let p = params(0.0, BARRIER);
        let cfg = SimConfig::new(1, 32).unwrap();
        let g = basin_grid(Plane::Cylinder { xi_top: 0.2 }, 4, 10, &p, &cfg).unwrap();
        for j in 0..g.ny {
            let (_, xi) = g.node(0, j);
            if xi >= BARRIER {
                assert!(!g.is_safe(0, j));
            }
        }
    }
}
