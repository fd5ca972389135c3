//! Command-line front end for the `safebasin` binary.
//!
//! Configuration comes from flags and from an optional flat `key = value`
//! file; flags win. Every command writes one data file plus a JSON sidecar
//! (`<output>.meta.json`) holding the tool version, the resolved
//! configuration and the wall time. Data files never contain timestamps, so
//! reruns are byte-identical.
//!
//! | command              | data file                                  |
//! |----------------------|--------------------------------------------|
//! | `boundary`           | CSV `theta,xi,q,p,branch_kind`             |
//! | `critical-forcing`   | CSV `omega,xi_max,F_hat`                   |
//! | `erosion`            | CSV `F,xi_hat,mu`                          |
//! | `simulate-basin`     | raster of `0`/`1` lines                    |
//! | `true-basin`         | raster, plus `<output>.contour.csv`        |
//! | `calibrate-threshold`| CSV `F,xi_star,iterations`                 |
//! | `trajectory`         | CSV `t,q,p,E`                              |
//!
//! With `format = json` the same results are written as JSON documents.
//! Raster lines run from the lowest `p` (or `ξ`) row upward; characters run
//! along ascending `q` (or `ϑ`).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::calibration::{threshold_sweep, DEFAULT_DELTA, DEFAULT_EPSILON};
use crate::error::Error;
use crate::rm_analysis::{
    critical_forcing, erosion_profile, sb_boundaries_with, true_sb_level, BasinBoundary, BoundaryKind, Branch,
    DEFAULT_THETA_SAMPLES,
};
use crate::simulator::{
    basin_grid, grid_area, trajectory, true_basin_grid, BasinGrid, Integrator, Plane, SimConfig, DEFAULT_DT_PER_PERIOD,
    DEFAULT_QP_WINDOW, DEFAULT_RESOLUTION, DEFAULT_T_MAX_PERIODS,
};
use crate::slowflow::{initial_angle_offset, to_phase_plane, CylinderPoint, PhasePoint, SystemParams, BARRIER};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "SAFEBASIN_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const DEFAULT_OMEGA: f64 = 0.89;
pub const DEFAULT_XI_MAX: f64 = 0.1657;
pub const DEFAULT_PSI_COUNT: usize = 21;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(#[from] clap::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed file {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{failed} of {total} sweep entries failed; see the sidecar")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Config(_) | CliError::Numeric(Error::Domain { .. }) => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        }
    }
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Boundary,
    CriticalForcing,
    Erosion,
    SimulateBasin,
    TrueBasin,
    CalibrateThreshold,
    Trajectory,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Boundary,
        Command::CriticalForcing,
        Command::Erosion,
        Command::SimulateBasin,
        Command::TrueBasin,
        Command::CalibrateThreshold,
        Command::Trajectory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Boundary => "boundary",
            Command::CriticalForcing => "critical-forcing",
            Command::Erosion => "erosion",
            Command::SimulateBasin => "simulate-basin",
            Command::TrueBasin => "true-basin",
            Command::CalibrateThreshold => "calibrate-threshold",
            Command::Trajectory => "trajectory",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}; expected csv or json")),
        }
    }
}

/// A linear sweep over forcing amplitude or frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "over", rename_all = "lowercase")]
pub enum Sweep {
    Forcing { f_min: f64, f_max: f64, f_steps: usize },
    Omega { omega_min: f64, omega_max: f64, omega_steps: usize },
}

impl Sweep {
    /// `steps` evenly spaced values from min to max inclusive.
    pub fn values(&self) -> Vec<f64> {
        let (lo, hi, n) = match *self {
            Sweep::Forcing { f_min, f_max, f_steps } => (f_min, f_max, f_steps),
            Sweep::Omega {
                omega_min,
                omega_max,
                omega_steps,
            } => (omega_min, omega_max, omega_steps),
        };
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub resolution: usize,
    pub t_max_periods: u32,
    pub dt_per_period: u32,
    pub integrator: Integrator,
    pub psi_count: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub theta_samples: usize,
}

impl Numerics {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            t_max_periods: self.t_max_periods,
            dt_per_period: self.dt_per_period,
            integrator: self.integrator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub path: PathBuf,
    pub format: Format,
}

/// Fully resolved and validated run configuration.
///
/// `params.xi_max` is the analytic threshold. Simulations escape at
/// `escape_xi` instead, which defaults to the barrier energy `1/6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: SystemParams,
    pub escape_xi: f64,
    pub sweep: Option<Sweep>,
    pub numerics: Numerics,
    pub plane: Plane,
    pub initial: Option<PhasePoint>,
    pub stride: usize,
    pub output: Output,
}

impl RunConfig {
    /// Parameters handed to the simulator: the escape threshold replaces
    /// `xi_max`.
    pub fn sim_params(&self) -> SystemParams {
        self.params.with_xi_max(self.escape_xi)
    }
}

#[derive(Debug, Parser)]
#[command(name = "safebasin", version, about = "Safe basins and escape from a cubic potential well")]
pub struct Cli {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<CliCommand>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// SBST and SBMT boundaries on the resonance cylinder.
    Boundary(Flags),
    /// Critical forcing where the SBMT changes kind.
    CriticalForcing(Flags),
    /// Erosion profile of the phase-invariant safe basin over a forcing sweep.
    Erosion(Flags),
    /// Brute-force safe basin raster for one forcing phase.
    SimulateBasin(Flags),
    /// Intersection of safe basin rasters over forcing phases.
    TrueBasin(Flags),
    /// Effective escape threshold by bisection on level curves.
    CalibrateThreshold(Flags),
    /// A single forced trajectory.
    Trajectory(Flags),
}

impl CliCommand {
    fn split(self) -> (Command, Flags) {
        match self {
            CliCommand::Boundary(f) => (Command::Boundary, f),
            CliCommand::CriticalForcing(f) => (Command::CriticalForcing, f),
            CliCommand::Erosion(f) => (Command::Erosion, f),
            CliCommand::SimulateBasin(f) => (Command::SimulateBasin, f),
            CliCommand::TrueBasin(f) => (Command::TrueBasin, f),
            CliCommand::CalibrateThreshold(f) => (Command::CalibrateThreshold, f),
            CliCommand::Trajectory(f) => (Command::Trajectory, f),
        }
    }
}

/// Flags shared by every command. Each one may also be given in the
/// configuration file under the same name with underscores.
#[derive(Debug, Default, Args)]
#[command(allow_negative_numbers = true)]
pub struct Flags {
    /// Forcing amplitude F ≥ 0.
    #[arg(long)]
    pub forcing: Option<f64>,
    /// Forcing frequency Ω > 0 [default: 0.89].
    #[arg(long)]
    pub omega: Option<f64>,
    /// Forcing phase ψ in [0, 2π) [default: 0].
    #[arg(long)]
    pub psi: Option<f64>,
    /// Analytic escape threshold in (0, 1/6] [default: 0.1657].
    #[arg(long)]
    pub xi_max: Option<f64>,
    /// Escape energy of simulations in (0, 1/6] [default: 1/6].
    #[arg(long)]
    pub escape_xi: Option<f64>,
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub f_max: Option<f64>,
    #[arg(long)]
    pub f_steps: Option<usize>,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    #[arg(long)]
    pub omega_steps: Option<usize>,
    /// Grid cells per side [default: 400].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Simulated forcing periods [default: 100].
    #[arg(long)]
    pub t_max_periods: Option<u32>,
    /// Integration steps per forcing period [default: 1024].
    #[arg(long)]
    pub dt_per_period: Option<u32>,
    /// yoshida4, leapfrog or rk4 [default: yoshida4].
    #[arg(long)]
    pub integrator: Option<String>,
    /// Forcing phases intersected by true-basin [default: 21].
    #[arg(long)]
    pub psi_count: Option<usize>,
    /// Bisection tolerance of calibrate-threshold [default: 0.001].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Level-curve step in ϑ for calibrate-threshold [default: 0.01].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Slow-phase samples of boundaries and contours [default: 720].
    #[arg(long)]
    pub theta_samples: Option<usize>,
    /// qp or cylinder [default: qp].
    #[arg(long)]
    pub plane: Option<String>,
    #[arg(long)]
    pub q_lo: Option<f64>,
    #[arg(long)]
    pub q_hi: Option<f64>,
    #[arg(long)]
    pub p_lo: Option<f64>,
    #[arg(long)]
    pub p_hi: Option<f64>,
    /// Top of the cylinder window [default: 1/6].
    #[arg(long)]
    pub xi_top: Option<f64>,
    /// Initial displacement of trajectory.
    #[arg(long)]
    pub q0: Option<f64>,
    /// Initial velocity of trajectory.
    #[arg(long)]
    pub p0: Option<f64>,
    /// Record every n-th trajectory step [default: 1].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Data file to write; the sidecar goes next to it.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// csv or json [default: from the output extension].
    #[arg(long)]
    pub format: Option<String>,
}

/// Parse a flat `key = value` file. `#` starts a comment; keys may use `-`
/// or `_`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
        let key = key.trim().replace('-', "_");
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(config_err(&key, format!("given twice (line {})", n + 1)));
        }
    }
    Ok(map)
}

struct Sources {
    file: BTreeMap<String, String>,
}

impl Sources {
    /// Flag value if present, else the parsed file value. The file entry is
    /// consumed either way so leftovers are exactly the unknown keys.
    fn take<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|s| s.parse::<T>().map_err(|e| config_err(key, format!("cannot parse {s:?}: {e}"))))
            .transpose()
    }
}

/// Build a [`RunConfig`] from argv (program name first).
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let file = match &cli.config {
        Some(path) => parse_config_file(&fs::read_to_string(path).map_err(io_err(path))?)?,
        None => BTreeMap::new(),
    };
    let mut src = Sources { file };
    let file_command = src.take::<Command>("command", None)?;
    let (command, flags) = match cli.command {
        Some(c) => c.split(),
        None => (
            file_command.ok_or_else(|| CliError::Config("no command given on the command line or in the file".into()))?,
            Flags::default(),
        ),
    };
    resolve(command, flags, src)
}

fn check(key: &str, ok: bool, msg: impl std::fmt::Display) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(config_err(key, msg))
    }
}

fn check_finite(key: &str, v: f64) -> Result<(), CliError> {
    check(key, v.is_finite(), format!("{v} is not finite"))
}

fn check_threshold(key: &str, v: f64) -> Result<(), CliError> {
    check_finite(key, v)?;
    check(key, v > 0.0, format!("{v} must be > 0"))?;
    check(key, v <= BARRIER, format!("{v} exceeds 1/6"))
}

fn resolve(command: Command, f: Flags, mut src: Sources) -> Result<RunConfig, CliError> {
    let forcing = src.take("forcing", f.forcing)?;
    let omega = src.take("omega", f.omega)?.unwrap_or(DEFAULT_OMEGA);
    let psi = src.take("psi", f.psi)?.unwrap_or(0.0);
    let xi_max = src.take("xi_max", f.xi_max)?.unwrap_or(DEFAULT_XI_MAX);
    let escape_xi = src.take("escape_xi", f.escape_xi)?.unwrap_or(BARRIER);
    let f_min = src.take("f_min", f.f_min)?;
    let f_max = src.take("f_max", f.f_max)?;
    let f_steps = src.take("f_steps", f.f_steps)?;
    let omega_min = src.take("omega_min", f.omega_min)?;
    let omega_max = src.take("omega_max", f.omega_max)?;
    let omega_steps = src.take("omega_steps", f.omega_steps)?;
    let resolution = src.take("resolution", f.resolution)?.unwrap_or(DEFAULT_RESOLUTION);
    let t_max_periods = src.take("t_max_periods", f.t_max_periods)?.unwrap_or(DEFAULT_T_MAX_PERIODS);
    let dt_per_period = src.take("dt_per_period", f.dt_per_period)?.unwrap_or(DEFAULT_DT_PER_PERIOD);
    let integrator = src.take::<String>("integrator", f.integrator)?;
    let psi_count = src.take("psi_count", f.psi_count)?.unwrap_or(DEFAULT_PSI_COUNT);
    let epsilon = src.take("epsilon", f.epsilon)?.unwrap_or(DEFAULT_EPSILON);
    let delta = src.take("delta", f.delta)?.unwrap_or(DEFAULT_DELTA);
    let theta_samples = src.take("theta_samples", f.theta_samples)?.unwrap_or(DEFAULT_THETA_SAMPLES);
    let plane = src.take::<String>("plane", f.plane)?;
    let q_lo = src.take("q_lo", f.q_lo)?;
    let q_hi = src.take("q_hi", f.q_hi)?;
    let p_lo = src.take("p_lo", f.p_lo)?;
    let p_hi = src.take("p_hi", f.p_hi)?;
    let xi_top = src.take("xi_top", f.xi_top)?;
    let q0 = src.take("q0", f.q0)?;
    let p0 = src.take("p0", f.p0)?;
    let stride = src.take("stride", f.stride)?.unwrap_or(1);
    let output = src.take("output", f.output)?;
    let format = src.take::<Format>("format", f.format.map(|s| s.parse()).transpose().map_err(|e| config_err("format", e))?)?;

    if let Some(key) = src.file.keys().next() {
        let known = "forcing, omega, psi, xi_max, escape_xi, f_min, f_max, f_steps, omega_min, omega_max, \
                     omega_steps, resolution, t_max_periods, dt_per_period, integrator, psi_count, epsilon, delta, \
                     theta_samples, plane, q_lo, q_hi, p_lo, p_hi, xi_top, q0, p0, stride, output, format, command";
        return Err(config_err(key, format!("unknown key; known keys are {known}")));
    }

    let needs_forcing = matches!(
        command,
        Command::Boundary | Command::SimulateBasin | Command::TrueBasin | Command::Trajectory
    ) || (command == Command::CalibrateThreshold && f_min.is_none() && f_max.is_none() && f_steps.is_none());
    if needs_forcing && forcing.is_none() {
        return Err(config_err("forcing", format!("required by {}", command.name())));
    }
    let forcing = forcing.unwrap_or(0.0);
    check_finite("forcing", forcing)?;
    check("forcing", forcing >= 0.0, format!("{forcing} must be ≥ 0"))?;
    check_finite("omega", omega)?;
    check("omega", omega > 0.0, format!("{omega} must be > 0"))?;
    check_finite("psi", psi)?;
    check("psi", (0.0..std::f64::consts::TAU).contains(&psi), format!("{psi} outside [0, 2π)"))?;
    check_threshold("xi_max", xi_max)?;
    check_threshold("escape_xi", escape_xi)?;
    let params = SystemParams::new(forcing, omega, psi, xi_max)?;

    let f_sweep = sweep_keys(["f_min", "f_max", "f_steps"], f_min, f_max, f_steps)?;
    let omega_sweep = sweep_keys(["omega_min", "omega_max", "omega_steps"], omega_min, omega_max, omega_steps)?;
    let sweep = match (f_sweep, omega_sweep) {
        (Some(_), Some(_)) => return Err(config_err("omega_min", "forcing and frequency sweeps are exclusive")),
        (Some((f_min, f_max, f_steps)), None) => {
            check("f_min", f_min >= 0.0, format!("{f_min} must be ≥ 0"))?;
            Some(Sweep::Forcing { f_min, f_max, f_steps })
        }
        (None, Some((omega_min, omega_max, omega_steps))) => {
            check("omega_min", omega_min > 0.0, format!("{omega_min} must be > 0"))?;
            Some(Sweep::Omega {
                omega_min,
                omega_max,
                omega_steps,
            })
        }
        (None, None) => None,
    };
    match (command, &sweep) {
        (Command::Erosion, Some(Sweep::Forcing { .. })) => {}
        (Command::Erosion, _) => return Err(config_err("f_min", "erosion needs f_min, f_max and f_steps")),
        (Command::CriticalForcing, None | Some(Sweep::Omega { .. })) => {}
        (Command::CalibrateThreshold, None | Some(Sweep::Forcing { .. })) => {}
        (c, Some(_)) => return Err(config_err("f_min", format!("{} does not take a sweep", c.name()))),
        (_, None) => {}
    }

    check("resolution", resolution >= 1, "must be ≥ 1")?;
    check("t_max_periods", t_max_periods >= 1, "must be ≥ 1")?;
    check("dt_per_period", dt_per_period >= 1, "must be ≥ 1")?;
    let integrator = match integrator {
        Some(s) => s.parse::<Integrator>().map_err(|e| config_err("integrator", e))?,
        None => Integrator::default(),
    };
    check("psi_count", psi_count >= 1, "must be ≥ 1")?;
    check("epsilon", epsilon.is_finite() && epsilon > 0.0, format!("{epsilon} must be > 0"))?;
    check("delta", delta.is_finite() && delta > 0.0 && delta < 1.0, format!("{delta} must be in (0, 1)"))?;
    check("theta_samples", theta_samples >= 4, "must be ≥ 4")?;
    check("stride", stride >= 1, "must be ≥ 1")?;

    let plane = match plane.as_deref().unwrap_or("qp") {
        "qp" => {
            let Plane::Qp {
                q_lo: dq_lo,
                q_hi: dq_hi,
                p_lo: dp_lo,
                p_hi: dp_hi,
            } = DEFAULT_QP_WINDOW
            else {
                unreachable!()
            };
            let (q_lo, q_hi) = (q_lo.unwrap_or(dq_lo), q_hi.unwrap_or(dq_hi));
            let (p_lo, p_hi) = (p_lo.unwrap_or(dp_lo), p_hi.unwrap_or(dp_hi));
            for (k, v) in [("q_lo", q_lo), ("q_hi", q_hi), ("p_lo", p_lo), ("p_hi", p_hi)] {
                check_finite(k, v)?;
            }
            check("q_hi", q_hi > q_lo, format!("{q_hi} must exceed q_lo = {q_lo}"))?;
            check("p_hi", p_hi > p_lo, format!("{p_hi} must exceed p_lo = {p_lo}"))?;
            Plane::Qp { q_lo, q_hi, p_lo, p_hi }
        }
        "cylinder" => {
            let xi_top = xi_top.unwrap_or(BARRIER);
            check_threshold("xi_top", xi_top)?;
            Plane::Cylinder { xi_top }
        }
        other => return Err(config_err("plane", format!("unknown plane {other:?}; expected qp or cylinder"))),
    };

    let initial = match (q0, p0) {
        (Some(q), Some(p)) => {
            check_finite("q0", q)?;
            check_finite("p0", p)?;
            Some(PhasePoint::new(q, p))
        }
        (None, None) if command != Command::Trajectory => None,
        (None, _) => return Err(config_err("q0", "trajectory needs q0 and p0")),
        (_, None) => return Err(config_err("p0", "trajectory needs q0 and p0")),
    };

    let path = output.ok_or_else(|| config_err("output", "an output path is required"))?;
    let format = format.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    });
    Ok(RunConfig {
        command,
        params,
        escape_xi,
        sweep,
        numerics: Numerics {
            resolution,
            t_max_periods,
            dt_per_period,
            integrator,
            psi_count,
            epsilon,
            delta,
            theta_samples,
        },
        plane,
        initial,
        stride,
        output: Output { path, format },
    })
}

fn sweep_keys(
    keys: [&str; 3],
    lo: Option<f64>,
    hi: Option<f64>,
    steps: Option<usize>,
) -> Result<Option<(f64, f64, usize)>, CliError> {
    match (lo, hi, steps) {
        (None, None, None) => Ok(None),
        (Some(lo), Some(hi), Some(steps)) => {
            check_finite(keys[0], lo)?;
            check_finite(keys[1], hi)?;
            check(keys[2], steps >= 1, "must be ≥ 1")?;
            if steps > 1 {
                check(keys[1], hi > lo, format!("{hi} must exceed {} = {lo}", keys[0]))?;
            }
            Ok(Some((lo, hi, steps)))
        }
        (lo, hi, _) => {
            let missing = if lo.is_none() {
                keys[0]
            } else if hi.is_none() {
                keys[1]
            } else {
                keys[2]
            };
            Err(config_err(missing, format!("missing; a sweep needs all of {}", keys.join(", "))))
        }
    }
}

/// Shortest form that keeps 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV record type with a fixed header.
pub trait CsvRecord: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub theta: f64,
    pub xi: f64,
    pub q: f64,
    pub p: f64,
    /// Boundary kind and branch, for example `SBMT_I:above`.
    pub branch_kind: String,
}

impl CsvRecord for BoundaryRow {
    const HEADER: &'static [&'static str] = &["theta", "xi", "q", "p", "branch_kind"];
    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.theta),
            fmt_f64(self.xi),
            fmt_f64(self.q),
            fmt_f64(self.p),
            self.branch_kind.clone(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalForcingRow {
    pub omega: f64,
    pub xi_max: f64,
    #[serde(rename = "F_hat")]
    pub f_hat: f64,
}

impl CsvRecord for CriticalForcingRow {
    const HEADER: &'static [&'static str] = &["omega", "xi_max", "F_hat"];
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.omega), fmt_f64(self.xi_max), fmt_f64(self.f_hat)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErosionRow {
    #[serde(rename = "F")]
    pub forcing: f64,
    pub xi_hat: f64,
    pub mu: f64,
}

impl CsvRecord for ErosionRow {
    const HEADER: &'static [&'static str] = &["F", "xi_hat", "mu"];
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.forcing), fmt_f64(self.xi_hat), fmt_f64(self.mu)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    #[serde(rename = "F")]
    pub forcing: f64,
    pub xi_star: f64,
    pub iterations: u32,
}

impl CsvRecord for CalibrationRow {
    const HEADER: &'static [&'static str] = &["F", "xi_star", "iterations"];
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.forcing), fmt_f64(self.xi_star), self.iterations.to_string()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

impl CsvRecord for TrajectoryRow {
    const HEADER: &'static [&'static str] = &["t", "q", "p", "E"];
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.t), fmt_f64(self.q), fmt_f64(self.p), fmt_f64(self.e)]
    }
}

pub fn write_csv<R: CsvRecord, W: Write>(w: W, rows: &[R]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(R::HEADER)?;
    for row in rows {
        out.write_record(row.fields())?;
    }
    out.flush()
}

/// Read records written by [`write_csv`], checking the header.
pub fn read_csv<R: CsvRecord, T: Read>(input: T) -> Result<Vec<R>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(format!("header {:?} does not match {:?}", header, R::HEADER));
    }
    reader
        .deserialize()
        .collect::<Result<Vec<R>, _>>()
        .map_err(|e| e.to_string())
}

pub fn read_csv_file<R: CsvRecord>(path: &Path) -> Result<Vec<R>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_csv(file).map_err(|msg| CliError::Format {
        path: path.to_path_buf(),
        msg,
    })
}

/// Raster text: one line per row, `1` for safe.
pub fn write_raster<W: Write>(mut w: W, nx: usize, safe: &[bool]) -> io::Result<()> {
    let mut line = String::with_capacity(nx + 1);
    for row in safe.chunks(nx) {
        line.clear();
        line.extend(row.iter().map(|&s| if s { '1' } else { '0' }));
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

/// Inverse of [`write_raster`]: `(nx, ny, safe)`.
pub fn read_raster(text: &str) -> Result<(usize, usize, Vec<bool>), String> {
    let mut nx = None;
    let mut safe = Vec::new();
    let mut ny = 0;
    for (j, line) in text.lines().enumerate() {
        match nx {
            None => nx = Some(line.len()),
            Some(n) if n != line.len() => return Err(format!("row {j} has {} cells, expected {n}", line.len())),
            _ => {}
        }
        for c in line.chars() {
            safe.push(match c {
                '1' => true,
                '0' => false,
                other => return Err(format!("row {j}: unexpected character {other:?}")),
            });
        }
        ny += 1;
    }
    match nx {
        Some(n) if n > 0 => Ok((n, ny, safe)),
        _ => Err("empty raster".into()),
    }
}

/// CSV rows for a boundary, mapped to the phase plane at phase `psi`.
/// Points on the barrier have no phase-plane image and get `NaN`.
pub fn boundary_rows(boundary: &BasinBoundary, psi: f64) -> Vec<BoundaryRow> {
    let offset = initial_angle_offset(psi);
    boundary
        .samples
        .iter()
        .map(|s| {
            let (q, p) = match to_phase_plane(CylinderPoint::new(s.theta, s.xi), offset) {
                Ok(pt) => (pt.q, pt.p),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let branch = match (boundary.kind, s.branch) {
                (BoundaryKind::SbmtI, Branch::Above) => ":above",
                (BoundaryKind::SbmtI, Branch::Below) => ":below",
                _ => "",
            };
            BoundaryRow {
                theta: s.theta,
                xi: s.xi,
                q,
                p,
                branch_kind: format!("{}{branch}", boundary.kind.label()),
            }
        })
        .collect()
}

/// Where the sidecar of a data file lives.
pub fn sidecar_path(output: &Path) -> PathBuf {
    suffixed(output, ".meta.json")
}

/// Where `true-basin` writes the analytic contour.
pub fn contour_path(output: &Path) -> PathBuf {
    suffixed(output, ".contour.csv")
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub sidecar: PathBuf,
    /// Sweep entries attempted (1 without a sweep).
    pub entries: usize,
    pub failures: Vec<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_rows<R: CsvRecord>(cfg: &RunConfig, rows: &[R], json_doc: &impl Serialize) -> Result<(), CliError> {
    let path = &cfg.output.path;
    match cfg.output.format {
        Format::Csv => write_csv(create(path)?, rows).map_err(io_err(path)),
        Format::Json => write_json(path, json_doc),
    }
}

fn write_grid(cfg: &RunConfig, grid: &BasinGrid) -> Result<(), CliError> {
    let path = &cfg.output.path;
    match cfg.output.format {
        Format::Csv => write_raster(create(path)?, grid.nx, &grid.safe).map_err(io_err(path)),
        Format::Json => write_json(path, grid),
    }
}

fn grid_details(grid: &BasinGrid) -> serde_json::Value {
    json!({
        "plane": grid.plane,
        "nx": grid.nx,
        "ny": grid.ny,
        "psi": grid.meta.psi,
        "sim": grid.meta.sim,
        "escape_xi": grid.meta.params.xi_max,
        "safe_count": grid.safe_count(),
        "area": grid_area(grid).ok(),
        "row_order": "first line is the lowest p (or xi) row; columns ascend in q (or theta)",
    })
}

/// Run one configured command, writing data files and the sidecar.
///
/// Sweeps keep going past failing entries; the failures are listed in the
/// sidecar and reported through [`CliError::Partial`] after all files are
/// written.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let mut outputs = vec![cfg.output.path.clone()];
    let mut failures = Vec::new();
    let mut entries = 1;
    let params = cfg.params;
    let details = match cfg.command {
        Command::Boundary => {
            let basins = sb_boundaries_with(&params, cfg.numerics.theta_samples)?;
            let rows: Vec<BoundaryRow> = [&basins.sbst, &basins.sbmt]
                .into_iter()
                .flatten()
                .flat_map(|b| boundary_rows(b, params.psi))
                .collect();
            write_rows(cfg, &rows, &basins)?;
            json!({
                "critical": basins.critical,
                "sbst": basins.sbst.as_ref().map(|b| b.level),
                "sbmt_kind": basins.sbmt.as_ref().map(|b| b.kind),
                "sbmt_level": basins.sbmt.as_ref().map(|b| b.level),
                "sbmt_theta_gap": basins.sbmt.as_ref().and_then(|b| b.theta_gap),
                "relation": basins.relation,
            })
        }
        Command::CriticalForcing => {
            let omegas = cfg.sweep.map_or_else(|| vec![params.omega], |s| s.values());
            entries = omegas.len();
            let mut rows = Vec::new();
            for omega in omegas {
                match critical_forcing(omega, params.xi_max) {
                    Ok(f_hat) => rows.push(CriticalForcingRow {
                        omega,
                        xi_max: params.xi_max,
                        f_hat,
                    }),
                    Err(e) if cfg.sweep.is_none() => return Err(e.into()),
                    Err(e) => failures.push(format!("omega = {omega}: {e}")),
                }
            }
            write_rows(cfg, &rows, &rows)?;
            json!({ "rows": rows.len() })
        }
        Command::Erosion => {
            let grid = cfg.sweep.map(|s| s.values()).unwrap_or_default();
            let profile = erosion_profile(&grid, params.omega, params.xi_max)?;
            let rows: Vec<ErosionRow> = profile
                .entries
                .iter()
                .map(|e| ErosionRow {
                    forcing: e.forcing,
                    xi_hat: e.xi_hat,
                    mu: e.mu,
                })
                .collect();
            write_rows(cfg, &rows, &profile)?;
            json!({ "critical_forcing": profile.critical_forcing, "rows": rows.len() })
        }
        Command::SimulateBasin => {
            let n = cfg.numerics.resolution;
            let grid = basin_grid(cfg.plane, n, n, &cfg.sim_params(), &cfg.numerics.sim_config())?;
            write_grid(cfg, &grid)?;
            grid_details(&grid)
        }
        Command::TrueBasin => {
            let n = cfg.numerics.resolution;
            let grid = true_basin_grid(
                cfg.plane,
                n,
                n,
                &cfg.sim_params(),
                cfg.numerics.psi_count,
                &cfg.numerics.sim_config(),
            )?;
            write_grid(cfg, &grid)?;
            let level = true_sb_level(&params)?;
            let rows = if level.xi_hat > 0.0 {
                boundary_rows(
                    &BasinBoundary::circle(level.xi_hat, cfg.numerics.theta_samples, &params)?,
                    0.0,
                )
            } else {
                Vec::new()
            };
            let contour = contour_path(&cfg.output.path);
            write_csv(create(&contour)?, &rows).map_err(io_err(&contour))?;
            outputs.push(contour);
            let mut d = grid_details(&grid);
            d["true_sb"] = json!(level);
            d["true_sb_area"] = json!(std::f64::consts::TAU * crate::slowflow::action(level.xi_hat)?);
            d
        }
        Command::CalibrateThreshold => {
            let forcings = cfg.sweep.map_or_else(|| vec![params.forcing], |s| s.values());
            entries = forcings.len();
            let results = threshold_sweep(
                &forcings,
                &cfg.sim_params(),
                cfg.numerics.epsilon,
                cfg.numerics.delta,
                &cfg.numerics.sim_config(),
            )?;
            let mut ok = Vec::new();
            for (f, r) in forcings.iter().zip(results) {
                match r {
                    Ok(r) => ok.push(r),
                    Err(e) if cfg.sweep.is_none() => return Err(e.into()),
                    Err(e) => failures.push(format!("F = {f}: {e}")),
                }
            }
            let rows: Vec<CalibrationRow> = ok
                .iter()
                .map(|r| CalibrationRow {
                    forcing: r.forcing,
                    xi_star: r.xi_star,
                    iterations: r.iterations,
                })
                .collect();
            write_rows(cfg, &rows, &ok)?;
            json!({ "results": ok })
        }
        Command::Trajectory => {
            let ic = cfg.initial.ok_or_else(|| config_err("q0", "trajectory needs q0 and p0"))?;
            let samples = trajectory(ic, &cfg.sim_params(), &cfg.numerics.sim_config(), cfg.stride)?;
            let rows: Vec<TrajectoryRow> = samples
                .iter()
                .map(|s| TrajectoryRow {
                    t: s.t,
                    q: s.q,
                    p: s.p,
                    e: s.e,
                })
                .collect();
            write_rows(cfg, &rows, &samples)?;
            json!({ "samples": rows.len(), "time_unit": "dimensionless time t" })
        }
    };

    let sidecar = sidecar_path(&cfg.output.path);
    let meta = json!({
        "tool": "safebasin",
        "version": VERSION,
        "command": cfg.command,
        "config": cfg,
        "outputs": outputs,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "failures": failures,
        "details": details,
    });
    write_json(&sidecar, &meta)?;
    Ok(Report {
        outputs,
        sidecar,
        entries,
        failures,
    })
}

/// Apply [`THREADS_ENV`] to the global worker pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| config_err(THREADS_ENV, format!("{value:?} is not a positive integer")))?;
    // a pool that already exists (repeated calls in one process) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse, execute and report; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = configure_threads()
        .and_then(|_| parse_config(args))
        .and_then(|cfg| {
            let report = execute(&cfg)?;
            for path in report.outputs.iter().chain([&report.sidecar]) {
                eprintln!("wrote {}", path.display());
            }
            if report.failures.is_empty() {
                Ok(())
            } else {
                for f in &report.failures {
                    eprintln!("failed: {f}");
                }
                Err(CliError::Partial {
                    failed: report.failures.len(),
                    total: report.entries,
                })
            }
        });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("safebasin: {e}");
            e.exit_code()
        }
    }
}
