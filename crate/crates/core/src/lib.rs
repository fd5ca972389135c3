//! Safe basins of escape from a cubic potential well.
//!
//! The crate follows one pipeline:
//!
//! * [`elliptic`]: complete elliptic integrals, Jacobi functions, nome.
//! * [`slowflow`]: cubic-well geometry, action, the conserved slow-flow
//!   quantity `C(ϑ, ξ)` and the map from the resonance cylinder to `(q, p)`.
//! * [`rm_analysis`]: critical points of the slow flow, safe-basin
//!   boundaries, the critical forcing `F̂`, the phase-invariant safe-basin
//!   level and erosion profiles.
//! * [`simulator`]: brute-force escape simulation and basin rasters.
//! * [`calibration`]: bisection for the effective escape threshold `ξ*`.
//! * [`cli`]: configuration, orchestration and file formats for the
//!   `safebasin` binary.

pub mod calibration;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod quad;
pub mod rm_analysis;
pub mod roots;
pub mod simulator;
pub mod slowflow;

pub use error::{Error, Result};
pub use slowflow::{CylinderPoint, PhasePoint, SystemParams};
