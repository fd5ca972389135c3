//! Phase-invariant safe basin: the intersection of escape rasters over
//! several forcing phases, compared with the analytic circle `ξ = ξ̂`.
//!
//! Run with `cargo run --release --example true_basin`.

use std::f64::consts::TAU;

use safebasin::rm_analysis::true_sb_level;
use safebasin::simulator::{grid_area, true_basin_grid, Plane, SimConfig};
use safebasin::slowflow::{action, BARRIER};
use safebasin::SystemParams;

fn main() -> safebasin::Result<()> {
    let forcing = 0.007;
    let analytic = SystemParams::new(forcing, 0.89, 0.0, 0.1657)?;
    let level = true_sb_level(&analytic)?;
    println!("ξ̂ = {:.6} from {:?}, area 2πJ(ξ̂) = {:.4}", level.xi_hat, level.kind, TAU * action(level.xi_hat)?);

    let sim = analytic.with_xi_max(BARRIER);
    let cfg = SimConfig::new(30, 512)?;
    let plane = Plane::Qp {
        q_lo: -0.6,
        q_hi: 1.1,
        p_lo: -0.6,
        p_hi: 0.6,
    };
    for n in [1, 3, 7] {
        let grid = true_basin_grid(plane, 60, 60, &sim, n, &cfg)?;
        println!("{n} phases: safe area {:.4}", grid_area(&grid)?);
    }
    Ok(())
}
