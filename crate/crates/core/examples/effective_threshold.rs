//! Bisection for the effective escape threshold `ξ*` and the critical
//! forcing it implies.
//!
//! Run with `cargo run --release --example effective_threshold`. A coarse
//! tolerance and a short horizon keep the run to a few seconds.

use safebasin::calibration::threshold_sweep;
use safebasin::rm_analysis::critical_forcing;
use safebasin::simulator::SimConfig;
use safebasin::slowflow::BARRIER;
use safebasin::SystemParams;

fn main() -> safebasin::Result<()> {
    let base = SystemParams::new(0.0, 0.89, 0.0, BARRIER)?;
    let cfg = SimConfig::new(20, 256)?;
    for entry in threshold_sweep(&[0.006, 0.012, 0.018], &base, 2e-3, 0.05, &cfg)? {
        match entry {
            Ok(r) => println!(
                "F = {}: ξ* = {:.5} after {} bisections (center {:.5}, verified {}), F̂(ξ*) = {:.6}",
                r.forcing,
                r.xi_star,
                r.iterations,
                r.xi_center,
                r.bracket_verified,
                critical_forcing(0.89, r.xi_star)?
            ),
            Err(e) => println!("failed: {e}"),
        }
    }
    Ok(())
}
