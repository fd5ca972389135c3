//! Erosion of the phase-invariant safe basin with growing forcing, with the
//! jump at the critical forcing.
//!
//! Run with `cargo run --release --example erosion_profile`.

use safebasin::rm_analysis::erosion_profile;

fn main() -> safebasin::Result<()> {
    let grid: Vec<f64> = (1..=30).map(|i| 0.001 * i as f64).collect();
    let profile = erosion_profile(&grid, 0.89, 0.1657)?;
    println!("F̂ = {:?}", profile.critical_forcing);
    println!("{:>12} {:>10} {:>10}", "F", "ξ̂", "μ");
    for e in &profile.entries {
        println!("{:>12.9} {:>10.6} {:>10.6}", e.forcing, e.xi_hat, e.mu);
    }
    Ok(())
}
