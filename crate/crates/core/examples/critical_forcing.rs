//! Critical forcing `F̂` at which the saddle connects to the escape
//! threshold, and its growth with the forcing frequency.
//!
//! Run with `cargo run --release --example critical_forcing`.

use safebasin::rm_analysis::{critical_forcing, critical_points};
use safebasin::SystemParams;

fn main() -> safebasin::Result<()> {
    let xi_max = 0.1657;
    for omega in [0.85, 0.87, 0.89, 0.91, 0.92, 0.93] {
        match critical_forcing(omega, xi_max) {
            Ok(f) => {
                let cp = critical_points(&SystemParams::new(f, omega, 0.0, xi_max)?)?;
                println!(
                    "Ω = {omega}: F̂ = {f:.7}, saddle ξ = {:.6}, center ξ = {:.6}",
                    cp.saddle.point.xi, cp.center.point.xi
                );
            }
            Err(e) => println!("Ω = {omega}: {e}"),
        }
    }
    for xi_max in [0.15, 0.155, 0.16, 0.1657] {
        println!("ξ_max = {xi_max}: F̂(0.89) = {:.7}", critical_forcing(0.89, xi_max)?);
    }
    Ok(())
}
