//! Boundaries of the saddle-type and maximum-type safe basins below and
//! above the critical forcing, their areas and a membership query.
//!
//! Run with `cargo run --release --example safe_basin_boundaries`.

use std::f64::consts::PI;

use safebasin::rm_analysis::{basin_area, contains, critical_forcing, sb_boundaries, SlowFlow};
use safebasin::{CylinderPoint, SystemParams};

fn main() -> safebasin::Result<()> {
    let (omega, xi_max) = (0.89, 0.1657);
    let f_hat = critical_forcing(omega, xi_max)?;
    println!("F̂ = {f_hat:.7}");
    for f in [0.008, 0.02] {
        let params = SystemParams::new(f, omega, 0.0, xi_max)?;
        let sb = sb_boundaries(&params)?;
        let flow = SlowFlow::new(params)?;
        println!(
            "\nF = {f}: saddle (0, {:.6}), center (π, {:.6}), relation {:?}",
            sb.critical.saddle.point.xi, sb.critical.center.point.xi, sb.relation
        );
        for b in [&sb.sbst, &sb.sbmt].into_iter().flatten() {
            let lowest = b.samples.iter().map(|s| s.xi).fold(f64::INFINITY, f64::min);
            println!(
                "  {:?}: level {:.9}, {} samples, lowest ξ {lowest:.6}, gap {:?}, area {:.6}",
                b.kind,
                b.level,
                b.samples.len(),
                b.theta_gap,
                basin_area(b, &params)?
            );
        }
        let probe = CylinderPoint::new(PI, 0.12);
        if let Some(sbst) = &sb.sbst {
            println!("  (π, 0.12) inside SBST: {}", contains(sbst, &flow, probe)?);
        }
    }
    Ok(())
}
