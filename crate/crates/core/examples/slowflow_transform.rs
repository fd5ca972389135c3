//! Well geometry, action and the map from the resonance cylinder `(ϑ, ξ)`
//! to the phase plane `(q, p)`.
//!
//! Run with `cargo run --example slowflow_transform`.

use std::f64::consts::TAU;

use safebasin::slowflow::{
    action, conservation, forcing_coefficient, jacobian_det, period, to_phase_plane, total_energy, well_geometry,
    BARRIER,
};
use safebasin::{CylinderPoint, SystemParams};

fn main() -> safebasin::Result<()> {
    println!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "ξ", "q_min", "q_max", "k", "J", "T", "A");
    for xi in [0.01, 0.05, 0.1, 0.15, 0.165] {
        let g = well_geometry(xi)?;
        println!(
            "{xi:>8} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.4} {:>10.6}",
            g.q_min,
            g.q_max,
            g.k,
            action(xi)?,
            period(xi)?,
            forcing_coefficient(xi)?
        );
    }
    println!("separatrix loop area 2πJ(1/6) = {:.12}", TAU * action(BARRIER)?);

    let xi = 0.1;
    println!("\norbit ξ = {xi} sampled along the slow phase:");
    for i in 0..8 {
        let pt = CylinderPoint::new(TAU * i as f64 / 8.0, xi);
        let qp = to_phase_plane(pt, 0.0)?;
        println!(
            "ϑ = {:.3}: q {:+.6} p {:+.6} E {:.12} |J| {:.6}",
            pt.theta,
            qp.q,
            qp.p,
            total_energy(qp),
            jacobian_det(pt)?
        );
    }

    let params = SystemParams::new(0.012, 0.89, 0.0, 0.1657)?;
    let c = conservation(CylinderPoint::new(0.0, xi), &params)?;
    println!("\nC(0, {xi}) at F = {}, Ω = {}: {c:.12}", params.forcing, params.omega);
    Ok(())
}
