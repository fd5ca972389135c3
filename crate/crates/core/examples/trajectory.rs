//! A single forced trajectory, its energy and the escape record for the
//! same initial condition.
//!
//! Run with `cargo run --release --example trajectory`.

use safebasin::simulator::{simulate_escape_with, trajectory, SimConfig};
use safebasin::slowflow::BARRIER;
use safebasin::{PhasePoint, SystemParams};

fn main() -> safebasin::Result<()> {
    let cfg = SimConfig::new(40, 1024)?;
    for (forcing, ic) in [(0.008, PhasePoint::new(0.2, 0.0)), (0.02, PhasePoint::new(0.5, 0.1))] {
        let params = SystemParams::new(forcing, 0.89, 0.0, BARRIER)?;
        let samples = trajectory(ic, &params, &cfg, 4096)?;
        println!("F = {forcing}, start ({}, {}):", ic.q, ic.p);
        for s in samples.iter().take_while(|s| s.e < 1.0) {
            println!("  t {:>8.2} q {:+.5} p {:+.5} E {:.5}", s.t, s.q, s.p, s.e);
        }
        let r = simulate_escape_with(ic, &params, &cfg)?;
        println!("  escaped {} at t {:?}, max energy {:.5}", r.escaped, r.t_escape, r.e_max);
    }
    Ok(())
}
