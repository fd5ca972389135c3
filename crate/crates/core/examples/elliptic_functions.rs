//! Complete elliptic integrals, Jacobi functions and the nome.
//!
//! Run with `cargo run --example elliptic_functions`.

use std::f64::consts::PI;

use safebasin::elliptic::{complete_e, complete_k, jacobi, nome};

fn main() -> safebasin::Result<()> {
    println!("{:>6} {:>20} {:>20} {:>20}", "k", "K(k)", "E(k)", "q(k)");
    for k in [0.0, 0.3, 0.6, 0.9, 0.99] {
        println!("{k:>6} {:>20.15} {:>20.15} {:>20.3e}", complete_k(k)?, complete_e(k)?, nome(k)?);
    }

    let k = 0.8;
    let quarter = complete_k(k)?;
    println!("\nJacobi functions at k = {k}, quarter period K = {quarter:.12}");
    for frac in [0.0, 0.5, 1.0, 2.0] {
        let u = frac * quarter;
        let e = jacobi(u, k)?;
        println!("u = {frac}K: sn {:+.12} cn {:+.12} dn {:+.12}", e.sn, e.cn, e.dn);
    }

    let kp = (1.0f64 - k * k).sqrt();
    let legendre = complete_e(k)? * complete_k(kp)? + complete_e(kp)? * quarter - quarter * complete_k(kp)?;
    println!("\nLegendre relation: {legendre:.15} (π/2 = {:.15})", PI / 2.0);
    Ok(())
}
