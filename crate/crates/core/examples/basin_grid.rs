//! Brute-force escape raster in the phase plane and on the resonance
//! cylinder, drawn as text.
//!
//! Run with `cargo run --release --example basin_grid`.

use safebasin::simulator::{basin_grid, grid_area, BasinGrid, Plane, SimConfig};
use safebasin::slowflow::BARRIER;
use safebasin::SystemParams;

fn draw(grid: &BasinGrid) {
    for j in (0..grid.ny).rev() {
        let row: String = (0..grid.nx).map(|i| if grid.is_safe(i, j) { '#' } else { '.' }).collect();
        println!("{row}");
    }
}

fn main() -> safebasin::Result<()> {
    let params = SystemParams::new(0.012, 0.89, 0.0, BARRIER)?;
    let cfg = SimConfig::new(30, 512)?;
    let plane = Plane::Qp {
        q_lo: -0.6,
        q_hi: 1.1,
        p_lo: -0.6,
        p_hi: 0.6,
    };
    let grid = basin_grid(plane, 68, 30, &params, &cfg)?;
    draw(&grid);
    println!("safe area {:.4} of the separatrix loop area 1.2\n", grid_area(&grid)?);

    let cylinder = basin_grid(Plane::Cylinder { xi_top: BARRIER }, 68, 20, &params, &cfg)?;
    draw(&cylinder);
    println!("{} of {} cylinder nodes stay in the well", cylinder.safe_count(), cylinder.safe.len());
    Ok(())
}
