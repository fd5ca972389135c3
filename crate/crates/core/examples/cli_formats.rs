//! Drive the command-line pipeline from code: parse flags, run a command and
//! read the CSV table and JSON sidecar it writes.
//!
//! Run with `cargo run --example cli_formats`.

use safebasin::cli::{execute, parse_config, read_csv_file, sidecar_path, BoundaryRow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("safebasin-example");
    std::fs::create_dir_all(&dir)?;
    let out = dir.join("boundary.csv");
    let cfg = parse_config([
        "safebasin",
        "boundary",
        "--forcing",
        "0.02",
        "--theta-samples",
        "12",
        "-o",
        out.to_str().ok_or("non-UTF-8 temp dir")?,
    ])?;
    let report = execute(&cfg)?;
    println!("wrote {:?} and {}", report.outputs, report.sidecar.display());

    let rows: Vec<BoundaryRow> = read_csv_file(&out)?;
    for r in rows.iter().take(6) {
        println!("{:<14} ϑ {:.4} ξ {:.6} q {:+.6} p {:+.6}", r.branch_kind, r.theta, r.xi, r.q, r.p);
    }
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&out))?)?;
    println!("sidecar: tool {} version {} command {}", meta["tool"], meta["version"], meta["command"]);
    Ok(())
}
