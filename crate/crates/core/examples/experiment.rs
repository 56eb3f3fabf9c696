//! Run a JSON experiment config and print the report lines.
//!
//! ```text
//! cargo run --release --example experiment -- examples/configs/superlinear_hitting.json
//! ```

use std::error::Error;
use std::path::PathBuf;

use zrp::experiment::{run, RunOptions};

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/poisson_case.json"));
    let out = std::env::temp_dir().join("zrp-example");
    let summary = run(&path, &RunOptions { out: Some(out), ..RunOptions::default() })?;
    for r in &summary.reports {
        println!("{:<14} pass={} statistic={:.4} threshold={}", r.test, r.pass, r.statistic, r.threshold);
    }
    println!("config sha256 {}", summary.config_sha256);
    println!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
    Ok(())
}
