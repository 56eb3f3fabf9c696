//! Full acceptance matrix. Prints one line per criterion and exits non-zero
//! on any unexpected failure.
//!
//! Criterion 9 with distance labels has a known counterexample (see README);
//! its line is printed as it comes out, and the target instead requires the
//! left-to-right and reach-count lines to pass and the failure to be an order
//! violation rather than an error.

use std::process::ExitCode;

use zrp::suite::{run_suite, SuiteKind};

const SEED: u64 = 20240601;

fn main() -> ExitCode {
    let summary = match run_suite(SuiteKind::Acceptance, None, SEED, |line| println!("{line}")) {
        Ok(s) => s,
        Err(e) => {
            println!("suite error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut unexpected = Vec::new();
    for line in &summary.lines {
        let known = line.id == "9" && line.detail.contains("order violations");
        if !line.pass && !known {
            unexpected.push(line.id.clone());
        }
    }
    for id in ["9a", "9b"] {
        if summary.line(id).is_none() {
            unexpected.push(format!("{id} missing"));
        }
    }
    let ids: Vec<&str> = summary.lines.iter().map(|l| l.id.as_str()).collect();
    for n in 1..=13 {
        if !ids.contains(&n.to_string().as_str()) {
            unexpected.push(format!("{n} missing"));
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: ok ({} lines)", summary.lines.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
