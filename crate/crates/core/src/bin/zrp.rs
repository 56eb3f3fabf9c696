use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zrp::experiment::{run, OutputFormat, RunOptions};
use zrp::parallel::{thread_count, with_threads};
use zrp::suite::{run_suite, SuiteKind};

#[derive(Parser)]
#[command(name = "zrp", version, about = "Zero-range process simulator and verification suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: ZRP_THREADS, else available parallelism).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
    /// Run the acceptance matrix or the smoke subset.
    Suite {
        #[arg(value_parser = ["acceptance", "smoke"])]
        kind: String,
        /// Comma-separated criterion numbers; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the JSON summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, seed, threads, out, format } => {
            let format: OutputFormat = format.parse().expect("restricted by clap");
            match run(&config, &RunOptions { seed, threads, out, format }) {
                Ok(summary) => {
                    for r in &summary.reports {
                        println!("[{}] {:<20} statistic {:<12.6} threshold {}", if r.pass { "PASS" } else { "FAIL" }, r.test, r.statistic, r.threshold);
                    }
                    println!("artifacts in {}", summary.out_dir.display());
                    summary.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Suite { kind, only, seed, threads, out } => {
            let kind: SuiteKind = kind.parse().expect("restricted by clap");
            let result = with_threads(thread_count(threads), || run_suite(kind, only.as_deref(), seed, |line| println!("{line}")));
            match result {
                Ok(summary) => {
                    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
                    if let Some(path) = out {
                        if let Err(e) = std::fs::write(&path, json + "\n") {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return ExitCode::from(1);
                        }
                    }
                    let failed = summary.lines.iter().filter(|l| !l.pass).count();
                    println!("{} of {} lines passed", summary.lines.len() - failed, summary.lines.len());
                    summary.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
