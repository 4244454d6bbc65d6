use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use geoloop_cli::run::{run_scene, RunOptions};
use geoloop_cli::{formula_table, init_threads, trace, verify, EXIT_IO};

#[derive(Parser)]
#[command(name = "geoloop", version, about = "Curve and loop-family shortening with length certificates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scene and write report, curves and traces.
    Run {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Absolute slack term; defaults to 1e-3·a.
        #[arg(long)]
        slack_c0: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-measure every certificate of a report.
    Verify {
        report: PathBuf,
        /// Directory holding the witness curves (default: next to the report).
        curves_dir: Option<PathBuf>,
    },
    /// Print the bound formula and loop-count tables.
    Formula {
        #[arg(long, default_value_t = 1.5)]
        k: f64,
        /// Largest m of the table.
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        a: f64,
    },
    /// Dump one shortening family to CSV.
    Trace {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Node of a family scene.
        #[arg(long, default_value_t = 0)]
        node: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO as u8)
        }
    }
}

fn real_main(cli: Cli) -> anyhow::Result<i32> {
    init_threads()?;
    match cli.cmd {
        Cmd::Run {
            scene,
            out,
            slack_c0,
            seed,
        } => {
            let o = run_scene(&scene, &out, &RunOptions { slack_c0, seed })?;
            let r = &o.report;
            for c in &r.certificates {
                println!(
                    "{:<16} claimed {:.9} measured {:.9} slack {:.3e} {}",
                    c.formula.name(),
                    c.claimed,
                    c.measured,
                    c.slack,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            if let Some(v) = &r.violation {
                println!("hypothesis violated: {} ({})", v.message, v.loop_curve);
            }
            println!("status {:?}; report {}", r.status, o.report_path.display());
            Ok(o.code)
        }
        Cmd::Verify { report, curves_dir } => {
            let o = verify::verify(&report, curves_dir.as_deref())?;
            for l in o.lines() {
                println!("{l}");
            }
            Ok(o.code)
        }
        Cmd::Formula { k, m, a } => {
            formula_table(k, m, a, &mut std::io::stdout().lock())?;
            Ok(0)
        }
        Cmd::Trace { scene, out, node } => {
            let n = trace(&scene, node, &out)?;
            println!("{n} frames written to {}", out.display());
            Ok(0)
        }
    }
}
