use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfglg::harness::{emit_report, run_study, StudyConfig};

#[derive(Parser)]
#[command(name = "mfglg", version, about = "Lagrange-Galerkin mean field game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write CSV, plot data and a manifest.
    Run {
        /// key = value study file; MFGLG_* variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// lq-1d, lq-2d, local-1d or fp-only-ou.
        #[arg(long)]
        test: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Comma-separated mesh widths, coarsest first.
        #[arg(long)]
        dx_list: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        max_outer: Option<usize>,
    },
    /// Run the quick invariant checks.
    Verify,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Verify => {
            let checks = mfglg::verify::run_checks();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{} checks, {failed} failed", checks.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Run {
            config,
            test,
            out_dir,
            dx_list,
            tau,
            max_outer,
        } => {
            let mut overrides = Vec::new();
            let mut push = |k: &str, v: Option<String>| {
                if let Some(v) = v {
                    overrides.push((k.to_string(), v));
                }
            };
            push("test", test);
            push("out_dir", out_dir.map(|p| p.display().to_string()));
            push("dx_list", dx_list);
            push("tau", tau.map(|t| t.to_string()));
            push("max_outer", max_outer.map(|n| n.to_string()));
            match run(config, &overrides) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

fn run(config: Option<PathBuf>, overrides: &[(String, String)]) -> mfglg::Result<()> {
    let text = match &config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| mfglg::Error::Io {
            path: p.clone(),
            source: e,
        })?),
        None => None,
    };
    let cfg = StudyConfig::resolve(text.as_deref(), std::env::vars(), overrides)?;
    let report = run_study(&cfg)?;
    print!("{}", report.summary());
    for path in emit_report(&report, &cfg, &cfg.out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
