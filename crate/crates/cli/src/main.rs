use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use stula_cli::plot::{plot_csv, PlotKind};
use stula_cli::record::write_file;
use stula_cli::runner::{env_output_dir, run_file, validate_config};

#[derive(Parser)]
#[command(name = "stula", version, about = "Split tamed Langevin experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides the directory of the config's prefix
        /// and the environment variable.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check the regularity assumptions and drift bounds of a catalog
    /// potential.
    Validate {
        potential: String,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
        /// Output prefix.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render a CSV produced by `run` as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, out_dir } => {
            let dir = out_dir.or_else(env_output_dir);
            let out = run_file(&config, dir.as_deref())
                .with_context(|| format!("running {}", config.display()))?;
            println!("{} ({:.2}s)", out.record_path.display(), out.wall_clock_seconds);
            for f in &out.files {
                println!("  {}", f.display());
            }
        }
        Cmd::Validate {
            potential,
            dim,
            seed,
            n_samples,
            radius,
            output,
        } => {
            let output = output.unwrap_or_else(|| PathBuf::from(format!("validate_{potential}")));
            let cfg = validate_config(&potential, dim, seed, n_samples, radius, output)?;
            let out = stula_cli::run(&cfg, env_output_dir().as_deref())?;
            let report = &out.record.result;
            for c in report["checks"].as_array().into_iter().flatten() {
                let lambda = c["lambda"].as_f64().map(|l| format!(" (lambda {l:.3e})")).unwrap_or_default();
                println!(
                    "{:<4} {}{}  margin {:.3e}",
                    if c["holds"].as_bool() == Some(true) { "ok" } else { "FAIL" },
                    c["check"].as_str().unwrap_or(""),
                    lambda,
                    c["worst_margin"].as_f64().unwrap_or(f64::NAN)
                );
            }
            println!("{}", out.record_path.display());
            if report["all_hold"].as_bool() != Some(true) {
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Plot { csv, kind, output } => {
            let svg = plot_csv(&csv, kind)?;
            write_file(&output, svg.as_bytes())?;
            println!("{}", output.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
