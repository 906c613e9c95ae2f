//! Command-line front end: experiments, beampatterns, the SNR sweep and
//! convergence traces.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isac_core::baselines::{solve_variant, ArchitectureVariant};
use isac_core::config::load_config;
use isac_core::harness::{
    default_fig3_sweeps, emit_beampattern, emit_fig3_sweep, resolve_threads, run_experiment,
    ExperimentSpec,
};
use isac_core::metrics::SteeringGrid;
use isac_core::scenario::{desired_beampattern, generate_channels};
use isac_core::{Error, Result};

#[derive(Parser)]
#[command(name = "isac-sim", version, about = "Secure IRS-assisted ISAC beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a TOML spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overridden by ISAC_THREADS).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Solve one variant on one fading realization and write its beampattern.
    Beampattern {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        variant: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the secrecy gap versus secrecy rate reference curves.
    Fig3 {
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the proposed design once and write its per-iteration trace.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            spec,
            out,
            threads,
            seed_base,
        } => {
            let mut parsed = ExperimentSpec::load(&spec)?;
            if let Some(s) = seed_base {
                parsed.seed_base = s;
            }
            let spec_dir = spec.parent().unwrap_or(Path::new("."));
            let out_dir = out
                .or_else(|| parsed.outputs.as_ref().map(|p| spec_dir.join(p)))
                .ok_or_else(|| Error::Config("no output directory: pass --out".into()))?;
            let base = parsed.base_config(spec_dir)?;
            let threads = resolve_threads(threads)?;
            let result = run_experiment(&parsed, &base, threads, Some(&out_dir))?;
            let failed = result.trials.iter().filter(|r| !r.error.is_empty()).count();
            println!(
                "{} trials, {} failed, {} files in {}",
                result.trials.len(),
                failed,
                result.files.len() + 1,
                out_dir.display()
            );
        }
        Command::Beampattern {
            config,
            variant,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let v: ArchitectureVariant = variant.parse()?;
            let ch = generate_channels(&cfg, seed)?;
            let report = solve_variant(v, &cfg, &ch, seed)?;
            let desired = desired_beampattern(&cfg.targets, &cfg.angle_grid)?;
            let grid = SteeringGrid::new(&cfg.angle_grid, cfg.n_tx)?;
            emit_beampattern(&report, &grid, &desired, &out)?;
        }
        Command::Fig3 { out } => emit_fig3_sweep(&default_fig3_sweeps(), &out)?,
        Command::Trace { config, seed, out } => {
            let cfg = load_config(&config)?;
            let ch = generate_channels(&cfg, seed)?;
            let report = solve_variant(ArchitectureVariant::ProposedHb, &cfg, &ch, seed)?;
            let file = File::create(&out).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            report.trace.write_csv(BufWriter::new(file))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
