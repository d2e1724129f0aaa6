//! Command-line front end for forward sampling, reconstruction, round trips
//! and edge spectra. Exit codes: 0 success, 2 tolerance failure, 3 bad input,
//! 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lattice_dn::experiment::{self, ExperimentConfig};
use lattice_dn::Error;

#[derive(Parser)]
#[command(name = "qgdn", version, about = "Lattice quantum-graph D-N maps and potential reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON)
    #[arg(long, global = true, env = "QGDN_CONFIG")]
    config: Option<PathBuf>,

    /// Output path; stdout when omitted (except for `forward`)
    #[arg(long, global = true, env = "QGDN_OUT")]
    out: Option<PathBuf>,

    /// Worker threads; defaults to the number of cores
    #[arg(long, global = true, env = "QGDN_WORKERS")]
    workers: Option<usize>,

    /// Seed for randomly planted potentials
    #[arg(long, global = true, env = "QGDN_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the edge D-N map of the configured potentials into a file
    Forward,
    /// Reconstruct interior-edge potentials from a D-N sample file
    Reconstruct {
        /// Sample file; falls back to `outputs.dn_file` of the config
        input: Option<PathBuf>,
    },
    /// Forward map, reconstruction and comparison against the planted potentials
    Roundtrip,
    /// Dirichlet eigenvalues and Weyl samples of `spectrum.edge` as CSV
    Spectrum,
}

fn load(path: Option<&Path>) -> lattice_dn::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Err(Error::Schema("--config is required for this command".into())),
    }
}

fn emit(out: Option<&Path>, text: &str) -> lattice_dn::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> lattice_dn::Result<bool> {
    let cfg_path = cli.config.as_deref();
    match &cli.command {
        Command::Forward => {
            let cfg = load(cfg_path)?;
            let out = cli
                .out
                .clone()
                .or(cfg.outputs.dn_file.clone())
                .ok_or_else(|| Error::Schema("forward needs --out or outputs.dn_file".into()))?;
            let summary = experiment::cmd_forward(&cfg, &out, cli.seed)?;
            for d in &summary.dropped {
                eprintln!("dropped lambda = {}: {}", d.lambda, d.reason);
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::Reconstruct { input } => {
            let cfg = cfg_path.map(ExperimentConfig::load).transpose()?;
            let input = input
                .clone()
                .or_else(|| cfg.as_ref().and_then(|c| c.outputs.dn_file.clone()))
                .ok_or_else(|| Error::Schema("no D-N sample file given".into()))?;
            let opts = cfg.as_ref().map(|c| c.recon_options()).unwrap_or_default();
            let output = experiment::cmd_reconstruct(&input, &opts)?;
            let out = cli.out.clone().or_else(|| cfg.and_then(|c| c.outputs.report));
            emit(out.as_deref(), &(serde_json::to_string_pretty(&output)? + "\n"))?;
            Ok(true)
        }
        Command::Roundtrip => {
            let cfg = load(cfg_path)?;
            let report = experiment::cmd_roundtrip(&cfg, cli.seed)?;
            for run in &report.runs {
                eprintln!(
                    "{:?}: worst relative error {:.3e} ({})",
                    run.mode,
                    run.worst_relative,
                    if run.passed { "pass" } else { "FAIL" }
                );
            }
            if let Some(d) = report.mode_discrepancy {
                eprintln!("callable/file discrepancy {d:.3e}");
            }
            let out = cli.out.clone().or(cfg.outputs.report.clone());
            emit(out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            Ok(report.passed)
        }
        Command::Spectrum => {
            let cfg = load(cfg_path)?;
            emit(cli.out.as_deref(), &experiment::cmd_spectrum(&cfg, cli.seed)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
