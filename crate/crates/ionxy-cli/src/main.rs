//! `sim` — trapped-ion spin-1 XY chain experiments from the command line.
//!
//! Usage: `sim <experiment> [--config FILE] [--preset NAME] [--seed N] [--out DIR]`
//!
//! Exit codes: 0 success, 2 validation error, 3 physics-domain error,
//! 4 numerical failure.

mod config;
mod experiments;
mod manifest;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ionxy::ErrorClass;

#[derive(Parser)]
#[command(name = "sim", version, about = "Spin-1 XY chain simulator for trapped-ion crystals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset applied underneath the config file.
    #[arg(long)]
    preset: Option<String>,
    /// Random seed for sampled experiments (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Transverse normal modes and Lamb-Dicke factors.
    Modes(RunArgs),
    /// Coupling matrix J_ij, spin-phonon shifts, and power-law fits.
    Couplings(RunArgs),
    /// Time evolution under the effective Hamiltonian.
    Dynamics(RunArgs),
    /// Parity oscillation scan of an analysis phase.
    ParityScan(RunArgs),
    /// Entanglement witness along the XY flop.
    WitnessVsTime(RunArgs),
    /// Adiabatic (S_z)² ramp toward the XY ground state.
    Adiabatic(RunArgs),
    /// Exact ground state, pattern populations, and AKLT overlap.
    GroundStateAnalysis(RunArgs),
    /// Symmetric/antisymmetric sector energies across a D sweep.
    SymmetrySweep(RunArgs),
    /// Full spin-phonon model against the effective one.
    FullVsEffective(RunArgs),
    /// List the named presets.
    ListPresets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::ListPresets => {
            for p in ionxy::presets::catalog() {
                println!("{:<12} {}", p.name, p.description);
            }
            return ExitCode::SUCCESS;
        }
        Command::Modes(a) => ("modes", a),
        Command::Couplings(a) => ("couplings", a),
        Command::Dynamics(a) => ("dynamics", a),
        Command::ParityScan(a) => ("parity_scan", a),
        Command::WitnessVsTime(a) => ("witness_vs_time", a),
        Command::Adiabatic(a) => ("adiabatic", a),
        Command::GroundStateAnalysis(a) => ("ground_state_analysis", a),
        Command::SymmetrySweep(a) => ("symmetry_sweep", a),
        Command::FullVsEffective(a) => ("full_vs_effective", a),
    };
    match run(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Physics => 3,
                ErrorClass::Numerical => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn run(experiment: &str, args: &RunArgs) -> ionxy::Result<()> {
    let started = Instant::now();
    let raw = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                ionxy::Error::Invalid(format!("cannot read config {}: {e}", path.display()))
            })?;
            config::parse_raw(&text)?
        }
        None => config::RawConfig::default(),
    };
    let resolved = config::resolve(experiment, &raw, args.preset.as_deref(), args.seed)?;
    resolved.chain.validate()?;

    let artifacts = experiments::run_experiment(&resolved)?;

    fs::create_dir_all(&args.out).map_err(|e| {
        ionxy::Error::Invalid(format!("cannot create output directory {}: {e}", args.out.display()))
    })?;
    for (name, bytes) in &artifacts.files {
        manifest::write_atomic(&args.out, name, bytes)?;
    }
    let manifest = manifest::manifest_json(&resolved, &artifacts.files, started.elapsed().as_secs_f64());
    let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');
    manifest::write_atomic(&args.out, "manifest.json", manifest_text.as_bytes())?;

    for line in &artifacts.log {
        println!("{line}");
    }
    println!(
        "wrote {} file(s) to {}",
        artifacts.files.len() + 1,
        args.out.display()
    );
    Ok(())
}
