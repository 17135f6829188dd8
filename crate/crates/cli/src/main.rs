//! `koopman`: delay-kernel Koopman analysis from a configuration file.

mod config;
mod diagnose;
mod error;
mod export;
mod manifest;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigArgs;
use crate::error::CliResult;
use crate::run::Stage;

#[derive(Debug, Parser)]
#[command(name = "koopman", version, about = "Koopman spectra from delay-coordinate kernels")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the trajectory and its metadata.
    Generate(ConfigArgs),
    /// Build (or reuse) the kernel matrix for each Q.
    Kernel(ConfigArgs),
    /// Kernel, normalization and leading eigenpairs.
    Spectrum(ConfigArgs),
    /// Everything up to the Galerkin generator solutions.
    Galerkin(ConfigArgs),
    /// Full run with every table and the manifest.
    Pipeline(ConfigArgs),
    /// Diagnostic tables from a finished run.
    Diagnose {
        /// Output directory of the run.
        #[arg(long, short = 'o', default_value = "out")]
        out: PathBuf,
    },
}

fn staged(args: &ConfigArgs, last: Stage, name: &str) -> CliResult<()> {
    let cfg = args.load()?.validate()?;
    log::debug!("running through the {} stage", last.name());
    let manifest = run::run(&cfg, last, name)?;
    println!(
        "{name}: {} samples, {} delay setting(s), {} kernel cache hit(s); output in {}",
        manifest.trajectory.n,
        manifest.runs.len(),
        manifest.cache_hits(),
        cfg.out().display()
    );
    Ok(())
}

fn dispatch(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => staged(a, Stage::Generate, "generate"),
        Command::Kernel(a) => staged(a, Stage::Kernel, "kernel"),
        Command::Spectrum(a) => staged(a, Stage::Spectrum, "spectrum"),
        Command::Galerkin(a) => staged(a, Stage::Galerkin, "galerkin"),
        Command::Pipeline(a) => staged(a, Stage::Galerkin, "pipeline"),
        Command::Diagnose { out } => {
            let report = diagnose::diagnose(out)?;
            print!("{}", report.summary());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
