use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrdist_cli::{configure_threads, list_catalog, run, Pipeline};

#[derive(Parser)]
#[command(
    name = "mrdist",
    version,
    about = "Multiresolution projections of distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scaling function diagnostics.
    Info(RunArgs),
    /// Projection values on a grid.
    Project(RunArgs),
    /// Projection sequence at a point.
    Converge(RunArgs),
    /// Quasiasymptotic degree fit.
    Quasi(RunArgs),
    /// Projected against direct scaled pairings.
    Qbth3(RunArgs),
    /// Small-ball densities.
    Density(RunArgs),
    /// Poisson summation check of the projected delta.
    DeltaPoisson(RunArgs),
    /// List catalog names.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (pipeline, args) = match cli.command {
        Command::List => {
            print!("{}", list_catalog());
            return ExitCode::SUCCESS;
        }
        Command::Info(a) => (Pipeline::Info, a),
        Command::Project(a) => (Pipeline::Project, a),
        Command::Converge(a) => (Pipeline::Converge, a),
        Command::Quasi(a) => (Pipeline::Quasi, a),
        Command::Qbth3(a) => (Pipeline::Qbth3, a),
        Command::Density(a) => (Pipeline::Density, a),
        Command::DeltaPoisson(a) => (Pipeline::DeltaPoisson, a),
    };
    let status = configure_threads().and_then(|_| run(pipeline, &args.config, args.out.as_deref()));
    match status {
        Ok(s) => {
            if s.pass {
                println!("pass: {}", s.out_dir.display());
            } else {
                eprintln!("fail: {} ({})", s.failing.join(", "), s.out_dir.display());
            }
            ExitCode::from(s.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("mrdist: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
