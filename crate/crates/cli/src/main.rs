use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use viscobeam_cli::{run, Command};

#[derive(Parser)]
#[command(name = "viscobeam", version, about = "Viscoelastic cantilever with fading memory and boundary damping")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Paths {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one trajectory and its energy diagnostics.
    Simulate(Paths),
    /// Run the Cartesian product of the `[sweep]` lists.
    Sweep(Paths),
    /// Stabilizability check on two trajectories.
    Pair(Paths),
    /// Stationary states and the distance of a trajectory to them.
    Stationary(Paths),
    /// Check the modelling hypotheses without simulating.
    Validate(Paths),
    /// Hölder probe in the weak norm.
    Probe(Paths),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let (cmd, paths) = match cli.command {
        Cmd::Simulate(p) => (Command::Simulate, p),
        Cmd::Sweep(p) => (Command::Sweep, p),
        Cmd::Pair(p) => (Command::Pair, p),
        Cmd::Stationary(p) => (Command::Stationary, p),
        Cmd::Validate(p) => (Command::Validate, p),
        Cmd::Probe(p) => (Command::Probe, p),
    };
    std::process::exit(run(cmd, &paths.config, paths.out.as_deref()).code());
}
