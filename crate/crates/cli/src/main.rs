mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{Failure, Run};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "neumann-rbf", version, about = "Parameter studies for RBF-FD with Neumann boundary stabilisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: config::Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Condition number, Lebesgue constants and error of the reference stencil over alpha.
    RefSweep,
    /// |v| over candidate positions of a single boundary node.
    Vmap,
    /// Optimal directions on the reference stencil across shape parameters.
    Optdir,
    /// Repeated-HHD stability over P, eps s and dmin on the test domain.
    Stability,
    /// Poisson error over dmin plus a two-spacing refinement pair.
    Poisson,
    /// Boundary-position optimisation on the reference stencil.
    Appendixc,
    /// Write the plain and/or projected node sets of the test domain.
    Nodegen,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let flags = match config::merge(cli.flags) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let run = Run { flags };
    let result = match cli.command {
        Command::RefSweep => commands::ref_sweep_cmd(&run),
        Command::Vmap => commands::vmap_cmd(&run),
        Command::Optdir => commands::optdir_cmd(&run),
        Command::Stability => commands::stability_cmd(&run),
        Command::Poisson => commands::poisson_cmd(&run),
        Command::Appendixc => commands::appendixc_cmd(&run),
        Command::Nodegen => commands::nodegen_cmd(&run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
    }
}
