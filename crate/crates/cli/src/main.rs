use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nabla_bvp_cli::commands::{self, EXIT_INPUT};
use nabla_bvp_cli::SolverOverrides;

/// Solve, certify and verify coupled nabla fractional boundary value problems.
#[derive(Debug, Parser)]
#[command(name = "nabla-bvp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Picard iteration and write the solution as CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Write the existence/stability certificate as JSON.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the Green's kernel table as CSV.
    Green {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        a: i64,
        #[arg(long, allow_negative_numbers = true)]
        b: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check kernels, solvers and certificates against each other.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; 2 is reserved for certification
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let mut stdout = io::stdout().lock();
    let result = match cli.command {
        Command::Solve {
            config,
            out,
            tol,
            max_iter,
        } => commands::cmd_solve(
            &config,
            &out,
            SolverOverrides { tol, max_iter },
            &mut stdout,
        ),
        Command::Certify { config, out } => commands::cmd_certify(&config, &out, &mut stdout),
        Command::Green { alpha, a, b, out } => commands::cmd_green(alpha, a, b, &out, &mut stdout),
        Command::Verify {
            config,
            seed,
            tol,
            max_iter,
        } => commands::cmd_verify(
            &config,
            seed,
            SolverOverrides { tol, max_iter },
            &mut stdout,
        ),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
