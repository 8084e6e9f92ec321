use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use optraj::cli::{run_check, run_export, run_solve, SolveOverrides};
use optraj::transcribe::Scheme;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "optraj",
    about = "Transcribe and solve optimal-control problems from declarative problem files",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file; writes <stem>.traj.csv and <stem>.sol.json
    Solve {
        file: PathBuf,
        /// Override the grid interval count from the file
        #[arg(long = "N", value_name = "INT")]
        intervals: Option<usize>,
        /// Override the discretization scheme
        /// (forward_euler | backward_euler | trapezoidal)
        #[arg(long, value_name = "NAME")]
        scheme: Option<String>,
    },
    /// Export the transcribed program as <stem>.nlp.txt
    Export { file: PathBuf },
    /// Validate a problem file and print its classification and sizes
    Check { file: PathBuf },
}

fn parse_scheme(name: Option<String>) -> Result<Option<Scheme>> {
    match name {
        None => Ok(None),
        Some(name) => match Scheme::parse(&name) {
            Some(s) => Ok(Some(s)),
            None => bail!("unknown scheme \"{name}\""),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve {
            file,
            intervals,
            scheme,
        } => match parse_scheme(scheme) {
            Ok(scheme) => run_solve(&file, SolveOverrides { intervals, scheme }),
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Export { file } => run_export(&file),
        Command::Check { file } => run_check(&file),
    };
    ExitCode::from(code as u8)
}
