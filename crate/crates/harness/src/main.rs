use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = gibbs_lines::cli::Cli::parse();
    ExitCode::from(gibbs_lines::cli::dispatch(cli))
}
