//! Command-line front end.
//!
//! Exit codes: 0 when every criterion passes within the time budget, 1 on a
//! failed criterion, 2 on a configuration or I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gibbs_lines_core::lattice::{BoundaryCurve, EnsembleData, Grid};
use gibbs_lines_core::mcmc::{run_chain, ChainState, RunConfig};
use gibbs_lines_core::rng::seed_policy;
use gibbs_lines_core::ExtReal;

use crate::config::{parse_hamiltonian, ExperimentConfig, ExperimentId};
use crate::error::HarnessError;
use crate::export::{paths_table, Table};
use crate::{execute, write_outputs};

#[derive(Debug, Parser)]
#[command(name = "gibbs-lines", version, about = "Simulations of H-Brownian Gibbsian line ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment of the catalog (E1..E7, LAMBDA).
    Run(RunArgs),
    /// Sample a lattice ensemble with the Metropolis chain and write the paths as CSV.
    Sample(SampleArgs),
    /// Run two coupled chains from ordered data and count order violations.
    Couple(CoupleArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory; a subdirectory per experiment is created inside.
    #[arg(long, env = "GIBBS_LINES_OUT", default_value = "runs")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub experiment: String,
    /// TOML file merged over the experiment's defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value = "exponential:1.0")]
    pub hamiltonian: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    /// Entrance lattice indices, top curve first.
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    pub entrance: Vec<i64>,
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    pub exit: Vec<i64>,
    #[arg(long, default_value = "inf", allow_hyphen_values = true)]
    pub top: ExtReal,
    #[arg(long, default_value = "-inf", allow_hyphen_values = true)]
    pub bottom: ExtReal,
    #[arg(long, default_value_t = 10)]
    pub samples: u64,
    /// Defaults to 50 sweeps of k·n² events.
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Defaults to one sweep.
    #[arg(long)]
    pub thinning: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    /// TOML file; the `[coupling]` section describes the two ensembles.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub hamiltonian: Option<String>,
    #[arg(long)]
    pub events: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Count violations instead of refusing a Hamiltonian not declared convex.
    #[arg(long)]
    pub allow_nonconvex: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Runs a parsed command line and returns the process exit code.
pub fn dispatch(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::Sample(args) => sample(&args).map(|()| 0),
        Command::Couple(args) => couple(&args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}

fn load(path: Option<&Path>, id: ExperimentId) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => ExperimentConfig::from_file(p, Some(id)),
        None => Ok(ExperimentConfig::defaults(id)),
    }
}

fn run(args: &RunArgs) -> Result<u8, HarnessError> {
    let id: ExperimentId = args.experiment.parse()?;
    let mut cfg = load(args.config.as_deref(), id)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    finish(&cfg, &args.output, id.as_str())
}

fn couple(args: &CoupleArgs) -> Result<u8, HarnessError> {
    let mut cfg = load(args.config.as_deref(), ExperimentId::E3)?;
    if let Some(h) = &args.hamiltonian {
        cfg.hamiltonian = h.clone();
    }
    if let Some(e) = args.events {
        cfg.coupling.events = e;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.coupling.allow_nonconvex |= args.allow_nonconvex;
    cfg.validate()?;
    finish(&cfg, &args.output, "couple")
}

fn finish(cfg: &ExperimentConfig, output: &OutputArgs, subdir: &str) -> Result<u8, HarnessError> {
    let (out, timing) = execute(cfg, output.workers)?;
    let dir = output.out.join(subdir);
    write_outputs(&dir, &out, &timing)?;
    for line in out.report.summary_lines() {
        println!("{line}");
    }
    println!(
        "[{}] {} runtime: {:.2} s within {} s",
        if timing.within_budget { "PASS" } else { "FAIL" },
        cfg.experiment,
        timing.elapsed_seconds,
        timing.budget_seconds
    );
    println!("wrote {}", dir.display());
    Ok(if out.report.passed && timing.within_budget { 0 } else { 1 })
}

fn sample(args: &SampleArgs) -> Result<(), HarnessError> {
    let h = parse_hamiltonian(&args.hamiltonian)?;
    let grid = Grid::new(args.a, args.b, args.n)?;
    let data = EnsembleData::new(
        grid,
        args.entrance.clone(),
        args.exit.clone(),
        BoundaryCurve::Constant(args.top),
        BoundaryCurve::Constant(args.bottom),
    )?;
    let defaults = RunConfig::with_defaults(data.k(), grid.steps(), args.samples, args.seed);
    let burn_in = args.burn_in.unwrap_or(defaults.burn_in);
    let thinning = args.thinning.unwrap_or(defaults.thinning);
    if thinning == 0 {
        return Err(HarnessError::Config("thinning must be positive".into()));
    }
    let cfg = RunConfig { event_budget: burn_in + args.samples * thinning, seed: args.seed, burn_in, thinning };
    let mut chain = ChainState::maximal(&data)?;
    let mut states = Vec::with_capacity(args.samples as usize);
    run_chain(&mut chain, &h, &cfg, &mut seed_policy(args.seed, 0), |c| states.push(c.state().clone()))?;
    let table: Table = paths_table(&states);
    let csv = table.to_csv();
    match &args.out {
        Some(p) => std::fs::write(p, csv).map_err(|e| HarnessError::io(p, e)),
        None => std::io::stdout().write_all(csv.as_bytes()).map_err(|e| HarnessError::io("<stdout>", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from(["gibbs-lines", "run", "E3", "--seed", "9", "--out", "/tmp/x", "--workers", "2"]).unwrap();
        match cli.command {
            Command::Run(a) => {
                assert_eq!(a.experiment, "E3");
                assert_eq!(a.seed, Some(9));
                assert_eq!(a.output.workers, Some(2));
            }
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["gibbs-lines", "sample", "--entrance", "1,-1", "--bottom", "-2.5"]).unwrap();
        match cli.command {
            Command::Sample(a) => {
                assert_eq!(a.entrance, vec![1, -1]);
                assert_eq!(a.bottom, ExtReal::Finite(-2.5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_experiment_exits_two() {
        let cli = Cli::try_parse_from(["gibbs-lines", "run", "E9"]).unwrap();
        assert_eq!(dispatch(cli), 2);
    }
}
