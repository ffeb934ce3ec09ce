//! Experiment harness for `gibbs-lines-core`: configuration, the E1–E7
//! experiment catalog, output formats and the command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod export;
pub mod report;

use std::path::Path;
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::HarnessError;
pub use experiments::{run_experiment, ExperimentOutput};
pub use report::{ExperimentReport, Timing};

/// Runs `cfg` on a pool of `workers` threads (all cores when `None`) and times it.
///
/// Results do not depend on the pool size.
pub fn execute(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<(ExperimentOutput, Timing), HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot build a pool of {workers:?} workers: {e}")))?;
    pool.install(|| {
        let start = Instant::now();
        let out = run_experiment(cfg)?;
        let timing = Timing::new(cfg.experiment, start.elapsed().as_secs_f64());
        Ok((out, timing))
    })
}

/// Writes `report.json`, `timing.json` and the data files into `dir`.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput, timing: &Timing) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let write = |name: &str, contents: &str| {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))
    };
    write("report.json", &out.report.to_json())?;
    let mut t = serde_json::to_string_pretty(timing).expect("timing serializes");
    t.push('\n');
    write("timing.json", &t)?;
    for a in &out.artifacts {
        write(&a.name, &a.contents)?;
    }
    Ok(())
}
