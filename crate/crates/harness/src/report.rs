//! Report and timing records written next to the data files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything an experiment decided, without wall-clock data, so identical
/// configs give byte-identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
    pub metrics: BTreeMap<String, serde_json::Value>,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment,
            seed: config.seed,
            passed: true,
            criteria: Vec::new(),
            metrics: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.criteria.push(CriterionResult { name: name.into(), passed, detail: detail.into() });
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("metrics are plain data");
        self.metrics.insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One `PASS`/`FAIL` line per criterion.
    pub fn summary_lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| format!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub experiment: ExperimentId,
    pub elapsed_seconds: f64,
    pub budget_seconds: f64,
    pub within_budget: bool,
}

impl Timing {
    pub fn new(experiment: ExperimentId, elapsed_seconds: f64) -> Self {
        let budget_seconds = experiment.time_budget();
        Self { experiment, elapsed_seconds, budget_seconds, within_budget: elapsed_seconds <= budget_seconds }
    }
}
