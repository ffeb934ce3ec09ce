//! Experiment configuration.
//!
//! A config file is a TOML table. Every key is optional: the file is merged
//! over the defaults of the chosen experiment and the resolved config is
//! echoed into the report.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use gibbs_lines_core::lattice::{BoundaryCurve, EnsembleData, Grid};
use gibbs_lines_core::{ExtReal, Hamiltonian};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    /// The λ-exponential checker on catalog Hamiltonians.
    #[serde(rename = "LAMBDA")]
    Lambda,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::E1,
        ExperimentId::E2,
        ExperimentId::E3,
        ExperimentId::E4,
        ExperimentId::E5,
        ExperimentId::E6,
        ExperimentId::E7,
        ExperimentId::Lambda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::E1 => "E1",
            ExperimentId::E2 => "E2",
            ExperimentId::E3 => "E3",
            ExperimentId::E4 => "E4",
            ExperimentId::E5 => "E5",
            ExperimentId::E6 => "E6",
            ExperimentId::E7 => "E7",
            ExperimentId::Lambda => "LAMBDA",
        }
    }

    /// Wall-clock budget in seconds, checked outside the report.
    pub fn time_budget(self) -> f64 {
        match self {
            ExperimentId::E1 | ExperimentId::Lambda => 1.0,
            ExperimentId::E2 => 30.0,
            ExperimentId::E3 => 60.0,
            // E4a 60 s + E4b 2 min.
            ExperimentId::E4 => 180.0,
            ExperimentId::E5 => 120.0,
            ExperimentId::E6 => 600.0,
            // E7a 5 min + E7b 60 s.
            ExperimentId::E7 => 360.0,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}' (expected E1..E7 or LAMBDA)")))
    }
}

/// A boundary curve in a config: one extended real, or one value per grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    Constant(ExtReal),
    Values(Vec<ExtReal>),
}

impl BoundarySpec {
    pub fn to_curve(&self) -> BoundaryCurve {
        match self {
            BoundarySpec::Constant(v) => BoundaryCurve::Constant(*v),
            BoundarySpec::Values(v) => BoundaryCurve::Values(v.clone()),
        }
    }
}

/// Lattice ensemble: entrance/exit indices in units of `dx`, top and bottom boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSection {
    pub entrance: Vec<i64>,
    pub exit: Vec<i64>,
    pub top: BoundarySpec,
    pub bottom: BoundarySpec,
}

impl EnsembleSection {
    pub fn data(&self, grid: Grid) -> Result<EnsembleData, HarnessError> {
        Ok(EnsembleData::new(grid, self.entrance.clone(), self.exit.clone(), self.top.to_curve(), self.bottom.to_curve())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySection {
    pub a: f64,
    pub b: f64,
    pub n: u32,
}

impl GeometrySection {
    pub fn grid(&self) -> Result<Grid, HarnessError> {
        Ok(Grid::new(self.a, self.b, self.n)?)
    }
}

/// Exact-law experiments (E1) and the MCMC sampler (E2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSection {
    pub geometry: GeometrySection,
    pub ensemble: EnsembleSection,
    /// Expected number of states, if the instance pins it.
    pub expected_states: Option<u64>,
    pub state_cap: u64,
    pub stationarity_tol: f64,
    pub detailed_balance_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSection {
    pub samples: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub tv_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSection {
    pub geometry: GeometrySection,
    pub lower: EnsembleSection,
    pub upper: EnsembleSection,
    pub events: u64,
    pub allow_nonconvex: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeMaxSection {
    pub t: f64,
    pub a: f64,
    pub beta: f64,
    pub grid_points: usize,
    pub samples: u64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoTimeCase {
    pub p: f64,
    pub q: f64,
    pub x: f64,
    pub y: f64,
    pub c: f64,
    pub d: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeSection {
    pub max: BridgeMaxSection,
    pub two_time: Vec<TwoTimeCase>,
    pub two_time_samples: u64,
    pub z_tol: f64,
    /// Points at which the Mills-ratio bounds are evaluated.
    pub mills_points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSection {
    pub j_min: u32,
    pub j_max: u32,
    pub samples: u64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSection {
    pub t1: f64,
    pub z: u32,
    pub w: Vec<f64>,
    pub samples: u64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSection {
    pub lambda: f64,
    pub m: f64,
    pub n: Vec<f64>,
    pub samples: u64,
    pub weak_n: u32,
    pub weak_samples: u64,
    pub ks_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSection {
    pub exact: String,
    pub asymptotic: String,
    pub m: f64,
    pub y: Vec<f64>,
    pub grid_points: usize,
    pub exact_tol: f64,
    pub asymptotic_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub hamiltonian: String,
    pub seed: u64,
    pub lattice: LatticeSection,
    pub chain: ChainSection,
    pub coupling: CouplingSection,
    pub bridge: BridgeSection,
    pub normalization: NormalizationSection,
    pub ratio: RatioSection,
    pub tail: TailSection,
    pub lambda: LambdaSection,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId) -> Self {
        let case = |p, q, x, y, c, d, r| TwoTimeCase { p, q, x, y, c, d, r };
        Self {
            experiment,
            hamiltonian: "exponential:1.0".into(),
            seed: 20_240_601,
            lattice: LatticeSection {
                geometry: GeometrySection { a: 0.0, b: 1.0, n: 2 },
                ensemble: EnsembleSection {
                    entrance: vec![0],
                    exit: vec![0],
                    top: BoundarySpec::Constant(ExtReal::PosInf),
                    bottom: BoundarySpec::Constant(ExtReal::Finite(-2.0)),
                },
                expected_states: Some(19),
                state_cap: 1_000_000,
                stationarity_tol: 1e-10,
                detailed_balance_tol: 1e-12,
            },
            chain: ChainSection { samples: 100_000, burn_in: 2_000, thinning: 12, tv_tol: 0.02 },
            coupling: CouplingSection {
                geometry: GeometrySection { a: 0.0, b: 1.0, n: 4 },
                lower: EnsembleSection {
                    entrance: vec![0, -2],
                    exit: vec![1, -1],
                    top: BoundarySpec::Constant(ExtReal::Finite(2.0)),
                    bottom: BoundarySpec::Constant(ExtReal::Finite(-3.0)),
                },
                upper: EnsembleSection {
                    entrance: vec![1, 0],
                    exit: vec![2, 0],
                    top: BoundarySpec::Constant(ExtReal::PosInf),
                    bottom: BoundarySpec::Constant(ExtReal::Finite(-2.5)),
                },
                events: 1_000_000,
                allow_nonconvex: false,
            },
            bridge: BridgeSection {
                max: BridgeMaxSection { t: 1.0, a: 0.0, beta: 1.0, grid_points: 4096, samples: 100_000, rel_tol: 0.05 },
                two_time: vec![
                    case(0.0, 1.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 0.0),
                    case(0.0, 2.0, 1.0, -0.5, 0.4, 1.1, 0.3),
                    case(-1.0, 1.0, 0.0, 0.0, -0.9, 0.95, -0.4),
                    case(0.0, 1.0, 2.0, 2.0, 0.2, 0.8, 1.0),
                    case(0.0, 3.0, -1.0, 1.0, 1.0, 2.5, -0.5),
                ],
                two_time_samples: 1_000_000,
                z_tol: 3.0,
                mills_points: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0],
            },
            normalization: NormalizationSection { j_min: 2, j_max: 10, samples: 10_000, floor: 0.99 },
            ratio: RatioSection { t1: 0.0, z: 2, w: vec![1e2, 1e3, 1e4], samples: 100_000, rel_tol: 0.05 },
            tail: TailSection {
                lambda: 1.0,
                m: 1.0,
                n: vec![8.0, 16.0, 32.0, 64.0],
                samples: 10_000,
                weak_n: 16,
                weak_samples: 100_000,
                ks_tol: 0.02,
            },
            lambda: LambdaSection {
                exact: "exponential:1.0".into(),
                asymptotic: "exp_plus_square:1.0".into(),
                m: 1.0,
                y: vec![10.0, 20.0, 30.0],
                grid_points: 2001,
                exact_tol: 1e-12,
                asymptotic_tol: 1e-3,
            },
        }
    }

    /// Merges `text` (TOML) over the defaults. `experiment` wins over the file's own key.
    pub fn from_toml_str(text: &str, experiment: Option<ExperimentId>) -> Result<Self, HarnessError> {
        let file: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(format!("invalid TOML: {e}")))?;
        let id = match experiment {
            Some(id) => id,
            None => match file.get("experiment") {
                Some(toml::Value::String(s)) => s.parse()?,
                Some(other) => return Err(HarnessError::Config(format!("'experiment' must be a string, got {other}"))),
                None => return Err(HarnessError::Config("no experiment given in the config or on the command line".into())),
            },
        };
        let mut base = match toml::Value::try_from(Self::defaults(id)) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("defaults serialize to a TOML table"),
        };
        merge(&mut base, file);
        base.insert("experiment".into(), toml::Value::String(id.as_str().into()));
        let cfg: Self = toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, experiment: Option<ExperimentId>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, experiment)
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian, HarnessError> {
        parse_hamiltonian(&self.hamiltonian)
    }

    /// Checks what can be checked without running anything.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.hamiltonian()?;
        parse_hamiltonian(&self.lambda.exact)?;
        parse_hamiltonian(&self.lambda.asymptotic)?;
        let positive = [
            ("chain.samples", self.chain.samples),
            ("chain.thinning", self.chain.thinning),
            ("coupling.events", self.coupling.events),
            ("bridge.max.samples", self.bridge.max.samples),
            ("bridge.two_time_samples", self.bridge.two_time_samples),
            ("normalization.samples", self.normalization.samples),
            ("ratio.samples", self.ratio.samples),
            ("tail.samples", self.tail.samples),
            ("tail.weak_samples", self.tail.weak_samples),
            ("lattice.state_cap", self.lattice.state_cap),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(HarnessError::Config(format!("{name} must be positive")));
            }
        }
        if self.bridge.max.grid_points < 2 {
            return Err(HarnessError::Config("bridge.max.grid_points must be at least 2".into()));
        }
        if self.normalization.j_min > self.normalization.j_max {
            return Err(HarnessError::Config("normalization.j_min exceeds j_max".into()));
        }
        if self.ratio.w.is_empty() || self.tail.n.is_empty() || self.lambda.y.is_empty() {
            return Err(HarnessError::Config("ratio.w, tail.n and lambda.y must be non-empty".into()));
        }
        Ok(())
    }
}

pub fn parse_hamiltonian(name: &str) -> Result<Hamiltonian, HarnessError> {
    name.parse::<Hamiltonian>().map_err(|e| HarnessError::Config(format!("hamiltonian '{name}': {e}")))
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
