//! Run configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys are dotted:
//!
//! ```text
//! problem.name = turning          # turning | linear_1d | disk_quadratic | random
//! problem.start = 0.15, 0.09
//! problem.geometry = 1.0          # turning only
//! problem.roughness_limit = 0.7   # turning only
//! problem.lipschitz = 7           # overrides L
//! problem.smoothness = 5          # overrides M
//! problem.dimension = 3           # random only
//! problem.constraints = 2         # random only
//! problem.seed = 0                # random only
//!
//! solver.mode = szo               # ezo | szo
//! solver.eta0 = 0.5
//! solver.mu = 5
//! solver.rounds = 2
//! solver.iterations = 200         # integer or `auto`
//! solver.barrier_lower_bound = 0  # used by `auto`
//! solver.delta = 0.01
//! solver.sigma = 0.01
//! solver.noise = gaussian         # gaussian | uniform
//! solver.seed = 1
//! solver.stop_threshold = 0
//! solver.ledger = batched         # batched | per_measurement
//! solver.max_measurements = 1e9
//! solver.max_auto_iterations = 1000000
//!
//! run.replicates = 20
//! run.jobs = 4
//! run.out = results/turning
//! run.ledger = false              # also write per-replicate ledger CSVs
//! run.check_constants = true      # sample-check L and M, warn on violation
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{LedgerMode, NoiseKind, ProblemSpec};
use crate::problems::{self, DomainError, RandomInstance, TurningModel};
use crate::solver::{IterationCap, Mode, SolverConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub name: String,
    pub start: Option<Vec<f64>>,
    pub geometry: Option<f64>,
    pub roughness_limit: Option<f64>,
    pub lipschitz: Option<f64>,
    pub smoothness: Option<f64>,
    pub dimension: usize,
    pub constraints: usize,
    pub seed: u64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            name: "turning".into(),
            start: None,
            geometry: None,
            roughness_limit: None,
            lipschitz: None,
            smoothness: None,
            dimension: 2,
            constraints: 2,
            seed: 0,
        }
    }
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec, crate::Error> {
        let mut problem = match self.name.as_str() {
            "turning" => {
                let mut model = TurningModel::default();
                if let Some(g) = self.geometry {
                    model.geometry = g;
                }
                if let Some(r) = self.roughness_limit {
                    model.roughness_limit = r;
                }
                if let Some(l) = self.lipschitz {
                    model.lipschitz = l;
                }
                if let Some(m) = self.smoothness {
                    model.smoothness = m;
                }
                model.problem()
            }
            "random" => RandomInstance {
                dimension: self.dimension,
                constraints: self.constraints,
                seed: self.seed,
                smoothness: self.smoothness.unwrap_or(1.0),
                lipschitz: self.lipschitz.unwrap_or(2.0),
            }
            .build()?,
            name => {
                let mut p = problems::by_name(name)
                    .ok_or_else(|| DomainError::UnknownProblem(name.into()))?;
                if let Some(l) = self.lipschitz {
                    p.lipschitz = l;
                }
                if let Some(m) = self.smoothness {
                    p.smoothness = m;
                }
                p
            }
        };
        if let Some(start) = &self.start {
            problem = problem.with_start(start.clone())?;
        }
        Ok(problem)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub replicates: usize,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub write_ledger: bool,
    pub check_constants: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            solver: SolverConfig::exact(0.1),
            replicates: 1,
            jobs: 1,
            out: None,
            write_ledger: false,
            check_constants: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

/// Integers may be written in float notation such as `1e9`.
fn parse_count(key: &str, value: &str) -> Result<u64, ConfigError> {
    if let Ok(v) = value.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = parse(key, value)?;
    if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: "expected a nonnegative integer".into(),
        })
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| parse::<f64>(key, v.trim()))
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let s = &mut self.solver;
        let p = &mut self.problem;
        match key {
            "problem.name" => p.name = value.into(),
            "problem.start" => p.start = Some(parse_list(key, value)?),
            "problem.geometry" => p.geometry = Some(parse(key, value)?),
            "problem.roughness_limit" => p.roughness_limit = Some(parse(key, value)?),
            "problem.lipschitz" => p.lipschitz = Some(parse(key, value)?),
            "problem.smoothness" => p.smoothness = Some(parse(key, value)?),
            "problem.dimension" => p.dimension = parse_count(key, value)? as usize,
            "problem.constraints" => p.constraints = parse_count(key, value)? as usize,
            "problem.seed" => p.seed = parse_count(key, value)?,
            "solver.mode" => {
                s.mode = value
                    .parse::<Mode>()
                    .map_err(|reason| ConfigError::InvalidValue {
                        key: key.into(),
                        value: value.into(),
                        reason,
                    })?
            }
            "solver.eta0" => s.eta0 = parse(key, value)?,
            "solver.mu" => s.mu = parse(key, value)?,
            "solver.rounds" => s.rounds = parse_count(key, value)? as usize,
            "solver.iterations" => {
                s.iterations = if value == "auto" {
                    let lb = match s.iterations {
                        IterationCap::Auto {
                            barrier_lower_bound,
                        } => barrier_lower_bound,
                        IterationCap::Fixed(_) => None,
                    };
                    IterationCap::Auto {
                        barrier_lower_bound: lb,
                    }
                } else {
                    IterationCap::Fixed(parse_count(key, value)? as usize)
                }
            }
            "solver.barrier_lower_bound" => {
                s.iterations = IterationCap::Auto {
                    barrier_lower_bound: Some(parse(key, value)?),
                }
            }
            "solver.delta" => s.delta = parse(key, value)?,
            "solver.sigma" => s.sigma = parse(key, value)?,
            "solver.noise" => {
                s.noise_kind = match value {
                    "gaussian" => NoiseKind::Gaussian,
                    "uniform" => NoiseKind::Uniform,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected gaussian or uniform".into(),
                        })
                    }
                }
            }
            "solver.seed" => s.seed = parse_count(key, value)?,
            "solver.stop_threshold" => s.stop_threshold = parse(key, value)?,
            "solver.ledger" => {
                s.ledger_mode = match value {
                    "batched" => LedgerMode::Batched,
                    "per_measurement" => LedgerMode::PerMeasurement,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected batched or per_measurement".into(),
                        })
                    }
                }
            }
            "solver.max_measurements" => s.max_measurements = Some(parse_count(key, value)?),
            "solver.max_auto_iterations" => {
                s.max_auto_iterations = parse_count(key, value)? as usize
            }
            "run.replicates" => self.replicates = parse_count(key, value)? as usize,
            "run.jobs" => self.jobs = parse_count(key, value)? as usize,
            "run.out" => self.out = Some(PathBuf::from(value)),
            "run.ledger" => self.write_ledger = parse_bool(key, value)?,
            "run.check_constants" => self.check_constants = parse_bool(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.solver
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.replicates == 0 {
            return Err(ConfigError::Invalid(
                "run.replicates must be at least 1".into(),
            ));
        }
        if self.jobs == 0 {
            return Err(ConfigError::Invalid("run.jobs must be at least 1".into()));
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut config = RunConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            config.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line, key },
                other => other,
            })?;
        }
        config.validate()?;
        Ok(config)
    }
}
