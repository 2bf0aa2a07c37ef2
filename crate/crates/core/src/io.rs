//! Frontier and recommendation files.
//!
//! Objective values in files are in model units; in memory they are
//! oriented (maximised objectives negated). `directions` carries what is
//! needed to convert back.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::frontier::{FrontierPoint, ParetoFrontier, UncertainSample};
use crate::models::Direction;
use crate::oracle::OracleFrontier;
use crate::problem::Problem;
use crate::space::{Configuration, ParameterSpace, UnitVector, Value};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid file: {0}")]
    Invalid(String),
}

pub type ConfigMap = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub objectives: Vec<f64>,
    pub config: ConfigMap,
    pub unit: Vec<f64>,
    pub probe: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierFile {
    pub algo: String,
    pub seed: u64,
    pub probes: usize,
    pub objective_names: Vec<String>,
    pub directions: Vec<Direction>,
    pub points: Vec<PointRecord>,
    pub utopia: Vec<f64>,
    pub nadir: Vec<f64>,
    pub uncertain_trace: Vec<UncertainSample>,
}

fn sign(d: Direction) -> f64 {
    match d {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    }
}

fn flip(values: &[f64], dirs: &[Direction]) -> Vec<f64> {
    values.iter().zip(dirs).map(|(v, d)| sign(*d) * v).collect()
}

/// Named configuration map in variable order.
pub fn config_map(space: &ParameterSpace, config: &Configuration) -> ConfigMap {
    space
        .variables()
        .iter()
        .zip(&config.values)
        .map(|(var, v)| (var.name.clone(), serde_json::to_value(v).expect("values serialize")))
        .collect()
}

fn config_from_map(map: &ConfigMap) -> Result<Configuration, IoError> {
    map.values()
        .map(|v| serde_json::from_value::<Value>(v.clone()).map_err(|e| IoError::Invalid(format!("config value: {e}"))))
        .collect::<Result<_, _>>()
        .map(Configuration::new)
}

impl FrontierFile {
    pub fn from_frontier(frontier: &ParetoFrontier, problem: &Problem) -> Self {
        let dirs: Vec<Direction> = problem.objectives().iter().map(|o| o.direction).collect();
        Self {
            algo: frontier.algo.clone(),
            seed: frontier.seed,
            probes: frontier.probes,
            objective_names: problem.objectives().iter().map(|o| o.name.clone()).collect(),
            directions: dirs.clone(),
            points: frontier
                .points
                .iter()
                .map(|p| PointRecord {
                    objectives: flip(&p.objectives, &dirs),
                    config: config_map(problem.space(), &p.config),
                    unit: p.unit.coords().to_vec(),
                    probe: p.probe,
                    elapsed_ms: p.elapsed_ms,
                })
                .collect(),
            utopia: flip(&frontier.utopia, &dirs),
            nadir: flip(&frontier.nadir, &dirs),
            uncertain_trace: frontier.uncertain_trace.clone(),
        }
    }

    pub fn from_oracle(oracle: &OracleFrontier, problem: &Problem) -> Self {
        let k = problem.k();
        let mut frontier = ParetoFrontier::empty("oracle", 0, k);
        frontier.probes = oracle.points.len();
        frontier.points = oracle
            .points
            .iter()
            .enumerate()
            .map(|(i, (f, u))| FrontierPoint {
                objectives: f.clone(),
                config: problem.space().decode(u.coords()).expect("grid point dimension"),
                unit: u.clone(),
                probe: i,
                elapsed_ms: 0.0,
                bounds: None,
            })
            .collect();
        if let Ok((u, n)) = crate::frontier::utopia_nadir(&oracle.objective_points()) {
            frontier.utopia = u;
            frontier.nadir = n;
        }
        Self::from_frontier(&frontier, problem)
    }

    /// Oriented in-memory frontier; its stream is the stored point list.
    pub fn to_frontier(&self) -> Result<ParetoFrontier, IoError> {
        let k = self.directions.len();
        let check = |what: &str, len: usize| {
            if len == k {
                Ok(())
            } else {
                Err(IoError::Invalid(format!("{what} has {len} entries, expected {k}")))
            }
        };
        check("utopia", self.utopia.len())?;
        check("nadir", self.nadir.len())?;
        let mut points = Vec::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            check(&format!("points[{i}].objectives"), p.objectives.len())?;
            points.push(FrontierPoint {
                objectives: flip(&p.objectives, &self.directions),
                config: config_from_map(&p.config)?,
                unit: UnitVector::new(p.unit.clone()).map_err(|e| IoError::Invalid(format!("points[{i}].unit: {e}")))?,
                probe: p.probe,
                elapsed_ms: p.elapsed_ms,
                bounds: None,
            });
        }
        Ok(ParetoFrontier {
            algo: self.algo.clone(),
            seed: self.seed,
            probes: self.probes,
            stream: points.clone(),
            points,
            utopia: flip(&self.utopia, &self.directions),
            nadir: flip(&self.nadir, &self.directions),
            uncertain_trace: self.uncertain_trace.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationFile {
    /// Objective values in model units.
    pub point: Vec<f64>,
    pub config: ConfigMap,
    pub strategy: String,
    pub weights: Vec<f64>,
    pub probe: usize,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, to_json(value)).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Parse { path: path.display().to_string(), source })
}
