//! Problem specification files.
//!
//! ```json
//! {
//!   "variables": [{"name": "x", "kind": "continuous", "min": 0, "max": 1}],
//!   "objectives": [
//!     {"name": "latency", "direction": "minimize", "model": "latency.json"},
//!     {"name": "cost", "model": {"kind": "analytic", "form": "affine", ...}, "bounds": [0, 10]}
//!   ],
//!   "enumerate": [],
//!   "solver": {"multistart": 16},
//!   "seed": 7
//! }
//! ```
//!
//! Model paths are resolved relative to the spec file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use progfront::mogd::SolverSettings;
use progfront::models::{Direction, LoadOptions, ModelFile, ObjectiveSpec};
use progfront::problem::Problem;
use progfront::space::{ParameterSpace, VariableSpec};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(ModelFile),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveEntry {
    pub name: String,
    #[serde(default)]
    pub direction: Direction,
    pub model: ModelRef,
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub variables: Vec<VariableSpec>,
    pub objectives: Vec<ObjectiveEntry>,
    #[serde(default)]
    pub enumerate: Vec<String>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Objective minimised by every frontier probe.
    #[serde(default)]
    pub target: usize,
    /// Smallest normalised rectangle side kept in the frontier queue.
    #[serde(default)]
    pub min_side: Option<f64>,
    /// Rectangles with every normalised side below this are not refined.
    #[serde(default)]
    pub resolution: Option<f64>,
}

pub struct Loaded {
    pub spec: ProblemSpec,
    pub problem: Problem,
}

pub fn load(path: &Path, opts: &LoadOptions) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let spec: ProblemSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let problem = build(&spec, base, opts).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(Loaded { spec, problem })
}

fn build(spec: &ProblemSpec, base: &Path, opts: &LoadOptions) -> Result<Problem, String> {
    spec.solver.validate().map_err(|e| format!("solver: {e}"))?;
    let space = ParameterSpace::new(spec.variables.clone()).map_err(|e| format!("variables: {e}"))?;
    let objectives = spec
        .objectives
        .iter()
        .map(|o| {
            let model = match &o.model {
                ModelRef::Path(p) => progfront::models::load_model_with(base.join(p), opts),
                ModelRef::Inline(file) => file.build(opts),
            }
            .map_err(|e| format!("objective `{}`: {e}", o.name))?;
            Ok(ObjectiveSpec { name: o.name.clone(), direction: o.direction, model, bounds: o.bounds })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let problem = Problem::new(space, objectives).map_err(|e| e.to_string())?;
    if spec.target >= problem.k() {
        return Err(format!("target {} out of range for {} objectives", spec.target, problem.k()));
    }
    problem.with_enumeration(&spec.enumerate).map_err(|e| format!("enumerate: {e}"))
}
