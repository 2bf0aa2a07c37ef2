//! A multi-objective problem: a parameter space plus oriented objectives.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{ProblemError, SolveError};
use crate::models::{ObjectiveModel, ObjectiveSpec, SharedModel};
use crate::space::{Embedding, ParameterSpace, VariableKind};

#[derive(Debug, Clone)]
pub struct Problem {
    space: ParameterSpace,
    objectives: Vec<ObjectiveSpec>,
    /// Categorical variables whose levels are enumerated into separate sub-problems.
    enumerated: Vec<usize>,
}

impl Problem {
    pub fn new(space: ParameterSpace, objectives: Vec<ObjectiveSpec>) -> Result<Self, ProblemError> {
        if objectives.is_empty() {
            return Err(ProblemError::TooFewObjectives { needed: 1, actual: 0 });
        }
        let mut names = HashSet::new();
        for obj in &objectives {
            if !names.insert(obj.name.as_str()) {
                return Err(ProblemError::DuplicateObjective { name: obj.name.clone() });
            }
            if obj.model.input_dim() != space.encoded_dim() {
                return Err(ProblemError::InputDim {
                    name: obj.name.clone(),
                    expected: obj.model.input_dim(),
                    actual: space.encoded_dim(),
                });
            }
            if let Some((lo, hi)) = obj.bounds {
                if !(lo < hi) {
                    return Err(ProblemError::BadBounds { name: obj.name.clone() });
                }
            }
        }
        Ok(Self { space, objectives, enumerated: Vec::new() })
    }

    /// Marks categorical variables for level enumeration.
    pub fn with_enumeration<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self, ProblemError> {
        let mut enumerated = Vec::new();
        for name in names {
            let name = name.as_ref();
            let idx = self
                .space
                .index_of(name)
                .ok_or_else(|| ProblemError::UnknownVariable { name: name.to_string() })?;
            if !matches!(self.space.variables()[idx].kind, VariableKind::Categorical { .. }) {
                return Err(ProblemError::NotCategorical { name: name.to_string() });
            }
            if !enumerated.contains(&idx) {
                enumerated.push(idx);
            }
        }
        enumerated.sort_unstable();
        self.enumerated = enumerated;
        Ok(self)
    }

    pub fn require_objectives(&self, needed: usize) -> Result<(), ProblemError> {
        if self.k() < needed {
            return Err(ProblemError::TooFewObjectives { needed, actual: self.k() });
        }
        Ok(())
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn objectives(&self) -> &[ObjectiveSpec] {
        &self.objectives
    }

    pub fn k(&self) -> usize {
        self.objectives.len()
    }

    pub fn dim(&self) -> usize {
        self.space.encoded_dim()
    }

    pub fn enumerated(&self) -> &[usize] {
        &self.enumerated
    }

    /// Oriented objective values at `u`.
    pub fn evaluate(&self, u: &[f64]) -> Vec<f64> {
        self.objectives.iter().map(|o| o.oriented_predict(u)).collect()
    }

    pub fn has_constraints(&self) -> bool {
        self.objectives.iter().any(|o| o.bounds.is_some())
    }

    /// Oriented `[F^L, F^U]` per objective, `None` where unconstrained.
    pub fn oriented_constraints(&self) -> Vec<Option<(f64, f64)>> {
        self.objectives.iter().map(ObjectiveSpec::oriented_bounds).collect()
    }

    pub fn check_gradients(&self) -> Result<(), SolveError> {
        let probe = vec![0.5; self.dim()];
        for obj in &self.objectives {
            if obj.model.value_and_grad(&probe).is_none() {
                return Err(SolveError::MissingGradient { name: obj.name.clone() });
            }
        }
        Ok(())
    }

    /// Same objectives seen through a restricted space.
    pub(crate) fn embedded(&self, space: ParameterSpace, embedding: Arc<Embedding>) -> Problem {
        let objectives = self
            .objectives
            .iter()
            .map(|o| ObjectiveSpec {
                name: o.name.clone(),
                direction: o.direction,
                model: Arc::new(EmbeddedModel { inner: o.model.clone(), embedding: embedding.clone() }) as SharedModel,
                bounds: o.bounds,
            })
            .collect();
        Problem { space, objectives, enumerated: Vec::new() }
    }
}

/// A full-space model evaluated on a restricted space with some coordinates pinned.
#[derive(Debug, Clone)]
pub struct EmbeddedModel {
    inner: SharedModel,
    embedding: Arc<Embedding>,
}

impl ObjectiveModel for EmbeddedModel {
    fn input_dim(&self) -> usize {
        self.embedding.reduced_dim()
    }

    fn predict(&self, u: &[f64]) -> f64 {
        self.inner.predict(&self.embedding.lift(u))
    }

    fn value_and_grad(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (v, g) = self.inner.value_and_grad(&self.embedding.lift(u))?;
        Some((v, self.embedding.project(&g)))
    }

    fn std(&self, u: &[f64]) -> Option<f64> {
        self.inner.std(&self.embedding.lift(u))
    }

    fn std_grad(&self, u: &[f64]) -> Option<Vec<f64>> {
        self.inner.std_grad(&self.embedding.lift(u)).map(|g| self.embedding.project(&g))
    }
}
