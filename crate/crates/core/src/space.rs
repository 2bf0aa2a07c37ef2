//! Mixed parameter spaces and their unit-hypercube encoding.
//!
//! The solver never sees raw configurations. Continuous and integer
//! variables are min-max scaled to `[0, 1]`; each categorical variable
//! expands into one dummy coordinate per level. Coordinates are laid out in
//! variable declaration order, with a categorical block occupying
//! `levels.len()` consecutive coordinates in declared level order. Model files
//! address inputs by this index.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SpaceError;

/// Domain of a single variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    Continuous { min: f64, max: f64 },
    Integer { min: f64, max: f64 },
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self { name: name.into(), kind: VariableKind::Continuous { min, max } }
    }

    pub fn integer(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self { name: name.into(), kind: VariableKind::Integer { min, max } }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Categorical { levels: levels.into_iter().map(Into::into).collect() },
        }
    }

    /// Number of encoded coordinates this variable occupies.
    pub fn width(&self) -> usize {
        match &self.kind {
            VariableKind::Categorical { levels } => levels.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        match &self.kind {
            VariableKind::Continuous { min, max } | VariableKind::Integer { min, max } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(SpaceError::InvalidBounds { name: self.name.clone() });
                }
                if matches!(self.kind, VariableKind::Integer { .. }) && min.ceil() > max.floor() {
                    return Err(SpaceError::InvalidBounds { name: self.name.clone() });
                }
            }
            VariableKind::Categorical { levels } => {
                if levels.len() < 2 {
                    return Err(SpaceError::InvalidLevels { name: self.name.clone() });
                }
                let mut seen = HashSet::new();
                for level in levels {
                    if level.is_empty() || !seen.insert(level.as_str()) {
                        return Err(SpaceError::InvalidLevels { name: self.name.clone() });
                    }
                }
            }
        }
        Ok(())
    }
}

/// A raw value for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Level(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Level(v) => f.write_str(v),
        }
    }
}

/// Point in the raw parameter space, aligned with [`ParameterSpace::variables`].
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub values: Vec<Value>,
}

impl Configuration {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }
}

/// Point in the encoded unit hypercube `[0, 1]^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        if let Some(index) = coords.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(SpaceError::OutsideUnitCube { index, value: coords[index] });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Projects every coordinate into `[0, 1]`.
pub fn clamp(u: &[f64]) -> UnitVector {
    UnitVector(u.iter().map(|&c| clamp_coord(c)).collect())
}

#[inline]
pub(crate) fn clamp_coord(c: f64) -> f64 {
    if c.is_nan() {
        0.0
    } else {
        c.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    variables: Vec<VariableSpec>,
    offsets: Vec<usize>,
    encoded_dim: usize,
}

impl ParameterSpace {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self, SpaceError> {
        if variables.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut names = HashSet::new();
        for var in &variables {
            var.validate()?;
            if !names.insert(var.name.as_str()) {
                return Err(SpaceError::DuplicateName { name: var.name.clone() });
            }
        }
        let mut offsets = Vec::with_capacity(variables.len());
        let mut encoded_dim = 0;
        for var in &variables {
            offsets.push(encoded_dim);
            encoded_dim += var.width();
        }
        Ok(Self { variables, offsets, encoded_dim })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn encoded_dim(&self) -> usize {
        self.encoded_dim
    }

    /// First encoded coordinate of variable `index`.
    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// True when every variable is continuous, i.e. decode/encode is the identity.
    pub fn is_continuous(&self) -> bool {
        self.variables.iter().all(|v| matches!(v.kind, VariableKind::Continuous { .. }))
    }

    pub fn encode(&self, config: &Configuration) -> Result<UnitVector, SpaceError> {
        if config.values.len() != self.variables.len() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.variables.len(),
                actual: config.values.len(),
            });
        }
        let mut out = vec![0.0; self.encoded_dim];
        for ((var, value), &offset) in self.variables.iter().zip(&config.values).zip(&self.offsets) {
            let bad = || SpaceError::ValueOutOfDomain { name: var.name.clone(), value: value.to_string() };
            match &var.kind {
                VariableKind::Continuous { min, max } => {
                    let x = match value {
                        Value::Real(x) => *x,
                        Value::Int(x) => *x as f64,
                        Value::Level(_) => return Err(bad()),
                    };
                    if !(x >= *min && x <= *max) {
                        return Err(bad());
                    }
                    out[offset] = (x - min) / (max - min);
                }
                VariableKind::Integer { min, max } => {
                    let x = match value {
                        Value::Int(x) => *x as f64,
                        Value::Real(x) if x.fract() == 0.0 => *x,
                        _ => return Err(bad()),
                    };
                    if !(x >= *min && x <= *max) {
                        return Err(bad());
                    }
                    out[offset] = (x - min) / (max - min);
                }
                VariableKind::Categorical { levels } => {
                    let Value::Level(level) = value else { return Err(bad()) };
                    let pos = levels.iter().position(|l| l == level).ok_or_else(bad)?;
                    out[offset + pos] = 1.0;
                }
            }
        }
        Ok(UnitVector(out))
    }

    /// Maps a unit vector back to a raw configuration. Integers round half-up
    /// and are clamped; categoricals take the argmax dummy, earliest level on ties.
    pub fn decode(&self, u: &[f64]) -> Result<Configuration, SpaceError> {
        if u.len() != self.encoded_dim {
            return Err(SpaceError::DimensionMismatch { expected: self.encoded_dim, actual: u.len() });
        }
        let values = self
            .variables
            .iter()
            .zip(&self.offsets)
            .map(|(var, &offset)| match &var.kind {
                VariableKind::Continuous { min, max } => {
                    Value::Real(min + clamp_coord(u[offset]) * (max - min))
                }
                VariableKind::Integer { min, max } => {
                    let raw = min + clamp_coord(u[offset]) * (max - min);
                    let rounded = (raw + 0.5).floor().clamp(min.ceil(), max.floor());
                    Value::Int(rounded as i64)
                }
                VariableKind::Categorical { levels } => {
                    let block = &u[offset..offset + levels.len()];
                    let mut best = 0;
                    for (i, &c) in block.iter().enumerate().skip(1) {
                        if c > block[best] {
                            best = i;
                        }
                    }
                    Value::Level(levels[best].clone())
                }
            })
            .collect();
        Ok(Configuration { values })
    }

    /// Rounds the discrete coordinates of `u` to the configuration they decode to.
    /// Continuous coordinates are left untouched.
    pub fn snap(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.encoded_dim);
        let mut out: Vec<f64> = u.iter().map(|&c| clamp_coord(c)).collect();
        for (var, &offset) in self.variables.iter().zip(&self.offsets) {
            match &var.kind {
                VariableKind::Continuous { .. } => {}
                VariableKind::Integer { min, max } => {
                    let raw = min + out[offset] * (max - min);
                    let rounded = (raw + 0.5).floor().clamp(min.ceil(), max.floor());
                    out[offset] = (rounded - min) / (max - min);
                }
                VariableKind::Categorical { levels } => {
                    let block = &mut out[offset..offset + levels.len()];
                    let mut best = 0;
                    for i in 1..block.len() {
                        if block[i] > block[best] {
                            best = i;
                        }
                    }
                    block.iter_mut().enumerate().for_each(|(i, c)| *c = if i == best { 1.0 } else { 0.0 });
                }
            }
        }
        out
    }

    /// Removes the given categorical variables, fixing each to one level.
    ///
    /// Returns the reduced space and the embedding that lifts reduced unit
    /// vectors and configurations back into this space.
    pub fn restrict(&self, fixed: &[(usize, usize)]) -> Result<(ParameterSpace, Embedding), SpaceError> {
        let mut pinned = vec![None; self.variables.len()];
        for &(var, level) in fixed {
            let spec = self.variables.get(var).ok_or(SpaceError::DimensionMismatch {
                expected: self.variables.len(),
                actual: var + 1,
            })?;
            match &spec.kind {
                VariableKind::Categorical { levels } if level < levels.len() => pinned[var] = Some(level),
                _ => return Err(SpaceError::NotCategorical { name: spec.name.clone() }),
            }
        }
        let kept: Vec<VariableSpec> = self
            .variables
            .iter()
            .zip(&pinned)
            .filter(|(_, p)| p.is_none())
            .map(|(v, _)| v.clone())
            .collect();
        if kept.is_empty() {
            return Err(SpaceError::Empty);
        }
        let reduced = ParameterSpace::new(kept)?;

        let mut template = vec![0.0; self.encoded_dim];
        let mut source = Vec::with_capacity(reduced.encoded_dim);
        for (i, var) in self.variables.iter().enumerate() {
            let offset = self.offsets[i];
            match pinned[i] {
                Some(level) => template[offset + level] = 1.0,
                None => source.extend(offset..offset + var.width()),
            }
        }
        let fixed_values = pinned
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.map(|level| match &self.variables[i].kind {
                    VariableKind::Categorical { levels } => Value::Level(levels[level].clone()),
                    _ => unreachable!(),
                })
            })
            .collect();
        Ok((reduced, Embedding { template, source, fixed_values }))
    }
}

/// Lifts points of a restricted space back into the full space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    template: Vec<f64>,
    /// Full-space coordinate for each reduced coordinate.
    source: Vec<usize>,
    fixed_values: Vec<Option<Value>>,
}

impl Embedding {
    pub fn full_dim(&self) -> usize {
        self.template.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.source.len()
    }

    pub fn lift(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = self.template.clone();
        for (&dst, &c) in self.source.iter().zip(reduced) {
            full[dst] = c;
        }
        full
    }

    /// Picks the reduced components out of a full-space gradient.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        self.source.iter().map(|&i| full[i]).collect()
    }

    pub fn lift_config(&self, reduced: &Configuration) -> Configuration {
        let mut rest = reduced.values.iter().cloned();
        let values = self
            .fixed_values
            .iter()
            .map(|fixed| match fixed {
                Some(v) => v.clone(),
                None => rest.next().expect("reduced configuration too short"),
            })
            .collect();
        Configuration { values }
    }

    /// The fixed (variable index, level) assignment as values for display.
    pub fn fixed_values(&self) -> impl Iterator<Item = (usize, &Value)> {
        self.fixed_values.iter().enumerate().filter_map(|(i, v)| v.as_ref().map(|v| (i, v)))
    }
}
