//! Picking one configuration from a frontier.
//!
//! Points are normalised by the frontier's Utopia and Nadir points, so the
//! Utopia is the origin; Utopia Nearest returns the point closest to it and
//! Weighted Utopia Nearest scales each coordinate by a weight first.

use serde::{Deserialize, Serialize};

pub use crate::baselines::WeightVector;
use crate::error::FrontierError;
use crate::frontier::{FrontierPoint, ParetoFrontier};

/// Distances closer than this are ties, resolved by probe index.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadCategory {
    Low,
    Medium,
    High,
}

impl std::str::FromStr for WorkloadCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            other => Err(format!("unknown workload category `{other}` (expected low, medium or high)")),
        }
    }
}

/// Internal (latency, cost) weights per workload category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoryTable {
    pub low: WeightVector,
    pub medium: WeightVector,
    pub high: WeightVector,
}

impl Default for CategoryTable {
    fn default() -> Self {
        let w = |a: f64, b: f64| WeightVector::new(vec![a, b]).expect("valid table weights");
        Self { low: w(0.2, 0.8), medium: w(0.5, 0.5), high: w(0.8, 0.2) }
    }
}

impl CategoryTable {
    pub fn get(&self, category: WorkloadCategory) -> &WeightVector {
        match category {
            WorkloadCategory::Low => &self.low,
            WorkloadCategory::Medium => &self.medium,
            WorkloadCategory::High => &self.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preference {
    pub external: WeightVector,
    /// Uniform when absent and no category is given.
    pub internal: Option<WeightVector>,
    pub category: Option<WorkloadCategory>,
}

impl Preference {
    pub fn external(external: WeightVector) -> Self {
        Self { external, internal: None, category: None }
    }
}

/// Elementwise product of internal and external weights, renormalised.
/// A category overrides `internal` with the table entry.
pub fn compose_weights(pref: &Preference, table: &CategoryTable) -> Result<WeightVector, FrontierError> {
    let k = pref.external.len();
    let internal = match (pref.category, &pref.internal) {
        (Some(c), _) => table.get(c).clone(),
        (None, Some(w)) => w.clone(),
        (None, None) => WeightVector::uniform(k),
    };
    if internal.len() != k {
        return Err(FrontierError::DimensionMismatch(k, internal.len()));
    }
    let product = internal.values().iter().zip(pref.external.values()).map(|(a, b)| a * b).collect();
    WeightVector::normalized(product)
}

/// Points mapped to `(f_j − U_j) / (N_j − U_j)`; degenerate dimensions map to 0.
pub fn normalize_frontier(frontier: &ParetoFrontier) -> Result<Vec<Vec<f64>>, FrontierError> {
    if frontier.points.is_empty() {
        return Err(FrontierError::Empty);
    }
    Ok(frontier.points.iter().map(|p| normalize_point(&p.objectives, &frontier.utopia, &frontier.nadir)).collect())
}

pub(crate) fn normalize_point(values: &[f64], utopia: &[f64], nadir: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(utopia)
        .zip(nadir)
        .map(|((v, u), n)| if n - u > 0.0 { (v - u) / (n - u) } else { 0.0 })
        .collect()
}

fn argmin_by(frontier: &ParetoFrontier, score: impl Fn(&[f64]) -> f64) -> Result<&FrontierPoint, FrontierError> {
    let normalized = normalize_frontier(frontier)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in normalized.iter().enumerate() {
        let d = score(f);
        let better = match best {
            None => true,
            Some((b, bd)) => {
                d < bd - TIE_TOL || ((d - bd).abs() <= TIE_TOL && frontier.points[i].probe < frontier.points[b].probe)
            }
        };
        if better {
            best = Some((i, d));
        }
    }
    Ok(&frontier.points[best.expect("non-empty").0])
}

/// Point nearest to the Utopia in normalised coordinates.
pub fn utopia_nearest(frontier: &ParetoFrontier) -> Result<&FrontierPoint, FrontierError> {
    argmin_by(frontier, |f| f.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Point minimising `√Σ (w_j f̂_j)²`.
pub fn weighted_utopia_nearest<'a>(
    frontier: &'a ParetoFrontier,
    weights: &WeightVector,
) -> Result<&'a FrontierPoint, FrontierError> {
    let k = frontier.utopia.len();
    if weights.len() != k {
        return Err(FrontierError::DimensionMismatch(k, weights.len()));
    }
    let w = weights.values();
    argmin_by(frontier, |f| f.iter().zip(w).map(|(x, w)| (w * x).powi(2)).sum::<f64>().sqrt())
}
