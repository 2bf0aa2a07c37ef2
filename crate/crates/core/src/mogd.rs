//! Multi-objective gradient descent.
//!
//! Solves one constrained problem "minimise `F_i` subject to
//! `C_j^L <= F_j <= C_j^U` for every `j`" over the unit hypercube. Objectives
//! are normalised against their bounds and combined into the penalty loss
//!
//! ```text
//! L(u) = 1{0 <= F̂_i <= 1} F̂_i²  +  Σ_j 1{F̂_j ∉ [0, 1]} ((F̂_j − ½)² + P)
//! ```
//!
//! which is minimised by multi-start projected gradient descent. Coordinates
//! that would leave `[0, 1]` are set to the boundary. The returned solution is
//! the best feasible iterate seen across all starts, re-checked by evaluating
//! the models at the decoded configuration.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::models::ObjectiveSpec;
use crate::problem::Problem;
use crate::rng;
use crate::space::{clamp_coord, Configuration, UnitVector};

/// Target objective plus per-objective bounds, all in the oriented frame.
#[derive(Debug, Clone, PartialEq)]
pub struct COProblem {
    target: usize,
    bounds: Vec<(f64, f64)>,
}

impl COProblem {
    pub fn new(target: usize, bounds: Vec<(f64, f64)>) -> Result<Self, SolveError> {
        if target >= bounds.len() {
            return Err(SolveError::BadTarget { target, objectives: bounds.len() });
        }
        for &(lower, upper) in &bounds {
            if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                return Err(SolveError::DegenerateBounds { lower, upper });
            }
        }
        Ok(Self { target, bounds })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// True when every value lies within its bounds widened by `tol` times the bound width.
    pub fn satisfied_by(&self, values: &[f64], tol: f64) -> bool {
        values.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| {
            let slack = tol * (hi - lo);
            v >= lo - slack && v <= hi + slack
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `u ← u − lr·g`
    Plain,
    /// `u ← u − lr·g/‖g‖`; `lr` is the step length in the unit cube.
    #[default]
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub multistart: usize,
    pub learning_rate: f64,
    /// Per-iteration geometric decay of the learning rate.
    pub lr_decay: f64,
    /// Extra learning-rate factor applied after a step that increased the loss.
    pub backtrack: f64,
    pub momentum: f64,
    pub step_rule: StepRule,
    pub max_iters: usize,
    pub patience: usize,
    pub penalty: f64,
    pub seed: u64,
    /// Constraint slack relative to each bound width.
    pub tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            multistart: 16,
            learning_rate: 0.05,
            lr_decay: 0.99,
            backtrack: 0.5,
            momentum: 0.0,
            step_rule: StepRule::Normalized,
            max_iters: 500,
            patience: 50,
            penalty: 1000.0,
            seed: 0,
            tolerance: 1e-6,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.multistart >= 1, "multistart must be >= 1"),
            (self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate must be > 0"),
            (self.lr_decay > 0.0 && self.lr_decay <= 1.0, "lr_decay must be in (0, 1]"),
            (self.backtrack > 0.0 && self.backtrack <= 1.0, "backtrack must be in (0, 1]"),
            ((0.0..1.0).contains(&self.momentum), "momentum must be in [0, 1)"),
            (self.max_iters >= 1, "max_iters must be >= 1"),
            (self.penalty > 1.0, "penalty must be > 1"),
            (self.tolerance > 0.0, "tolerance must be > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err((*msg).to_string()),
            None => Ok(()),
        }
    }

    /// Copy whose seed is derived from this one and `key`.
    pub fn for_solve(&self, key: u64) -> Self {
        Self { seed: rng::derive(self.seed, key), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct COSolution {
    pub config: Configuration,
    pub unit: UnitVector,
    /// Oriented objective values at `unit`, one per problem objective.
    pub objectives: Vec<f64>,
    pub loss: f64,
    pub feasible: bool,
}

pub fn normalize_objective(value: f64, bounds: (f64, f64)) -> Result<f64, SolveError> {
    let (lower, upper) = bounds;
    if !(lower < upper) {
        return Err(SolveError::DegenerateBounds { lower, upper });
    }
    Ok((value - lower) / (upper - lower))
}

/// The penalty loss over already-normalised objectives.
pub fn co_loss(fhat: &[f64], target: usize, penalty: f64) -> f64 {
    let t = fhat[target];
    let mut loss = if (0.0..=1.0).contains(&t) { t * t } else { 0.0 };
    for &f in fhat {
        if !(0.0..=1.0).contains(&f) {
            loss += (f - 0.5) * (f - 0.5) + penalty;
        }
    }
    loss
}

/// Gradient of the composed penalty loss with respect to `u`. Indicator
/// switches are treated as locally constant.
pub fn co_loss_grad(
    u: &[f64],
    co: &COProblem,
    objectives: &[ObjectiveSpec],
    penalty: f64,
) -> Result<Vec<f64>, SolveError> {
    let (_, grad) = constrained_loss(u, co, objectives, penalty, true, false)?;
    Ok(grad.expect("gradient requested"))
}

/// Loss and optionally its gradient. Objective gradients are only computed
/// for the terms that contribute. With `restore`, the target term is left out
/// of the gradient while any constraint is violated, so infeasible iterates
/// move toward the feasible region instead of settling between the pulls.
fn constrained_loss(
    u: &[f64],
    co: &COProblem,
    objectives: &[ObjectiveSpec],
    penalty: f64,
    want_grad: bool,
    restore: bool,
) -> Result<(f64, Option<Vec<f64>>), SolveError> {
    if objectives.len() != co.bounds.len() {
        return Err(SolveError::BoundsMismatch { objectives: objectives.len(), bounds: co.bounds.len() });
    }
    let fhat: Vec<f64> = objectives
        .iter()
        .zip(&co.bounds)
        .map(|(o, &(lo, hi))| (o.oriented_predict(u) - lo) / (hi - lo))
        .collect();
    let loss = co_loss(&fhat, co.target, penalty);
    if !want_grad {
        return Ok((loss, None));
    }
    let violated = restore && fhat.iter().any(|f| !(0.0..=1.0).contains(f));
    let mut grad = vec![0.0; u.len()];
    for (j, (obj, &(lo, hi))) in objectives.iter().zip(&co.bounds).enumerate() {
        let f = fhat[j];
        let inside = (0.0..=1.0).contains(&f);
        // dL/dF̂_j from the two terms of the loss
        let mut coeff = 0.0;
        if j == co.target && inside && !violated {
            coeff += 2.0 * f;
        }
        if !inside {
            coeff += 2.0 * (f - 0.5);
        }
        if coeff == 0.0 {
            continue;
        }
        let (_, g) = obj.oriented_value_and_grad(u)?;
        let scale = coeff / (hi - lo);
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += scale * gi;
        }
    }
    Ok((loss, Some(grad)))
}

enum Mode<'a> {
    Single(&'a ObjectiveSpec),
    Constrained { co: &'a COProblem, penalty: f64, tolerance: f64 },
}

impl Mode<'_> {
    fn loss_and_grad(&self, problem: &Problem, u: &[f64]) -> Result<(f64, Vec<f64>), SolveError> {
        match self {
            Mode::Single(obj) => obj.oriented_value_and_grad(u),
            Mode::Constrained { co, penalty, .. } => {
                let (loss, grad) = constrained_loss(u, co, problem.objectives(), *penalty, true, true)?;
                Ok((loss, grad.expect("gradient requested")))
            }
        }
    }

    /// Score of a candidate point (lower is better), `None` when infeasible.
    fn score(&self, problem: &Problem, u: &[f64]) -> Option<(f64, f64)> {
        match self {
            Mode::Single(obj) => {
                let v = obj.oriented_predict(u);
                Some((v, v))
            }
            Mode::Constrained { co, penalty, tolerance } => {
                let values = problem.evaluate(u);
                if !co.satisfied_by(&values, *tolerance) {
                    return None;
                }
                let fhat: Vec<f64> =
                    values.iter().zip(&co.bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect();
                Some((values[co.target], co_loss(&fhat, co.target, *penalty)))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    unit: Vec<f64>,
    score: f64,
    loss: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct StartOutcome {
    best: Option<Candidate>,
    /// Loss at every evaluated iterate, starting point first.
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) losses: Vec<f64>,
}

fn run_start(
    problem: &Problem,
    mode: &Mode<'_>,
    settings: &SolverSettings,
    start: usize,
) -> Result<StartOutcome, SolveError> {
    let dim = problem.dim();
    let space = problem.space();
    let discrete = !space.is_continuous();
    let mut rng = rng::start_rng(settings.seed, start);
    let mut u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();

    let mut best: Option<Candidate> = None;
    let mut consider = |u: &[f64]| {
        let snapped;
        let point = if discrete {
            snapped = space.snap(u);
            &snapped[..]
        } else {
            u
        };
        if let Some((score, loss)) = mode.score(problem, point) {
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Candidate { unit: point.to_vec(), score, loss });
            }
        }
    };

    let (mut loss, mut grad) = mode.loss_and_grad(problem, &u)?;
    consider(&u);
    let mut losses = vec![loss];
    let mut best_loss = loss;
    let mut stale = 0;
    let mut lr = settings.learning_rate;
    let mut velocity = vec![0.0; dim];

    for _ in 0..settings.max_iters {
        // Components pushing out of the cube are dropped: a coordinate on the
        // boundary stays there while the others keep moving.
        for (g, &x) in grad.iter_mut().zip(&u) {
            if (x <= 0.0 && *g > 0.0) || (x >= 1.0 && *g < 0.0) {
                *g = 0.0;
            }
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let scale = match settings.step_rule {
            StepRule::Plain => 1.0,
            StepRule::Normalized => 1.0 / norm,
        };
        for (v, g) in velocity.iter_mut().zip(&grad) {
            *v = settings.momentum * *v + scale * g;
        }
        let next: Vec<f64> = u.iter().zip(&velocity).map(|(x, v)| clamp_coord(x - lr * v)).collect();
        if next == u {
            break;
        }
        let (next_loss, next_grad) = mode.loss_and_grad(problem, &next)?;
        if next_loss > loss {
            lr *= settings.backtrack;
        }
        u = next;
        loss = next_loss;
        grad = next_grad;
        consider(&u);
        losses.push(loss);

        if loss < best_loss {
            best_loss = loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= settings.patience {
                break;
            }
        }
        lr *= settings.lr_decay;
        if lr < 1e-14 {
            break;
        }
    }
    Ok(StartOutcome { best, losses })
}

fn run_all(
    problem: &Problem,
    mode: &Mode<'_>,
    settings: &SolverSettings,
) -> Result<Vec<StartOutcome>, SolveError> {
    (0..settings.multistart)
        .into_par_iter()
        .map(|start| run_start(problem, mode, settings, start))
        .collect()
}

fn pick(outcomes: Vec<StartOutcome>) -> Option<Candidate> {
    // ordered reduction: ties keep the lowest start index
    outcomes.into_iter().filter_map(|o| o.best).fold(None, |acc: Option<Candidate>, c| match acc {
        Some(a) if a.score <= c.score => Some(a),
        _ => Some(c),
    })
}

fn finish(problem: &Problem, cand: Candidate, feasible: bool) -> COSolution {
    let config = problem.space().decode(&cand.unit).expect("solver keeps the encoded dimension");
    COSolution {
        objectives: problem.evaluate(&cand.unit),
        unit: UnitVector::new(cand.unit).expect("iterates stay in the unit cube"),
        config,
        loss: cand.loss,
        feasible,
    }
}

/// Minimises `problem.objectives()[co.target()]` subject to the bounds of
/// `co`. Returns `Ok(None)` when no start reached a feasible point.
pub fn solve_co(
    problem: &Problem,
    co: &COProblem,
    settings: &SolverSettings,
) -> Result<Option<COSolution>, SolveError> {
    if co.bounds.len() != problem.k() {
        return Err(SolveError::BoundsMismatch { objectives: problem.k(), bounds: co.bounds.len() });
    }
    let mode = Mode::Constrained { co, penalty: settings.penalty, tolerance: settings.tolerance };
    let outcomes = run_all(problem, &mode, settings)?;
    Ok(pick(outcomes).map(|c| finish(problem, c, true)))
}

/// Unconstrained minimisation of objective `target`.
pub fn solve_single(problem: &Problem, target: usize, settings: &SolverSettings) -> Result<COSolution, SolveError> {
    let objective = problem
        .objectives()
        .get(target)
        .ok_or(SolveError::BadTarget { target, objectives: problem.k() })?;
    solve_single_with(problem, objective, settings)
}

/// Unconstrained minimisation of an arbitrary scalar objective over the
/// problem's space; the solution reports the problem's own objectives.
pub fn solve_single_with(
    problem: &Problem,
    objective: &ObjectiveSpec,
    settings: &SolverSettings,
) -> Result<COSolution, SolveError> {
    let mode = Mode::Single(objective);
    let outcomes = run_all(problem, &mode, settings)?;
    let cand = pick(outcomes).expect("unconstrained starts always produce a candidate");
    Ok(finish(problem, cand, true))
}

#[cfg(test)]
pub(crate) fn trajectories(
    problem: &Problem,
    co: &COProblem,
    settings: &SolverSettings,
) -> Vec<StartOutcome> {
    let mode = Mode::Constrained { co, penalty: settings.penalty, tolerance: settings.tolerance };
    run_all(problem, &mode, settings).unwrap()
}
