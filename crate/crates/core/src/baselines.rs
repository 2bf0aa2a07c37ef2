//! Comparison methods: weighted sum, an evenly spaced epsilon-constraint
//! grid, and NSGA-II. All return the same [`ParetoFrontier`] shape as the
//! Progressive Frontier drivers; their uncertain traces are empty.

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FrontierError, ProblemError, SolveError};
use crate::frontier::{
    build_pool, filter_stream, reference_points, utopia_nadir, Clock, FrontierPoint, FrontierSettings, Normalizer,
    ParetoFrontier, EPS_VOLUME,
};
use crate::mogd::{solve_co, solve_single_with, COProblem, COSolution};
use crate::models::{ObjectiveModel, ObjectiveSpec, SharedModel};
use crate::problem::Problem;
use crate::rng;
use crate::space::{clamp, UnitVector};

/// Non-negative weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, FrontierError> {
        if w.is_empty() {
            return Err(FrontierError::InvalidWeights("no weights given".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(FrontierError::InvalidWeights(format!("weights must be finite and >= 0: {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(FrontierError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(w))
    }

    /// Scales non-negative weights to sum 1.
    pub fn normalized(w: Vec<f64>) -> Result<Self, FrontierError> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(FrontierError::InvalidWeights(format!("weights must be finite and >= 0: {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) {
            return Err(FrontierError::InvalidWeights("weights are all zero".into()));
        }
        Ok(Self(w.into_iter().map(|x| x / sum).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = FrontierError;

    fn try_from(w: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Simplex lattice with step `1/n` and `k` components, about `m` points.
/// For `k = 2` this is exactly `(i/(m−1), 1 − i/(m−1))`.
pub fn ws_weights(k: usize, m: usize) -> Vec<WeightVector> {
    if k == 1 {
        return vec![WeightVector::uniform(1)];
    }
    if m <= 1 {
        return vec![WeightVector::uniform(k)];
    }
    let count = |n: usize| binomial(n + k - 1, k - 1);
    let mut n = 1;
    while count(n + 1) <= m as u128 {
        n += 1;
    }
    let mut out = Vec::new();
    let mut parts = vec![0usize; k];
    compositions(n, 0, &mut parts, &mut out);
    out.into_iter()
        .map(|p| {
            let w: Vec<f64> = p.iter().map(|&c| c as f64 / n as f64).collect();
            WeightVector::normalized(w).expect("lattice weights are valid")
        })
        .collect()
}

fn binomial(n: usize, r: usize) -> u128 {
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn compositions(left: usize, j: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if j + 1 == parts.len() {
        parts[j] = left;
        out.push(parts.clone());
        return;
    }
    for c in 0..=left {
        parts[j] = c;
        compositions(left - c, j + 1, parts, out);
    }
}

/// `Σ w_i (F_i − U_i) / (N_i − U_i)` over oriented objectives.
#[derive(Debug)]
struct WeightedModel {
    terms: Vec<(ObjectiveSpec, f64, f64)>,
    input_dim: usize,
}

impl ObjectiveModel for WeightedModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict(&self, u: &[f64]) -> f64 {
        self.terms.iter().map(|(o, shift, scale)| scale * (o.oriented_predict(u) - shift)).sum()
    }

    fn value_and_grad(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut value = 0.0;
        let mut grad = vec![0.0; u.len()];
        for (o, shift, scale) in &self.terms {
            if *scale == 0.0 {
                continue;
            }
            let (v, g) = o.oriented_value_and_grad(u).ok()?;
            value += scale * (v - shift);
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += scale * gi;
            }
        }
        Some((value, grad))
    }
}

struct Init {
    norm: Normalizer,
    utopia: Vec<f64>,
    nadir: Vec<f64>,
}

fn init(problem: &Problem, settings: &FrontierSettings) -> Result<Option<Init>, ProblemError> {
    problem.require_objectives(2)?;
    settings.solver.validate().map_err(ProblemError::Settings)?;
    let refs = reference_points(problem, &settings.solver)?;
    let found: Option<Vec<Vec<f64>>> = refs.into_iter().map(|r| r.map(|s| s.objectives)).collect();
    let Some(found) = found else { return Ok(None) };
    let (utopia, nadir) = utopia_nadir(&found)?;
    let scale = utopia.iter().zip(&nadir).map(|(u, n)| (n - u).max(EPS_VOLUME)).collect();
    Ok(Some(Init { norm: Normalizer::new(utopia.clone(), scale), utopia, nadir }))
}

/// Keeps points inside the problem's global objective bounds.
fn within_constraints(problem: &Problem, values: &[f64], tol: f64) -> bool {
    problem.oriented_constraints().iter().zip(values).all(|(b, &v)| match b {
        Some((lo, hi)) => {
            let slack = tol * (hi - lo);
            v >= lo - slack && v <= hi + slack
        }
        None => true,
    })
}

fn assemble(
    algo: &str,
    problem: &Problem,
    settings: &FrontierSettings,
    init: Init,
    probes: usize,
    stream: Vec<FrontierPoint>,
) -> ParetoFrontier {
    let stream: Vec<FrontierPoint> =
        stream.into_iter().filter(|p| within_constraints(problem, &p.objectives, settings.solver.tolerance)).collect();
    ParetoFrontier {
        algo: algo.into(),
        seed: settings.solver.seed,
        probes,
        points: filter_stream(&stream, &init.norm, settings.merge_tol),
        stream,
        utopia: init.utopia,
        nadir: init.nadir,
        uncertain_trace: Vec::new(),
    }
}

fn to_point(sol: COSolution, probe: usize, clock: &Clock, bounds: Option<Vec<(f64, f64)>>) -> FrontierPoint {
    crate::frontier::to_point(sol, probe, clock.ms(), bounds)
}

/// Weighted sum: one unconstrained solve of `Σ w_i F̂_i` per weight vector,
/// with objectives normalised by the Utopia–Nadir box of the reference points.
pub fn weighted_sum(
    problem: &Problem,
    weights: &[WeightVector],
    settings: &FrontierSettings,
) -> Result<ParetoFrontier, ProblemError> {
    if weights.is_empty() {
        return Err(FrontierError::InvalidWeights("no weight vectors".into()).into());
    }
    if let Some(w) = weights.iter().find(|w| w.len() != problem.k()) {
        return Err(FrontierError::DimensionMismatch(problem.k(), w.len()).into());
    }
    problem.check_gradients()?;
    build_pool(settings.threads).install(|| {
        let clock = Clock::new(settings.timing);
        let Some(init) = init(problem, settings)? else {
            return Ok(ParetoFrontier::empty("ws", settings.solver.seed, problem.k()));
        };
        let results: Vec<Result<COSolution, SolveError>> = weights
            .par_iter()
            .enumerate()
            .map(|(i, w)| {
                let terms = problem
                    .objectives()
                    .iter()
                    .enumerate()
                    .map(|(j, o)| (o.clone(), init.utopia[j], w.values()[j] / (init.nadir[j] - init.utopia[j]).max(EPS_VOLUME)))
                    .collect();
                let model: SharedModel = std::sync::Arc::new(WeightedModel { terms, input_dim: problem.dim() });
                let spec = ObjectiveSpec {
                    name: "weighted".into(),
                    direction: crate::models::Direction::Minimize,
                    model,
                    bounds: None,
                };
                solve_single_with(problem, &spec, &settings.solver.for_solve(i as u64))
            })
            .collect();
        let mut stream = Vec::with_capacity(results.len());
        for (i, r) in results.into_iter().enumerate() {
            stream.push(to_point(r?, i, &clock, None));
        }
        Ok(assemble("ws", problem, settings, init, weights.len(), stream))
    })
}

/// Upper-bound grid for the non-target objectives: `U_j + (N_j − U_j)·i/n`
/// for `i = 1..=n`, combinations in lexicographic order.
pub fn nc_bounds(utopia: &[f64], nadir: &[f64], target: usize, n: usize) -> Vec<Vec<(f64, f64)>> {
    let k = utopia.len();
    let m = (k - 1) as u32;
    let total = n.pow(m);
    let span = |j: usize| (nadir[j] - utopia[j]).max(EPS_VOLUME);
    (0..total)
        .map(|mut idx| {
            let mut levels = vec![0usize; k];
            for j in (0..k).rev().filter(|&j| j != target) {
                levels[j] = idx % n + 1;
                idx /= n;
            }
            (0..k)
                .map(|j| {
                    if j == target {
                        // the target only needs a normalisation range
                        let pad = 1e-6 * span(j);
                        (utopia[j] - pad, utopia[j] + span(j) + pad)
                    } else {
                        (utopia[j], utopia[j] + span(j) * levels[j] as f64 / n as f64)
                    }
                })
                .collect()
        })
        .collect()
}

/// Evenly spaced epsilon-constraint grid: `n^(k−1)` constrained solves of
/// the target objective.
pub fn nc_grid(problem: &Problem, n: usize, settings: &FrontierSettings) -> Result<ParetoFrontier, ProblemError> {
    if n < 2 {
        return Err(FrontierError::BadGrid.into());
    }
    if settings.target >= problem.k() {
        return Err(SolveError::BadTarget { target: settings.target, objectives: problem.k() }.into());
    }
    build_pool(settings.threads).install(|| {
        let clock = Clock::new(settings.timing);
        let Some(init) = init(problem, settings)? else {
            return Ok(ParetoFrontier::empty("nc", settings.solver.seed, problem.k()));
        };
        let grid = nc_bounds(&init.utopia, &init.nadir, settings.target, n);
        let results: Vec<Result<Option<COSolution>, ProblemError>> = grid
            .par_iter()
            .enumerate()
            .map(|(i, bounds)| {
                let co = COProblem::new(settings.target, bounds.clone())?;
                Ok(solve_co(problem, &co, &settings.solver.for_solve(i as u64))?)
            })
            .collect();
        let mut stream = Vec::new();
        for (i, (r, bounds)) in results.into_iter().zip(&grid).enumerate() {
            if let Some(sol) = r? {
                stream.push(to_point(sol, i, &clock, Some(bounds.clone())));
            }
        }
        Ok(assemble("nc", problem, settings, init, grid.len(), stream))
    })
}

/// Fixed NSGA-II operator parameters.
pub const BLEND_ALPHA: f64 = 0.5;
pub const MUTATION_SIGMA: f64 = 0.05;

#[derive(Debug, Clone)]
struct Individual {
    unit: Vec<f64>,
    objectives: Vec<f64>,
    born: usize,
    rank: usize,
    crowding: f64,
}

/// Fronts of the fast non-dominated sort, as index lists.
fn non_dominated_sort(pop: &[Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if crate::frontier::dominates_unchecked(&pop[i].objectives, &pop[j].objectives) {
                dominated_by[i].push(j);
            } else if crate::frontier::dominates_unchecked(&pop[j].objectives, &pop[i].objectives) {
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn assign_crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let k = pop[front[0]].objectives.len();
    let mut order = front.to_vec();
    for m in 0..k {
        order.sort_by(|&a, &b| pop[a].objectives[m].total_cmp(&pop[b].objectives[m]).then(a.cmp(&b)));
        let lo = pop[order[0]].objectives[m];
        let hi = pop[order[order.len() - 1]].objectives[m];
        pop[order[0]].crowding = f64::INFINITY;
        pop[order[order.len() - 1]].crowding = f64::INFINITY;
        if hi - lo <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let gap = pop[order[w + 1]].objectives[m] - pop[order[w - 1]].objectives[m];
            pop[order[w]].crowding += gap / (hi - lo);
        }
    }
}

/// Rank first, then larger crowding distance.
fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank.cmp(&b.rank).then_with(|| b.crowding.total_cmp(&a.crowding))
}

fn rank_population(pop: &mut [Individual]) {
    for (r, front) in non_dominated_sort(pop).iter().enumerate() {
        for &i in front {
            pop[i].rank = r;
        }
        assign_crowding(pop, front);
    }
}

/// NSGA-II over the encoded unit cube with blend crossover and Gaussian
/// mutation. Returns the non-dominated set of the final population.
pub fn evo_nsga2(
    problem: &Problem,
    population: usize,
    generations: usize,
    settings: &FrontierSettings,
) -> Result<ParetoFrontier, ProblemError> {
    problem.require_objectives(2)?;
    if population < 4 || population % 2 != 0 {
        return Err(ProblemError::Settings(format!("population must be even and >= 4, got {population}")));
    }
    let clock = Clock::new(settings.timing);
    let space = problem.space();
    let dim = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(rng::derive(settings.solver.seed, 0xe70));
    let mutation = Normal::new(0.0, MUTATION_SIGMA).expect("valid sigma");
    let rate = 1.0 / dim as f64;
    let mut born = 0usize;
    let make = |unit: Vec<f64>, born: &mut usize| {
        let unit = space.snap(&unit);
        let objectives = problem.evaluate(&unit);
        *born += 1;
        Individual { unit, objectives, born: *born - 1, rank: 0, crowding: 0.0 }
    };

    let mut pop: Vec<Individual> =
        (0..population).map(|_| make((0..dim).map(|_| rng.random::<f64>()).collect(), &mut born)).collect();
    rank_population(&mut pop);

    for _ in 0..generations {
        let mut offspring = Vec::with_capacity(population);
        while offspring.len() < population {
            let pick = |rng: &mut ChaCha8Rng| {
                let a = pop.choose(rng).expect("non-empty population");
                let b = pop.choose(rng).expect("non-empty population");
                if crowded_cmp(a, b) == Ordering::Greater { b } else { a }
            };
            let p1 = pick(&mut rng).unit.clone();
            let p2 = pick(&mut rng).unit.clone();
            let mut c1 = Vec::with_capacity(dim);
            let mut c2 = Vec::with_capacity(dim);
            for d in 0..dim {
                let (lo, hi) = (p1[d].min(p2[d]), p1[d].max(p2[d]));
                let ext = BLEND_ALPHA * (hi - lo);
                let mut child = || {
                    let mut x = lo - ext + rng.random::<f64>() * (hi - lo + 2.0 * ext);
                    if rng.random::<f64>() < rate {
                        x += mutation.sample(&mut rng);
                    }
                    x
                };
                let (x1, x2) = (child(), child());
                c1.push(x1);
                c2.push(x2);
            }
            offspring.push(make(clamp(&c1).into_inner(), &mut born));
            offspring.push(make(clamp(&c2).into_inner(), &mut born));
        }
        pop.extend(offspring);
        rank_population(&mut pop);
        pop.sort_by(|a, b| crowded_cmp(a, b).then(a.born.cmp(&b.born)));
        pop.truncate(population);
        rank_population(&mut pop);
    }

    pop.sort_by_key(|i| i.born);
    let stream: Vec<FrontierPoint> = pop
        .iter()
        .filter(|i| within_constraints(problem, &i.objectives, settings.solver.tolerance))
        .map(|i| FrontierPoint {
            objectives: i.objectives.clone(),
            config: space.decode(&i.unit).expect("encoded dimension"),
            unit: UnitVector::new(i.unit.clone()).expect("clamped"),
            probe: i.born,
            elapsed_ms: clock.ms(),
            bounds: None,
        })
        .collect();
    let all: Vec<Vec<f64>> = pop.iter().map(|i| i.objectives.clone()).collect();
    let (utopia, nadir) = utopia_nadir(&all)?;
    let scale = utopia.iter().zip(&nadir).map(|(u, n)| (n - u).max(EPS_VOLUME)).collect();
    let norm = Normalizer::new(utopia.clone(), scale);
    Ok(ParetoFrontier {
        algo: "evo".into(),
        seed: settings.solver.seed,
        probes: born,
        points: filter_stream(&stream, &norm, settings.merge_tol),
        stream,
        utopia,
        nadir,
        uncertain_trace: Vec::new(),
    })
}
