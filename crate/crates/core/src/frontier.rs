//! Progressive Frontier drivers.
//!
//! The objective space between the Utopia and Nadir points is explored as a
//! priority queue of hyperrectangles ordered by volume. Each step pops the
//! largest rectangle and solves its middle-point probe: minimise the target
//! objective inside the lower half-box `[U, (U + N) / 2]`. A found point `f`
//! splits the rectangle into `2^k` boxes around `f`; the box it dominates is
//! discarded (and, for two objectives, the box that would dominate it). An
//! empty probe proves the lower half-box empty; the rectangle is then split
//! around its geometric centre and only that box is discarded.
//!
//! Volumes are measured in coordinates normalised by the initial rectangle,
//! so the initial volume is 1 and the live volume is the uncertain fraction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FrontierError, ProblemError};
use crate::mogd::{solve_co, solve_single, solve_single_with, COProblem, COSolution, SolverSettings};
use crate::models::ObjectiveSpec;
use crate::problem::Problem;
use crate::space::{Configuration, UnitVector, VariableKind};

/// Width given to a degenerate objective dimension, and the default minimum
/// normalised side for re-queued rectangles.
pub const EPS_VOLUME: f64 = 1e-9;

/// Seed keys for the extra solves used to size unconstrained objectives.
const RANGE_SWEEP_KEY: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint(pub Vec<f64>);

impl ObjectivePoint {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, FrontierError> {
    if a.len() != b.len() {
        return Err(FrontierError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(dominates_unchecked(a, b))
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Indices of the non-dominated points, in input order. Exact duplicates
/// keep their first occurrence.
pub fn pareto_filter<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = points[i].as_ref();
            points.iter().enumerate().all(|(j, q)| {
                let q = q.as_ref();
                !(dominates_unchecked(q, p) || (j < i && q == p))
            })
        })
        .collect()
}

/// Affine map from raw objective values to coordinates normalised by the
/// initial rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    origin: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    pub fn new(origin: Vec<f64>, scale: Vec<f64>) -> Self {
        debug_assert!(scale.iter().all(|&s| s > 0.0));
        Self { origin, scale }
    }

    pub fn identity(k: usize) -> Self {
        Self::new(vec![0.0; k], vec![1.0; k])
    }

    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        values.iter().zip(&self.origin).zip(&self.scale).map(|((v, o), s)| (v - o) / s).collect()
    }

    pub fn side(&self, j: usize, lo: f64, hi: f64) -> f64 {
        (hi - lo) / self.scale[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperRectangle {
    pub utopia: Vec<f64>,
    pub nadir: Vec<f64>,
    /// Volume in normalised coordinates.
    pub volume: f64,
}

impl HyperRectangle {
    pub fn new(utopia: Vec<f64>, nadir: Vec<f64>, norm: &Normalizer) -> Self {
        debug_assert!(utopia.iter().zip(&nadir).all(|(u, n)| u <= n));
        let volume = (0..utopia.len()).map(|j| norm.side(j, utopia[j], nadir[j])).product();
        Self { utopia, nadir, volume }
    }

    pub fn k(&self) -> usize {
        self.utopia.len()
    }

    pub fn middle(&self) -> Vec<f64> {
        self.utopia.iter().zip(&self.nadir).map(|(u, n)| (u + n) / 2.0).collect()
    }

    pub fn min_side(&self, norm: &Normalizer) -> f64 {
        (0..self.k()).map(|j| norm.side(j, self.utopia[j], self.nadir[j])).fold(f64::INFINITY, f64::min)
    }

    pub fn max_side(&self, norm: &Normalizer) -> f64 {
        (0..self.k()).map(|j| norm.side(j, self.utopia[j], self.nadir[j])).fold(0.0, f64::max)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.utopia).zip(&self.nadir).all(|((x, u), n)| x >= u && x <= n)
    }

    /// Middle-point probe constraints: `[U_j, (U_j + N_j) / 2]` for every objective.
    pub fn probe_bounds(&self) -> Vec<(f64, f64)> {
        self.utopia.iter().zip(self.middle()).map(|(&u, m)| (u, m)).collect()
    }

    /// Splits into `l^k` equal cells, ordered with the first objective varying slowest.
    pub fn grid(&self, l: usize, norm: &Normalizer) -> Vec<HyperRectangle> {
        let k = self.k();
        let total = l.pow(k as u32);
        (0..total)
            .map(|mut idx| {
                let mut cell = vec![0usize; k];
                for j in (0..k).rev() {
                    cell[j] = idx % l;
                    idx /= l;
                }
                let (lo, hi): (Vec<f64>, Vec<f64>) = (0..k)
                    .map(|j| {
                        let w = (self.nadir[j] - self.utopia[j]) / l as f64;
                        let lo = self.utopia[j] + w * cell[j] as f64;
                        let hi = if cell[j] + 1 == l { self.nadir[j] } else { self.utopia[j] + w * (cell[j] + 1) as f64 };
                        (lo, hi)
                    })
                    .unzip();
                HyperRectangle::new(lo, hi, norm)
            })
            .collect()
    }
}

/// Componentwise min and max of the reference points.
pub fn utopia_nadir(refs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), FrontierError> {
    let first = refs.first().ok_or(FrontierError::Empty)?;
    let k = first.len();
    let mut utopia = first.clone();
    let mut nadir = first.clone();
    for r in &refs[1..] {
        if r.len() != k {
            return Err(FrontierError::DimensionMismatch(k, r.len()));
        }
        for j in 0..k {
            utopia[j] = utopia[j].min(r[j]);
            nadir[j] = nadir[j].max(r[j]);
        }
    }
    Ok((utopia, nadir))
}

/// Initial rectangle and its normaliser. Degenerate dimensions are widened
/// to [`EPS_VOLUME`] so that the initial volume is exactly 1.
pub fn initial_rectangle(utopia: &[f64], nadir: &[f64]) -> (HyperRectangle, Normalizer) {
    let nadir: Vec<f64> = utopia
        .iter()
        .zip(nadir)
        .map(|(&u, &n)| if n - u < EPS_VOLUME { u + EPS_VOLUME } else { n })
        .collect();
    let scale = utopia.iter().zip(&nadir).map(|(u, n)| n - u).collect();
    let norm = Normalizer::new(utopia.to_vec(), scale);
    let mut rect = HyperRectangle::new(utopia.to_vec(), nadir, &norm);
    rect.volume = 1.0;
    (rect, norm)
}

/// All `2^k` boxes cut by the axis-parallel hyperplanes through `mid`.
/// Bit `j` of the mask selects the upper half `[mid_j, N_j]` on objective `j`.
pub fn split_all(rect: &HyperRectangle, mid: &[f64], norm: &Normalizer) -> Vec<(usize, HyperRectangle)> {
    let k = rect.k();
    (0..1usize << k)
        .map(|mask| {
            let (lo, hi) = (0..k)
                .map(|j| if mask >> j & 1 == 1 { (mid[j], rect.nadir[j]) } else { (rect.utopia[j], mid[j]) })
                .unzip();
            (mask, HyperRectangle::new(lo, hi, norm))
        })
        .collect()
}

/// Sub-rectangles left unexplored after a probe found `mid`.
pub fn subdivide(
    rect: &HyperRectangle,
    mid: &[f64],
    norm: &Normalizer,
    min_side: f64,
) -> Result<Vec<HyperRectangle>, FrontierError> {
    if mid.len() != rect.k() {
        return Err(FrontierError::DimensionMismatch(rect.k(), mid.len()));
    }
    // probe solutions may sit a solver tolerance outside the box
    let slack = 1e-6;
    for j in 0..rect.k() {
        let w = rect.nadir[j] - rect.utopia[j];
        if mid[j] < rect.utopia[j] - slack * w || mid[j] > rect.nadir[j] + slack * w || !mid[j].is_finite() {
            return Err(FrontierError::MidOutsideRect);
        }
    }
    let mid: Vec<f64> =
        mid.iter().zip(&rect.utopia).zip(&rect.nadir).map(|((m, u), n)| m.clamp(*u, *n)).collect();
    let k = rect.k();
    let dominated = (1usize << k) - 1;
    Ok(split_all(rect, &mid, norm)
        .into_iter()
        .filter(|(mask, _)| *mask != dominated && !(k == 2 && *mask == 0))
        .map(|(_, r)| r)
        .filter(|r| r.min_side(norm) >= min_side)
        .collect())
}

/// Sub-rectangles left after a probe came back empty: the lower half-box is
/// known to be empty, the other `2^k − 1` boxes around the centre remain.
pub fn subdivide_empty(rect: &HyperRectangle, norm: &Normalizer, min_side: f64) -> Vec<HyperRectangle> {
    let mid = rect.middle();
    split_all(rect, &mid, norm)
        .into_iter()
        .filter(|(mask, _)| *mask != 0)
        .map(|(_, r)| r)
        .filter(|r| r.min_side(norm) >= min_side)
        .collect()
}

fn coarse_enough(children: Vec<HyperRectangle>, norm: &Normalizer, resolution: f64) -> Vec<HyperRectangle> {
    if resolution <= 0.0 {
        return children;
    }
    children.into_iter().filter(|r| r.max_side(norm) >= resolution).collect()
}

/// Live volume over the initial volume, clamped to `[0, 1]`.
pub fn uncertain_fraction(live: &[HyperRectangle], initial_volume: f64) -> f64 {
    (live.iter().map(|r| r.volume).sum::<f64>() / initial_volume).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    /// Oriented objective values.
    pub objectives: Vec<f64>,
    pub config: Configuration,
    pub unit: UnitVector,
    pub probe: usize,
    pub elapsed_ms: f64,
    /// Constraints of the solve that produced the point, `None` for
    /// unconstrained reference solves.
    pub bounds: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertainSample {
    /// Probes completed when the sample was taken.
    pub probe: usize,
    pub elapsed_ms: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFrontier {
    pub algo: String,
    pub seed: u64,
    /// Attempted probes, including empty ones.
    pub probes: usize,
    /// Filtered, mutually non-dominated points.
    pub points: Vec<FrontierPoint>,
    /// Every solution in the order it was produced, before filtering.
    pub stream: Vec<FrontierPoint>,
    pub utopia: Vec<f64>,
    pub nadir: Vec<f64>,
    pub uncertain_trace: Vec<UncertainSample>,
}

impl ParetoFrontier {
    pub fn empty(algo: &str, seed: u64, k: usize) -> Self {
        Self {
            algo: algo.into(),
            seed,
            probes: 0,
            points: Vec::new(),
            stream: Vec::new(),
            utopia: vec![0.0; k],
            nadir: vec![0.0; k],
            uncertain_trace: Vec::new(),
        }
    }

    pub fn objective_points(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.objectives.clone()).collect()
    }

    pub fn normalizer(&self) -> Normalizer {
        let scale = self
            .utopia
            .iter()
            .zip(&self.nadir)
            .map(|(u, n)| if n - u > 0.0 { n - u } else { EPS_VOLUME })
            .collect();
        Normalizer::new(self.utopia.clone(), scale)
    }

    /// Rebuilds `points` from `stream`: Pareto filter, then merge points
    /// closer than `tol` in every normalised coordinate, keeping the earliest.
    pub fn refilter(&mut self, tol: f64) {
        self.points = filter_stream(&self.stream, &self.normalizer(), tol);
    }
}

pub(crate) fn filter_stream(stream: &[FrontierPoint], norm: &Normalizer, tol: f64) -> Vec<FrontierPoint> {
    let values: Vec<&[f64]> = stream.iter().map(|p| p.objectives.as_slice()).collect();
    let mut kept: Vec<FrontierPoint> = Vec::new();
    let mut kept_norm: Vec<Vec<f64>> = Vec::new();
    for i in pareto_filter(&values) {
        let n = norm.normalize(&stream[i].objectives);
        let near = kept_norm.iter().any(|m| m.iter().zip(&n).all(|(a, b)| (a - b).abs() <= tol));
        if !near {
            kept.push(stream[i].clone());
            kept_norm.push(n);
        }
    }
    kept
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontierSettings {
    pub solver: SolverSettings,
    /// Objective minimised by every probe.
    pub target: usize,
    /// Rectangles with a normalised side below this are not explored further.
    pub min_side: f64,
    /// Rectangles whose every normalised side is below this are not explored
    /// further either. Zero keeps refining until the budget runs out.
    pub resolution: f64,
    pub threads: usize,
    /// When false every timestamp is zero.
    pub timing: bool,
    /// Normalised distance under which frontier points are merged.
    pub merge_tol: f64,
}

impl Default for FrontierSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            target: 0,
            min_side: EPS_VOLUME,
            resolution: 0.0,
            threads: 1,
            timing: true,
            merge_tol: 1e-9,
        }
    }
}

pub(crate) struct Clock {
    start: Option<Instant>,
}

impl Clock {
    pub(crate) fn new(timing: bool) -> Self {
        Self { start: timing.then(Instant::now) }
    }

    pub(crate) fn ms(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)
    }
}

pub(crate) fn to_point(sol: COSolution, probe: usize, elapsed_ms: f64, bounds: Option<Vec<(f64, f64)>>) -> FrontierPoint {
    FrontierPoint { objectives: sol.objectives, config: sol.config, unit: sol.unit, probe, elapsed_ms, bounds }
}

pub(crate) fn build_pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool")
}

/// One reference solve per objective. `None` entries mean the global
/// constraints could not be met while minimising that objective.
pub fn reference_points(
    problem: &Problem,
    settings: &SolverSettings,
) -> Result<Vec<Option<COSolution>>, ProblemError> {
    problem.check_gradients()?;
    let k = problem.k();
    if !problem.has_constraints() {
        return (0..k)
            .into_par_iter()
            .map(|i| Ok(Some(solve_single(problem, i, &settings.for_solve(i as u64))?)))
            .collect();
    }
    let bounds = constraint_box(problem, settings)?;
    (0..k)
        .into_par_iter()
        .map(|i| {
            let co = COProblem::new(i, bounds.clone())?;
            Ok(solve_co(problem, &co, &settings.for_solve(i as u64))?)
        })
        .collect()
}

/// Oriented constraint box for the reference solves. Objectives without
/// bounds get the range found by minimising and maximising them alone.
fn constraint_box(problem: &Problem, settings: &SolverSettings) -> Result<Vec<(f64, f64)>, ProblemError> {
    problem
        .oriented_constraints()
        .into_par_iter()
        .enumerate()
        .map(|(j, given)| {
            if let Some(b) = given {
                return Ok(b);
            }
            let obj = &problem.objectives()[j];
            let key = RANGE_SWEEP_KEY + 2 * j as u64;
            let lo = solve_single(problem, j, &settings.for_solve(key))?.objectives[j];
            let flipped = ObjectiveSpec {
                direction: match obj.direction {
                    crate::models::Direction::Minimize => crate::models::Direction::Maximize,
                    crate::models::Direction::Maximize => crate::models::Direction::Minimize,
                },
                ..obj.clone()
            };
            let hi = solve_single_with(problem, &flipped, &settings.for_solve(key + 1))?.objectives[j];
            let pad = 1e-3 * (hi - lo).abs().max(1e-9);
            Ok((lo - pad, hi + pad))
        })
        .collect()
}

/// Middle-point probe of `rect` for objective `target`.
pub fn middle_point_probe(
    rect: &HyperRectangle,
    target: usize,
    problem: &Problem,
    settings: &SolverSettings,
) -> Result<Option<COSolution>, ProblemError> {
    let co = COProblem::new(target, rect.probe_bounds())?;
    Ok(solve_co(problem, &co, settings)?)
}

#[derive(Debug)]
struct Queued {
    volume: f64,
    seq: u64,
    rect: HyperRectangle,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // largest volume first, then earliest insertion
    fn cmp(&self, other: &Self) -> Ordering {
        self.volume.total_cmp(&other.volume).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Volume-ordered queue that tracks the live (unexplored) volume.
struct Frontier {
    heap: BinaryHeap<Queued>,
    seq: u64,
    live: f64,
    /// Rectangles popped but not yet settled.
    in_flight: usize,
}

impl Frontier {
    fn new(initial: HyperRectangle) -> Self {
        let mut f = Self { heap: BinaryHeap::new(), seq: 0, live: initial.volume, in_flight: 0 };
        f.push(initial);
        f
    }

    fn push(&mut self, rect: HyperRectangle) {
        self.heap.push(Queued { volume: rect.volume, seq: self.seq, rect });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<HyperRectangle> {
        let rect = self.heap.pop()?.rect;
        self.in_flight += 1;
        Some(rect)
    }

    /// Replaces a processed rectangle with its children in the live volume.
    fn settle(&mut self, parent_volume: f64, children: Vec<HyperRectangle>) {
        let added: f64 = children.iter().map(|c| c.volume).sum();
        // children never exceed their parent; the min absorbs rounding
        self.live = (self.live - parent_volume + added.min(parent_volume)).max(0.0).min(self.live);
        self.in_flight -= 1;
        for c in children {
            self.push(c);
        }
        if self.heap.is_empty() && self.in_flight == 0 {
            self.live = 0.0;
        }
    }
}

struct Run<'a> {
    problem: &'a Problem,
    settings: &'a FrontierSettings,
    clock: Clock,
    stream: Vec<FrontierPoint>,
    trace: Vec<UncertainSample>,
    count: usize,
}

impl<'a> Run<'a> {
    fn sample(&mut self, live: f64) {
        self.trace.push(UncertainSample { probe: self.count, elapsed_ms: self.clock.ms(), fraction: live.clamp(0.0, 1.0) });
    }

    /// Reference points, initial rectangle. `None` when the global
    /// constraints admit no reference point.
    fn init(&mut self) -> Result<Option<(HyperRectangle, Normalizer)>, ProblemError> {
        let refs = reference_points(self.problem, &self.settings.solver)?;
        let bounds = self.problem.has_constraints().then(|| {
            self.problem.oriented_constraints().into_iter().map(|b| b.unwrap_or((f64::NEG_INFINITY, f64::INFINITY))).collect()
        });
        self.count = refs.len();
        let mut found = Vec::new();
        for (i, sol) in refs.into_iter().enumerate() {
            if let Some(sol) = sol {
                found.push(sol.objectives.clone());
                let ms = self.clock.ms();
                self.stream.push(to_point(sol, i, ms, bounds.clone()));
            }
        }
        if found.len() < self.problem.k() {
            return Ok(None);
        }
        let (utopia, nadir) = utopia_nadir(&found)?;
        Ok(Some(initial_rectangle(&utopia, &nadir)))
    }

    fn finish(self, algo: &str, norm: Option<(&HyperRectangle, &Normalizer)>) -> ParetoFrontier {
        let k = self.problem.k();
        let (utopia, nadir, normalizer) = match norm {
            Some((r, n)) => (r.utopia.clone(), r.nadir.clone(), n.clone()),
            None => (vec![0.0; k], vec![0.0; k], Normalizer::identity(k)),
        };
        let points = filter_stream(&self.stream, &normalizer, self.settings.merge_tol);
        ParetoFrontier {
            algo: algo.into(),
            seed: self.settings.solver.seed,
            probes: self.count,
            points,
            stream: self.stream,
            utopia,
            nadir,
            uncertain_trace: self.trace,
        }
    }
}

fn check_run(problem: &Problem, settings: &FrontierSettings) -> Result<(), ProblemError> {
    problem.require_objectives(2)?;
    if settings.target >= problem.k() {
        return Err(crate::error::SolveError::BadTarget { target: settings.target, objectives: problem.k() }.into());
    }
    settings.solver.validate().map_err(ProblemError::Settings)?;
    Ok(())
}

/// Sequential Progressive Frontier with a total budget of `budget` solves,
/// reference solves included.
pub fn pf_sequential(problem: &Problem, budget: usize, settings: &FrontierSettings) -> Result<ParetoFrontier, ProblemError> {
    check_run(problem, settings)?;
    build_pool(1).install(|| pf_sequential_inner(problem, budget, settings))
}

fn pf_sequential_inner(problem: &Problem, budget: usize, settings: &FrontierSettings) -> Result<ParetoFrontier, ProblemError> {
    let mut run = Run { problem, settings, clock: Clock::new(settings.timing), stream: Vec::new(), trace: Vec::new(), count: 0 };
    let Some((initial, norm)) = run.init()? else {
        return Ok(run.finish("pf-s", None));
    };
    let mut queue = Frontier::new(initial.clone());
    run.sample(queue.live);

    while run.count < budget {
        let Some(rect) = queue.pop() else { break };
        let probe = run.count;
        let sol = middle_point_probe(&rect, settings.target, problem, &settings.solver.for_solve(probe as u64))?;
        run.count += 1;
        let children = match sol {
            Some(sol) => {
                let children = subdivide(&rect, &sol.objectives, &norm, settings.min_side)?;
                let ms = run.clock.ms();
                run.stream.push(to_point(sol, probe, ms, Some(rect.probe_bounds())));
                children
            }
            None => subdivide_empty(&rect, &norm, settings.min_side),
        };
        queue.settle(rect.volume, coarse_enough(children, &norm, settings.resolution));
        run.sample(queue.live);
    }
    Ok(run.finish("pf-s", Some((&initial, &norm))))
}

/// Parallel Progressive Frontier: every popped rectangle is cut into an
/// `l^k` grid whose cells are probed concurrently. Cells whose probe comes
/// back empty are dropped.
pub fn pf_parallel(
    problem: &Problem,
    grid: usize,
    budget: usize,
    settings: &FrontierSettings,
) -> Result<ParetoFrontier, ProblemError> {
    check_run(problem, settings)?;
    if grid < 2 {
        return Err(FrontierError::BadGrid.into());
    }
    build_pool(settings.threads).install(|| pf_parallel_inner(problem, grid, budget, settings))
}

fn pf_parallel_inner(
    problem: &Problem,
    grid: usize,
    budget: usize,
    settings: &FrontierSettings,
) -> Result<ParetoFrontier, ProblemError> {
    let mut run = Run { problem, settings, clock: Clock::new(settings.timing), stream: Vec::new(), trace: Vec::new(), count: 0 };
    let Some((initial, norm)) = run.init()? else {
        return Ok(run.finish("pf-ap", None));
    };
    let mut queue = Frontier::new(initial.clone());
    run.sample(queue.live);

    while run.count < budget {
        let Some(rect) = queue.pop() else { break };
        let mut cells = rect.grid(grid, &norm);
        let issued = cells.len().min(budget - run.count);
        let held_back = cells.split_off(issued);
        // the popped rectangle is settled piecewise: the held-back cells at once, then each issued cell
        queue.in_flight += issued;
        let first = run.count;
        let results: Vec<Result<Option<COSolution>, ProblemError>> = cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| {
                middle_point_probe(cell, settings.target, problem, &settings.solver.for_solve((first + i) as u64))
            })
            .collect();

        // cells not issued because of the budget stay live
        let held_volume: f64 = held_back.iter().map(|c| c.volume).sum();
        queue.settle(held_volume, held_back);
        for (i, (cell, result)) in cells.into_iter().zip(results).enumerate() {
            run.count += 1;
            let children = match result? {
                Some(sol) => {
                    let children = subdivide(&cell, &sol.objectives, &norm, settings.min_side)?;
                    let ms = run.clock.ms();
                    run.stream.push(to_point(sol, first + i, ms, Some(cell.probe_bounds())));
                    children
                }
                None => Vec::new(),
            };
            queue.settle(cell.volume, coarse_enough(children, &norm, settings.resolution));
            run.sample(queue.live);
        }
    }
    Ok(run.finish("pf-ap", Some((&initial, &norm))))
}

/// A problem with some categorical variables pinned to fixed levels.
#[derive(Debug, Clone)]
pub struct SubProblem {
    /// (variable index, level index) pairs in the parent space.
    pub fixed: Vec<(usize, usize)>,
    pub problem: Problem,
    pub embedding: Arc<crate::space::Embedding>,
}

/// One sub-problem per combination of the enumerated categorical levels.
pub fn categorical_split(problem: &Problem, cap: usize) -> Result<Vec<SubProblem>, ProblemError> {
    let vars = problem.enumerated();
    let level_counts: Vec<usize> = vars
        .iter()
        .map(|&v| match &problem.space().variables()[v].kind {
            VariableKind::Categorical { levels } => levels.len(),
            _ => unreachable!("enumeration is restricted to categoricals"),
        })
        .collect();
    let count = level_counts.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
    if count > cap {
        return Err(ProblemError::TooManyCombinations { count, cap });
    }
    (0..count)
        .map(|mut idx| {
            let mut fixed = vec![(0, 0); vars.len()];
            for i in (0..vars.len()).rev() {
                fixed[i] = (vars[i], idx % level_counts[i]);
                idx /= level_counts[i];
            }
            let (space, embedding) = problem.space().restrict(&fixed)?;
            let embedding = Arc::new(embedding);
            Ok(SubProblem { problem: problem.embedded(space, embedding.clone()), fixed, embedding })
        })
        .collect()
}

/// Solves every categorical sub-problem (concurrently, up to `threads`) and
/// merges their frontiers. Without enumerated variables this is `solve(problem)`.
pub fn solve_split<F>(
    problem: &Problem,
    cap: usize,
    threads: usize,
    merge_tol: f64,
    solve: F,
) -> Result<ParetoFrontier, ProblemError>
where
    F: Fn(&Problem) -> Result<ParetoFrontier, ProblemError> + Sync,
{
    if problem.enumerated().is_empty() {
        return solve(problem);
    }
    let subs = categorical_split(problem, cap)?;
    let frontiers: Vec<ParetoFrontier> =
        build_pool(threads).install(|| subs.par_iter().map(|s| solve(&s.problem)).collect::<Result<_, _>>())?;
    let lifted: Vec<ParetoFrontier> = subs.iter().zip(frontiers).map(|(s, f)| lift(f, &s.embedding)).collect();
    Ok(merge_frontiers(lifted, merge_tol))
}

fn lift(mut f: ParetoFrontier, emb: &crate::space::Embedding) -> ParetoFrontier {
    for p in f.stream.iter_mut().chain(f.points.iter_mut()) {
        p.config = emb.lift_config(&p.config);
        p.unit = UnitVector::new(emb.lift(p.unit.coords())).expect("lifted point stays in the cube");
    }
    f
}

/// Merges independently computed frontiers. Streams are concatenated in
/// order with probe indices offset; the uncertain trace treats the parts as
/// run one after another with unstarted parts fully uncertain.
pub fn merge_frontiers(parts: Vec<ParetoFrontier>, merge_tol: f64) -> ParetoFrontier {
    let n = parts.len();
    let k = parts.first().map_or(0, |p| p.utopia.len());
    let mut merged = ParetoFrontier::empty(parts.first().map_or("", |p| p.algo.as_str()), parts.first().map_or(0, |p| p.seed), k);
    let nonempty: Vec<&ParetoFrontier> = parts.iter().filter(|p| !p.stream.is_empty()).collect();
    if let Some(first) = nonempty.first() {
        merged.utopia = first.utopia.clone();
        merged.nadir = first.nadir.clone();
    }
    for p in &nonempty {
        for j in 0..k {
            merged.utopia[j] = merged.utopia[j].min(p.utopia[j]);
            merged.nadir[j] = merged.nadir[j].max(p.nadir[j]);
        }
    }
    let mut done = 0.0;
    let mut offset = 0;
    for (i, part) in parts.iter().enumerate() {
        let pending = (n - i - 1) as f64;
        for s in &part.uncertain_trace {
            merged.uncertain_trace.push(UncertainSample {
                probe: offset + s.probe,
                elapsed_ms: s.elapsed_ms,
                fraction: (done + s.fraction + pending) / n as f64,
            });
        }
        done += part.uncertain_trace.last().map_or(0.0, |s| s.fraction);
        merged.stream.extend(part.stream.iter().cloned().map(|mut p| {
            p.probe += offset;
            p
        }));
        offset += part.probes;
    }
    merged.probes = offset;
    merged.refilter(merge_tol);
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::AnalyticModel;
    use crate::space::{ParameterSpace, VariableSpec};

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[1.0, 3.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]).unwrap());
        assert!(!dominates(&[2.0, 1.0], &[1.0, 2.0]).unwrap());
        assert!(dominates(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn filter_examples() {
        assert_eq!(pareto_filter(&[[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]), vec![0, 1]);
        assert_eq!(pareto_filter(&[[0.3, 0.7]]), vec![0]);
        assert_eq!(pareto_filter(&[[0.2, 0.9], [0.3, 0.7], [0.5, 0.5]]), vec![0, 1, 2]);
        assert_eq!(pareto_filter(&[[0.5, 0.5], [0.5, 0.5], [0.1, 0.9]]), vec![0, 2]);
    }

    #[test]
    fn utopia_nadir_examples() {
        let (u, n) = utopia_nadir(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!((u, n), (vec![0.0, 0.0], vec![1.0, 1.0]));
        let (u, n) = utopia_nadir(&[vec![2.0, 3.0], vec![2.0, 5.0]]).unwrap();
        assert_eq!((u.clone(), n.clone()), (vec![2.0, 3.0], vec![2.0, 5.0]));
        let (rect, _) = initial_rectangle(&u, &n);
        assert_eq!(rect.volume, 1.0);
        assert_eq!(rect.nadir[0], 2.0 + EPS_VOLUME);
        let (u, n) = utopia_nadir(&[vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]]).unwrap();
        assert_eq!((u, n), (vec![0.0; 3], vec![3.0, 2.0, 4.0]));
    }

    fn unit_rect(k: usize) -> (HyperRectangle, Normalizer) {
        initial_rectangle(&vec![0.0; k], &vec![1.0; k])
    }

    #[test]
    fn subdivide_two_objectives() {
        let (rect, norm) = unit_rect(2);
        let boxes = subdivide(&rect, &[0.5, 0.5], &norm, EPS_VOLUME).unwrap();
        assert_eq!(boxes.len(), 2);
        // bit 0 high: [0.5, 1] x [0, 0.5]; bit 1 high: [0, 0.5] x [0.5, 1]
        assert_eq!((boxes[0].utopia.clone(), boxes[0].nadir.clone()), (vec![0.5, 0.0], vec![1.0, 0.5]));
        assert_eq!((boxes[1].utopia.clone(), boxes[1].nadir.clone()), (vec![0.0, 0.5], vec![0.5, 1.0]));
        assert!(boxes.iter().all(|b| b.volume == 0.25));
    }

    #[test]
    fn subdivide_three_objectives_keeps_seven() {
        let (rect, norm) = unit_rect(3);
        assert_eq!(subdivide(&rect, &[0.5; 3], &norm, EPS_VOLUME).unwrap().len(), 7);
    }

    #[test]
    fn subdivide_at_utopia_leaves_nothing() {
        // f^M = U dominates the whole rectangle; every other box is flat
        let (rect, norm) = unit_rect(2);
        assert!(subdivide(&rect, &[0.0, 0.0], &norm, EPS_VOLUME).unwrap().is_empty());
        let all = split_all(&rect, &[0.0, 0.0], &norm);
        assert_eq!(all.iter().filter(|(_, r)| r.volume > 0.0).count(), 1);
    }

    #[test]
    fn subdivide_rejects_outside_mid() {
        let (rect, norm) = unit_rect(2);
        assert_eq!(subdivide(&rect, &[1.5, 0.5], &norm, EPS_VOLUME), Err(FrontierError::MidOutsideRect));
    }

    #[test]
    fn empty_probe_keeps_three_quadrants() {
        let (rect, norm) = unit_rect(2);
        let boxes = subdivide_empty(&rect, &norm, EPS_VOLUME);
        assert_eq!(boxes.len(), 3);
        assert!((uncertain_fraction(&boxes, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn uncertain_fraction_examples() {
        let (rect, norm) = unit_rect(2);
        assert_eq!(uncertain_fraction(std::slice::from_ref(&rect), 1.0), 1.0);
        let boxes = subdivide(&rect, &[0.5, 0.5], &norm, EPS_VOLUME).unwrap();
        assert_eq!(uncertain_fraction(&boxes, 1.0), 0.5);
        assert_eq!(uncertain_fraction(&[], 1.0), 0.0);
    }

    #[test]
    fn grid_cells() {
        let (rect, norm) = unit_rect(2);
        let cells = rect.grid(2, &norm);
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[1].utopia, vec![0.0, 0.5]);
        assert!((cells.iter().map(|c| c.volume).sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(unit_rect(3).0.grid(3, &unit_rect(3).1).len(), 27);
    }

    fn linear_pair() -> Problem {
        let space = ParameterSpace::new(vec![VariableSpec::continuous("x", 0.0, 1.0)]).unwrap();
        Problem::new(
            space,
            vec![
                ObjectiveSpec::minimize("f1", AnalyticModel::affine(vec![1.0], 0.0)),
                ObjectiveSpec::minimize("f2", AnalyticModel::affine(vec![-1.0], 1.0)),
            ],
        )
        .unwrap()
    }

    fn near(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn reference_points_linear() {
        let refs = reference_points(&linear_pair(), &SolverSettings::default()).unwrap();
        let r1 = refs[0].as_ref().unwrap();
        let r2 = refs[1].as_ref().unwrap();
        assert!(near(&r1.objectives, &[0.0, 1.0], 1e-9));
        assert!(near(&r2.objectives, &[1.0, 0.0], 1e-9));
    }

    #[test]
    fn middle_point_probe_examples() {
        let p = linear_pair();
        let s = SolverSettings::default();
        let (rect, norm) = unit_rect(2);
        let sol = middle_point_probe(&rect, 0, &p, &s).unwrap().expect("center lies on the frontier");
        assert!(near(&sol.objectives, &[0.5, 0.5], 1e-5), "{:?}", sol.objectives);
        let small = HyperRectangle::new(vec![0.0, 0.0], vec![0.4, 0.4], &norm);
        assert!(middle_point_probe(&small, 0, &p, &s).unwrap().is_none());
    }

    #[test]
    fn pf_sequential_linear() {
        let p = linear_pair();
        let f = pf_sequential(&p, 3, &FrontierSettings { timing: false, ..Default::default() }).unwrap();
        assert_eq!(f.probes, 3);
        let pts = f.objective_points();
        for want in [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]] {
            assert!(pts.iter().any(|q| near(q, &want, 1e-5)), "{pts:?}");
        }
        assert_eq!(f.uncertain_trace[0].fraction, 1.0);
        assert!((f.uncertain_trace[1].fraction - 0.5).abs() < 1e-9);
    }

    #[test]
    fn resolution_exhausts_the_queue() {
        let p = linear_pair();
        let settings = FrontierSettings { resolution: 0.1, timing: false, ..Default::default() };
        let f = pf_sequential(&p, 10_000, &settings).unwrap();
        assert!(f.probes < 10_000);
        assert_eq!(f.uncertain_trace.last().unwrap().fraction, 0.0);
        let mut xs: Vec<f64> = f.points.iter().map(|q| q.objectives[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!(xs.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-6), "{xs:?}");
    }

    #[test]
    fn pf_parallel_first_round() {
        let p = linear_pair();
        let f = pf_parallel(&p, 2, 6, &FrontierSettings { timing: false, threads: 2, ..Default::default() }).unwrap();
        assert_eq!(f.probes, 6);
        let new_points: Vec<_> = f.stream.iter().filter(|q| q.probe >= 2).collect();
        assert!(new_points.len() >= 2);
        for q in new_points {
            assert!((q.objectives[0] + q.objectives[1] - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn categorical_split_counts() {
        let space = ParameterSpace::new(vec![
            VariableSpec::continuous("x", 0.0, 1.0),
            VariableSpec::categorical("b", ["true", "false"]),
            VariableSpec::categorical("c", ["p", "q", "r"]),
        ])
        .unwrap();
        let d = space.encoded_dim();
        let objs = vec![
            ObjectiveSpec::minimize("f1", AnalyticModel::affine(vec![1.0; d], 0.0)),
            ObjectiveSpec::minimize("f2", AnalyticModel::affine(vec![-1.0; d], 1.0)),
        ];
        let p = Problem::new(space, objs).unwrap();
        assert_eq!(categorical_split(&p.clone().with_enumeration(&["b"]).unwrap(), 64).unwrap().len(), 2);
        let both = p.clone().with_enumeration(&["b", "c"]).unwrap();
        let subs = categorical_split(&both, 64).unwrap();
        assert_eq!(subs.len(), 6);
        assert_eq!(subs[5].fixed, vec![(1, 1), (2, 2)]);
        assert_eq!(subs[0].problem.dim(), 1);
        assert!(matches!(categorical_split(&both, 5), Err(ProblemError::TooManyCombinations { count: 6, cap: 5 })));
        assert!(p.with_enumeration(&["x"]).is_err());
    }

    #[test]
    fn merge_filters_union() {
        let mk = |pts: &[[f64; 2]]| {
            let mut f = ParetoFrontier::empty("pf-s", 0, 2);
            f.utopia = vec![0.0, 0.0];
            f.nadir = vec![1.0, 1.0];
            f.probes = pts.len();
            f.stream = pts
                .iter()
                .enumerate()
                .map(|(i, p)| FrontierPoint {
                    objectives: p.to_vec(),
                    config: Configuration::new(vec![]),
                    unit: UnitVector::new(vec![]).unwrap(),
                    probe: i,
                    elapsed_ms: 0.0,
                    bounds: None,
                })
                .collect();
            f
        };
        let merged = merge_frontiers(vec![mk(&[[0.0, 1.0]]), mk(&[[0.5, 0.5], [1.0, 1.0]])], 1e-9);
        assert_eq!(merged.objective_points(), vec![vec![0.0, 1.0], vec![0.5, 0.5]]);
        assert_eq!(merged.points[1].probe, 1);
    }
}
