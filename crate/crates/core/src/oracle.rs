//! Brute-force ground truth: evaluate a dense grid over the encoded unit
//! cube and keep the exact non-dominated set.

use rayon::prelude::*;

use crate::error::OracleError;
use crate::frontier::ParetoFrontier;
use crate::problem::Problem;
use crate::space::UnitVector;

pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleFrontier {
    /// Oriented objective values and the grid point producing them, sorted
    /// lexicographically by objectives.
    pub points: Vec<(Vec<f64>, UnitVector)>,
    pub grid_resolution: usize,
}

impl OracleFrontier {
    pub fn objective_points(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|(p, _)| p.clone()).collect()
    }
}

/// Points per dimension for an encoded dimension `d`.
pub fn default_resolution(d: usize) -> usize {
    match d {
        0 | 1 => 10_000,
        2 => 317,
        3 => 100,
        _ => ((DEFAULT_CAP as f64).powf(1.0 / d as f64).floor() as usize).max(2),
    }
}

pub fn grid_frontier(problem: &Problem, resolution: usize) -> Result<OracleFrontier, OracleError> {
    grid_frontier_capped(problem, resolution, DEFAULT_CAP)
}

/// Evaluates `resolution^D` grid points, `i / (resolution − 1)` per axis,
/// each snapped through decode and re-encode.
pub fn grid_frontier_capped(problem: &Problem, resolution: usize, cap: u128) -> Result<OracleFrontier, OracleError> {
    let d = problem.dim() as u32;
    let evaluations = (resolution as u128).checked_pow(d).unwrap_or(u128::MAX);
    if evaluations > cap {
        return Err(OracleError::CapExceeded { evaluations, cap });
    }
    let n = evaluations as usize;
    let axis = |i: usize| if resolution <= 1 { 0.5 } else { i as f64 / (resolution - 1) as f64 };
    let space = problem.space();
    let mut evaluated: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|mut idx| {
            let mut u = vec![0.0; d as usize];
            for j in (0..d as usize).rev() {
                u[j] = axis(idx % resolution);
                idx /= resolution;
            }
            let u = space.snap(&u);
            (problem.evaluate(&u), u)
        })
        .collect();
    evaluated.sort_by(|a, b| lex(&a.0, &b.0).then_with(|| lex(&a.1, &b.1)));
    let kept = exact_filter(evaluated.iter().map(|(f, _)| f.as_slice()));
    Ok(OracleFrontier {
        points: kept
            .into_iter()
            .map(|i| (evaluated[i].0.clone(), UnitVector::new(evaluated[i].1.clone()).expect("grid in cube")))
            .collect(),
        grid_resolution: resolution,
    })
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

/// Non-dominated indices of lexicographically sorted points. A later point
/// can never dominate an earlier one, so one pass against the archive suffices.
fn exact_filter<'a>(sorted: impl Iterator<Item = &'a [f64]>) -> Vec<usize> {
    let mut archive: Vec<(usize, &[f64])> = Vec::new();
    for (i, p) in sorted.enumerate() {
        let covered = archive.iter().any(|(_, q)| q.iter().zip(p).all(|(a, b)| a <= b));
        if !covered {
            archive.push((i, p));
        }
    }
    archive.into_iter().map(|(i, _)| i).collect()
}

/// `(coverage_err, optimality_err)` between point sets, with distances
/// normalised by the bounding box of `truth`.
pub fn point_set_distance(candidate: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<(f64, f64), OracleError> {
    if candidate.is_empty() || truth.is_empty() {
        return Err(OracleError::Empty);
    }
    let k = truth[0].len();
    if let Some(p) = candidate.iter().chain(truth).find(|p| p.len() != k) {
        return Err(OracleError::DimensionMismatch(k, p.len()));
    }
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let (lo, hi) = truth.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
            if hi - lo > 0.0 { hi - lo } else { 1.0 }
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&scale).map(|((x, y), s)| ((x - y) / s).powi(2)).sum::<f64>().sqrt();
    let directed = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|a| to.iter().map(|b| dist(a, b)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok((directed(truth, candidate), directed(candidate, truth)))
}

pub fn frontier_distance(candidate: &ParetoFrontier, truth: &OracleFrontier) -> Result<(f64, f64), OracleError> {
    point_set_distance(&candidate.objective_points(), &truth.objective_points())
}

/// Lower-left convex hull of a 2-objective point set (collinear points kept).
pub fn hull_of(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, OracleError> {
    if points.is_empty() {
        return Err(OracleError::Empty);
    }
    if let Some(p) = points.iter().find(|p| p.len() != 2) {
        return Err(OracleError::UnsupportedDimension(p.len()));
    }
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| lex(a, b));
    let span = |j: usize| {
        let (lo, hi) = sorted.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
        (hi - lo).max(f64::MIN_POSITIVE)
    };
    let tol = 1e-12 * span(0) * span(1);
    let mut hull: Vec<&Vec<f64>> = Vec::new();
    for p in sorted {
        // on a Pareto set f2 falls as f1 rises; anything else is not lower-left
        if hull.last().is_some_and(|q| p[1] >= q[1]) {
            continue;
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b[0] - a[0]) * (p[1] - b[1]) - (b[1] - a[1]) * (p[0] - b[0]);
            if cross < -tol {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Ok(hull.into_iter().cloned().collect())
}

pub fn convex_hull_points(truth: &OracleFrontier) -> Result<Vec<Vec<f64>>, OracleError> {
    hull_of(&truth.objective_points())
}

/// Normalised distance from `p` to the polyline through `hull`.
pub fn distance_to_hull(p: &[f64], hull: &[Vec<f64>], scale: &[f64]) -> f64 {
    let n = |v: &[f64]| [v[0] / scale[0], v[1] / scale[1]];
    let q = n(p);
    let seg = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        ((a[0] + t * dx - q[0]).powi(2) + (a[1] + t * dy - q[1]).powi(2)).sqrt()
    };
    if hull.len() == 1 {
        let a = n(&hull[0]);
        return seg(a, a);
    }
    hull.windows(2).map(|w| seg(n(&w[0]), n(&w[1]))).fold(f64::INFINITY, f64::min)
}
