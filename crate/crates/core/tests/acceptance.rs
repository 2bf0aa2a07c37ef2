//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use progfront::baselines::{evo_nsga2, nc_grid, weighted_sum, ws_weights, WeightVector};
use progfront::frontier::{pf_parallel, pf_sequential, split_all, subdivide, FrontierSettings, HyperRectangle, Normalizer, ParetoFrontier};
use progfront::io::{to_json, FrontierFile};
use progfront::mogd::{co_loss, co_loss_grad, COProblem, SolverSettings};
use progfront::models::{Activation, MlpModel, ModelFile, ObjectiveModel, ObjectiveSpec};
use progfront::oracle::{distance_to_hull, frontier_distance, grid_frontier, hull_of};
use progfront::problem::Problem;
use progfront::recommend::{utopia_nearest, weighted_utopia_nearest};

use common::*;

enum Status {
    Pass,
    Fail,
    /// A precondition of the criterion cannot be met on this machine.
    Unverified,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
}

fn quiet() -> FrontierSettings {
    FrontierSettings { timing: false, ..Default::default() }
}

// --------------------------------------------------------------------------

/// PF-S until the queue empties, checked against a 10^4-point grid oracle.
fn oracle_equivalence() -> Outcome {
    let cases: [(&str, Problem); 5] = [
        ("linear", linear()),
        ("quadratic", quadratic()),
        ("relu-pair", relu_pair()),
        ("relu-bivariate", relu_bivariate()),
        ("concave", concave()),
    ];
    let settings = FrontierSettings { resolution: 5e-3, ..quiet() };
    let budget = 1_000_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, problem) in cases {
        let start = Instant::now();
        let f = pf_sequential(&problem, budget, &settings).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let per_dim = (10_000f64.powf(1.0 / problem.dim() as f64)).round() as usize;
        let truth = grid_frontier(&problem, per_dim).unwrap();
        let (cov, opt) = frontier_distance(&f, &truth).unwrap();
        let exhausted = f.probes < budget;
        let pass = exhausted && cov <= 1e-2 && opt <= 1e-2 && secs < 30.0;
        ok &= pass;
        parts.push(format!("{name}: cov {cov:.1e} opt {opt:.1e} probes {} {secs:.1}s", f.probes));
    }
    outcome(ok, parts.join("; "))
}

/// The uncertain fraction starts at 1, never rises, and halves after a
/// centre-landing first probe.
fn uncertain_monotonicity() -> Outcome {
    let solver = SolverSettings { multistart: 8, ..Default::default() };
    let mut violations = 0;
    let mut bad_start = 0;
    for seed in 0..100u64 {
        let d = 1 + (seed % 6) as usize;
        let k = 2 + (seed % 2) as usize;
        let problem = random_mlp_problem(seed, d, k, &[16, 16]);
        let settings = FrontierSettings { solver: SolverSettings { seed, ..solver.clone() }, ..quiet() };
        let f = if seed % 4 == 3 {
            pf_parallel(&problem, 2, 25, &settings).unwrap()
        } else {
            pf_sequential(&problem, 25, &settings).unwrap()
        };
        let trace: Vec<f64> = f.uncertain_trace.iter().map(|s| s.fraction).collect();
        if !non_increasing(&trace) {
            violations += 1;
        }
        if trace.first() != Some(&1.0) {
            bad_start += 1;
        }
    }
    let mut centre_err: f64 = 0.0;
    let mut landed = 0;
    for (i, problem) in [linear(), linear_mean(2), linear_mean(3)].iter().enumerate() {
        for seed in 0..3u64 {
            let settings = FrontierSettings { solver: SolverSettings { seed: seed + 10 * i as u64, ..Default::default() }, ..quiet() };
            let f = pf_sequential(problem, 3, &settings).unwrap();
            let probe = f.stream.iter().find(|p| p.probe == 2);
            if probe.filter(|p| p.objectives.iter().all(|v| (v - 0.5).abs() < 1e-6)).is_some() {
                landed += 1;
                centre_err = centre_err.max((f.uncertain_trace[1].fraction - 0.5).abs());
            }
        }
    }
    outcome(
        violations == 0 && bad_start == 0 && landed == 9 && centre_err <= 1e-9,
        format!("100 runs: {violations} increasing traces, {bad_start} bad starts; centre probes landed {landed}/9, max |fraction − 0.5| = {centre_err:.1e}"),
    )
}

/// Direct transcription of the penalty loss.
fn reference_loss(fhat: &[f64], target: usize, p: f64) -> f64 {
    let mut total = 0.0;
    let t = fhat[target];
    if (0.0..=1.0).contains(&t) {
        total += t * t;
    }
    for &f in fhat {
        if !(0.0..=1.0).contains(&f) {
            total += (f - 0.5) * (f - 0.5) + p;
        }
    }
    total
}

fn loss_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut sep_failures = 0;
    for case in 0..1000 {
        let k = rng.random_range(2..=4);
        let fhat: Vec<f64> = (0..k)
            .map(|_| match rng.random_range(0..4) {
                0 => rng.random_range(0.0..=1.0),
                1 => [0.0, 1.0][rng.random_range(0..2)],
                _ => rng.random_range(-1.0..2.0),
            })
            .collect();
        let target = rng.random_range(0..k);
        let p = if case % 2 == 0 { 1000.0 } else { rng.random_range(1.5..1e4) };
        let got = co_loss(&fhat, target, p);
        let want = reference_loss(&fhat, target, p);
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
        if p == 1000.0 {
            let feasible = fhat.iter().all(|f| (0.0..=1.0).contains(f));
            if feasible != (got < p) {
                sep_failures += 1;
            }
        }
    }
    outcome(worst <= 1e-12 && sep_failures == 0, format!("max rel diff {worst:.1e}; feasibility separation failures {sep_failures}"))
}

/// Pre-activations and their input gradients, computed independently of the library.
fn relu_units(file: &ModelFile, u: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let ModelFile::Mlp { layers, .. } = file else { unreachable!() };
    let d = u.len();
    let mut x = u.to_vec();
    // jac[i][k] = d x_i / d u_k
    let mut jac: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|k| if i == k { 1.0 } else { 0.0 }).collect()).collect();
    let mut units = Vec::new();
    for layer in layers {
        let mut nx = Vec::new();
        let mut nj = Vec::new();
        for (row, b) in layer.w.iter().zip(&layer.b) {
            let z: f64 = b + row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
            let dz: Vec<f64> = (0..d).map(|k| row.iter().zip(&jac).map(|(w, j)| w * j[k]).sum()).collect();
            if layer.act == Activation::Relu {
                units.push((z, dz.clone()));
                nx.push(z.max(0.0));
                nj.push(if z > 0.0 { dz } else { vec![0.0; d] });
            } else {
                nx.push(z);
                nj.push(dz);
            }
        }
        x = nx;
        jac = nj;
    }
    units
}

fn kink_distance(units: &[(f64, Vec<f64>)]) -> f64 {
    units
        .iter()
        .map(|(z, g)| {
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 { f64::INFINITY } else { z.abs() / n }
        })
        .fold(f64::INFINITY, f64::min)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_err(g: &[f64], fd: &[f64]) -> f64 {
    let diff: Vec<f64> = g.iter().zip(fd).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(g).max(norm(fd)).max(1e-8)
}

fn central_diff(f: impl Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let mut a = u.to_vec();
            let mut b = u.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn gradient_checks() -> Outcome {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    // MLP backward
    let (mut mlp_ok, mut mlp_unexplained) = (0, 0);
    for m in 0..50 {
        let d = 1 + m % 6;
        let net = MlpModel::random(d, &[16, 16], &mut rng);
        let file = ModelFile::from_mlp(&net);
        for _ in 0..20 {
            let u: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let g = net.backward(&u).unwrap();
            let fd = central_diff(|x| net.forward(x).unwrap(), &u, H);
            if rel_err(&g, &fd) <= 1e-4 {
                mlp_ok += 1;
            } else if kink_distance(&relu_units(&file, &u)) > 1e-3 {
                mlp_unexplained += 1;
            }
        }
    }

    // composed penalty loss
    let (mut loss_ok, mut loss_unexplained) = (0, 0);
    let penalty = 1000.0;
    for m in 0..100 {
        let d = 1 + m % 6;
        let k = 2 + m % 2;
        let nets: Vec<MlpModel> = (0..k).map(|_| MlpModel::random(d, &[16, 16], &mut rng)).collect();
        let files: Vec<ModelFile> = nets.iter().map(ModelFile::from_mlp).collect();
        let objectives: Vec<ObjectiveSpec> =
            nets.iter().enumerate().map(|(j, n)| ObjectiveSpec::minimize(format!("f{j}"), n.clone())).collect();
        // bounds around the objective values at a random anchor
        let anchor: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let bounds: Vec<(f64, f64)> = nets
            .iter()
            .map(|n| {
                let c = n.predict(&anchor);
                let w = rng.random_range(0.05..1.0);
                (c - rng.random_range(0.0..1.0) * w, c + w)
            })
            .collect();
        let co = COProblem::new(m % k, bounds.clone()).unwrap();
        let loss = |u: &[f64]| {
            let fhat: Vec<f64> = nets.iter().zip(&bounds).map(|(n, (lo, hi))| (n.predict(u) - lo) / (hi - lo)).collect();
            co_loss(&fhat, co.target(), penalty)
        };
        for _ in 0..10 {
            let u: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let g = co_loss_grad(&u, &co, &objectives, penalty).unwrap();
            let fd = central_diff(loss, &u, H);
            if rel_err(&g, &fd) <= 1e-4 {
                loss_ok += 1;
                continue;
            }
            let mut dist = f64::INFINITY;
            for ((net, file), (lo, hi)) in nets.iter().zip(&files).zip(&bounds) {
                dist = dist.min(kink_distance(&relu_units(file, &u)));
                let gn = norm(&net.backward(&u).unwrap()) / (hi - lo);
                let f = (net.predict(&u) - lo) / (hi - lo);
                if gn > 0.0 {
                    dist = dist.min(f.abs().min((f - 1.0).abs()) / gn);
                }
            }
            if dist > 1e-3 {
                loss_unexplained += 1;
            }
        }
    }
    let ok = mlp_ok >= 950 && loss_ok >= 950 && mlp_unexplained == 0 && loss_unexplained == 0;
    outcome(
        ok,
        format!(
            "mlp {mlp_ok}/1000 within 1e-4 ({mlp_unexplained} failures away from kinks); \
             co_loss {loss_ok}/1000 ({loss_unexplained} failures away from kinks or bound switches)"
        ),
    )
}

fn check_probe_boxes(problem: &Problem, f: &ParetoFrontier, tol: f64) -> (usize, usize) {
    let mut checked = 0;
    let mut violations = 0;
    for p in &f.stream {
        let Some(bounds) = &p.bounds else { continue };
        checked += 1;
        let values = problem.evaluate(p.unit.coords());
        let ok = values.iter().zip(bounds).all(|(v, (lo, hi))| {
            let slack = if lo.is_finite() && hi.is_finite() { tol * (hi - lo) } else { 0.0 };
            *v >= lo - slack && *v <= hi + slack
        });
        if !ok {
            violations += 1;
        }
    }
    (checked, violations)
}

fn probe_box_validity() -> Outcome {
    let mut problems = vec![linear(), quadratic(), relu_pair(), relu_bivariate(), concave()];
    for seed in 0..6u64 {
        problems.push(random_mlp_problem(100 + seed, 2 + seed as usize % 4, 2 + seed as usize % 2, &[16, 16]));
    }
    let solver = SolverSettings { multistart: 8, ..Default::default() };
    let mut checked = 0;
    let mut violations = 0;
    for (i, problem) in problems.iter().enumerate() {
        let settings = FrontierSettings { solver: SolverSettings { seed: i as u64, ..solver.clone() }, ..quiet() };
        let tol = settings.solver.tolerance;
        let runs = [
            pf_sequential(problem, 40, &settings).unwrap(),
            pf_parallel(problem, 2, 40, &settings).unwrap(),
            nc_grid(problem, 5, &settings).unwrap(),
        ];
        for f in &runs {
            let (c, v) = check_probe_boxes(problem, f, tol);
            checked += c;
            violations += v;
        }
    }
    outcome(violations == 0 && checked > 0, format!("{checked} probe solutions re-evaluated, {violations} violations"))
}

fn ws_convex_hull() -> Outcome {
    let problem = concave();
    let truth = grid_frontier(&problem, 10_000).unwrap();
    let hull = hull_of(&truth.objective_points()).unwrap();
    let ws = weighted_sum(&problem, &ws_weights(2, 10), &quiet()).unwrap();
    let scale = [1.0, 1.0];
    let off_hull = ws.points.iter().filter(|p| distance_to_hull(&p.objectives, &hull, &scale) > 1e-3).count();
    let pf = pf_sequential(&problem, 10, &quiet()).unwrap();
    let (ws_n, pf_n) = (ws.points.len(), pf.points.len());
    outcome(
        off_hull == 0 && ws_n < pf_n,
        format!("hull has {} vertices; WS points off hull {off_hull}/{ws_n}; distinct points at 10 probes: WS {ws_n}, PF-S {pf_n}", hull.len()),
    )
}

fn frontier_bytes(problem: &Problem, f: &ParetoFrontier) -> String {
    to_json(&FrontierFile::from_frontier(f, problem))
}

fn stream_key(f: &ParetoFrontier) -> Vec<(Vec<f64>, usize, Vec<f64>)> {
    f.stream.iter().map(|p| (p.objectives.clone(), p.probe, p.unit.coords().to_vec())).collect()
}

fn determinism() -> Outcome {
    let mut failures = Vec::new();
    let problems = [quadratic(), random_mlp_problem(7, 3, 2, &[16, 16]), random_mlp_problem(8, 4, 3, &[16, 16])];
    for (i, problem) in problems.iter().enumerate() {
        let settings = FrontierSettings { solver: SolverSettings { seed: 42 + i as u64, multistart: 8, ..Default::default() }, ..quiet() };
        let wide = FrontierSettings { threads: 8, ..settings.clone() };
        let runs: [(&str, Box<dyn Fn(&FrontierSettings) -> ParetoFrontier>); 5] = [
            ("pf-s", Box::new(|s| pf_sequential(problem, 20, s).unwrap())),
            ("pf-ap", Box::new(|s| pf_parallel(problem, 2, 20, s).unwrap())),
            ("ws", Box::new(|s| weighted_sum(problem, &ws_weights(problem.k(), 10), s).unwrap())),
            ("nc", Box::new(|s| nc_grid(problem, 3, s).unwrap())),
            ("evo", Box::new(|s| evo_nsga2(problem, 20, 10, s).unwrap())),
        ];
        for (name, run) in &runs {
            if frontier_bytes(problem, &run(&settings)) != frontier_bytes(problem, &run(&wide)) {
                failures.push(format!("{name} on problem {i} not byte-identical"));
            }
        }
        for budget in [6, 13] {
            let short = pf_sequential(problem, budget, &settings).unwrap();
            let long = pf_sequential(problem, budget + 11, &settings).unwrap();
            if !stream_key(&long).starts_with(&stream_key(&short)) {
                failures.push(format!("pf-s stream at {budget} is not a prefix on problem {i}"));
            }
            let short = pf_parallel(problem, 2, budget, &settings).unwrap();
            let long = pf_parallel(problem, 2, budget + 11, &wide).unwrap();
            if !stream_key(&long).starts_with(&stream_key(&short)) {
                failures.push(format!("pf-ap stream at {budget} is not a prefix on problem {i}"));
            }
        }
    }
    let problem = random_mlp_problem(9, 3, 2, &[16, 16]);
    let differing = [(1u64, 2u64), (3, 4), (5, 6)]
        .iter()
        .filter(|(a, b)| {
            let run = |seed| {
                let s = FrontierSettings { solver: SolverSettings { seed, ..Default::default() }, ..quiet() };
                evo_nsga2(&problem, 20, 10, &s).unwrap().objective_points()
            };
            run(*a) != run(*b)
        })
        .count();
    if differing == 0 {
        failures.push("evo frontiers identical across all seed pairs".into());
    }
    let detail = if failures.is_empty() {
        format!("byte-identical reruns and 1 vs 8 threads, stream prefixes hold; evo differs on {differing}/3 seed pairs")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn latency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let d = 8;
    let objectives = (0..2)
        .map(|j| ObjectiveSpec::minimize(format!("f{j}"), MlpModel::random(d, &[128; 4], &mut rng)))
        .collect();
    let problem = Problem::new(unit_space(d), objectives).unwrap();
    let solver = SolverSettings::default();
    let settings = FrontierSettings { solver, threads: 8, ..Default::default() };

    let start = Instant::now();
    let ap = pf_parallel(&problem, 2, 50, &settings).unwrap();
    let ap_ms = start.elapsed().as_secs_f64() * 1e3;
    let first_ms = ap.stream.iter().map(|p| p.elapsed_ms).fold(f64::INFINITY, f64::min);

    let start = Instant::now();
    pf_sequential(&problem, 50, &settings).unwrap();
    let s_ms = start.elapsed().as_secs_f64() * 1e3;

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!("first Pareto set after {first_ms:.0} ms; 50 probes: PF-AP {ap_ms:.0} ms, PF-S {s_ms:.0} ms; {cores} core(s)");
    if first_ms >= 1000.0 {
        return outcome(false, detail);
    }
    if cores < 4 {
        return Outcome { status: Status::Unverified, detail: format!("{detail}; elapsed comparison needs >= 4 cores") };
    }
    outcome(ap_ms <= s_ms, detail)
}

fn frontier_of(points: &[Vec<f64>]) -> ParetoFrontier {
    let k = points[0].len();
    let mut f = ParetoFrontier::empty("pf-s", 0, k);
    let ones = |p: &[f64]| p.to_vec();
    f.points = points
        .iter()
        .enumerate()
        .map(|(i, p)| progfront::frontier::FrontierPoint {
            objectives: ones(p),
            config: progfront::space::Configuration::new(vec![]),
            unit: progfront::space::UnitVector::new(vec![]).unwrap(),
            probe: i,
            elapsed_ms: 0.0,
            bounds: None,
        })
        .collect();
    let (u, n) = progfront::frontier::utopia_nadir(points).unwrap();
    f.utopia = u;
    f.nadir = n;
    f
}

fn recommendation() -> Outcome {
    let demo = frontier_of(&[vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
    let w = |a: f64, b: f64| WeightVector::new(vec![a, b]).unwrap();
    let mut failures = Vec::new();
    let check = |got: &[f64], want: &[f64], what: &str, failures: &mut Vec<String>| {
        if got != want {
            failures.push(format!("{what}: got {got:?}"));
        }
    };
    check(&utopia_nearest(&demo).unwrap().objectives, &[0.5, 0.5], "un", &mut failures);
    check(&weighted_utopia_nearest(&demo, &w(1.0, 0.0)).unwrap().objectives, &[0.0, 1.0], "wun (1,0)", &mut failures);
    check(&weighted_utopia_nearest(&demo, &w(0.5, 0.5)).unwrap().objectives, &[0.5, 0.5], "wun (.5,.5)", &mut failures);
    check(&weighted_utopia_nearest(&demo, &w(0.9, 0.1)).unwrap().objectives, &[0.0, 1.0], "wun (.9,.1)", &mut failures);
    let pair = frontier_of(&[vec![0.3, 0.6], vec![0.6, 0.3]]);
    check(&utopia_nearest(&pair).unwrap().objectives, &[0.3, 0.6], "tie", &mut failures);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut uniform_mismatch = 0;
    let mut monotone_violations = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=3);
        let n = rng.random_range(1..=12);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let f = frontier_of(&pts);
        if utopia_nearest(&f).unwrap().probe != weighted_utopia_nearest(&f, &WeightVector::uniform(k)).unwrap().probe {
            uniform_mismatch += 1;
        }
        if k == 2 {
            let norm = progfront::recommend::normalize_frontier(&f).unwrap();
            let mut last = f64::INFINITY;
            for step in 0..=50 {
                let w1 = step as f64 / 50.0;
                let p = weighted_utopia_nearest(&f, &WeightVector::normalized(vec![w1, 1.0 - w1]).unwrap()).unwrap();
                let i = f.points.iter().position(|q| q.probe == p.probe).unwrap();
                if norm[i][0] > last + 1e-12 {
                    monotone_violations += 1;
                    break;
                }
                last = norm[i][0];
            }
        }
    }
    if uniform_mismatch > 0 {
        failures.push(format!("uniform WUN differs from UN on {uniform_mismatch}/100"));
    }
    if monotone_violations > 0 {
        failures.push(format!("{monotone_violations} weight sweeps not monotone"));
    }
    let detail = if failures.is_empty() {
        "worked examples exact; uniform WUN = UN on 100/100; weight sweeps monotone".to_string()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn subdivision_accounting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut wrong_count = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=3);
        let lo: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.01..10.0)).collect();
        let scale: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..20.0)).collect();
        let norm = Normalizer::new(vec![0.0; k], scale);
        let rect = HyperRectangle::new(lo.clone(), hi.clone(), &norm);
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l + rng.random_range(0.0..=1.0) * (h - l)).collect();
        let total: f64 = split_all(&rect, &mid, &norm).iter().map(|(_, r)| r.volume).sum();
        worst = worst.max((total - rect.volume).abs() / rect.volume);
        if k == 3 {
            let interior: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l + rng.random_range(0.05..0.95) * (h - l)).collect();
            if subdivide(&rect, &interior, &norm, 0.0).unwrap().len() != 7 {
                wrong_count += 1;
            }
        }
    }
    outcome(worst <= 1e-12 && wrong_count == 0, format!("max relative volume error {worst:.1e}; k=3 box-count failures {wrong_count}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence (2D)", oracle_equivalence),
        ("uncertain-space monotonicity", uncertain_monotonicity),
        ("loss correctness", loss_correctness),
        ("gradient checks", gradient_checks),
        ("probe-box validity", probe_box_validity),
        ("WS convex-hull property", ws_convex_hull),
        ("determinism & consistency", determinism),
        ("desk-scale latency", latency),
        ("recommendation correctness", recommendation),
        ("subdivision accounting", subdivision_accounting),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>().cloned().unwrap_or_default())));
        let label = match result.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Unverified => "UNVERIFIED",
        };
        println!("{label:<10} {name}: {} [{:.1}s]", result.detail, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
