//! `progfront` command-line front-end.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.

pub mod spec;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use progfront::baselines::{evo_nsga2, nc_grid, weighted_sum, ws_weights, WeightVector};
use progfront::error::{OracleError, ProblemError};
use progfront::frontier::{pf_parallel, pf_sequential, solve_split, FrontierSettings, ParetoFrontier};
use progfront::io::{self, FrontierFile, RecommendationFile};
use progfront::models::LoadOptions;
use progfront::oracle::{self, OracleFrontier};
use progfront::problem::Problem;
use progfront::recommend::{
    compose_weights, utopia_nearest, weighted_utopia_nearest, CategoryTable, Preference, WorkloadCategory,
};

/// Upper bound on categorical sub-problems.
pub const ENUMERATION_CAP: usize = 64;
pub const DEFAULT_SCHEDULE: [usize; 8] = [10, 20, 30, 40, 50, 100, 150, 200];
pub const BENCH_HEADER: [&str; 10] = [
    "algo",
    "probes",
    "seed",
    "elapsed_ms",
    "uncertain_fraction",
    "point_count",
    "coverage_err",
    "optimality_err",
    "coverage_regressed",
    "error",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Solve(_) | ProblemError::Frontier(_) => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<io::IoError> for CliError {
    fn from(e: io::IoError) -> Self {
        match e {
            io::IoError::Io { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "progfront", version, about = "Pareto frontiers of black-box objective models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a frontier and write it as JSON.
    Solve(SolveArgs),
    /// Pick one configuration from a frontier file.
    Recommend(RecommendArgs),
    /// Run algorithms over a probe schedule and write metrics as CSV.
    Bench(BenchArgs),
    /// Brute-force grid frontier.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    #[value(name = "pf-s")]
    PfS,
    #[value(name = "pf-ap")]
    PfAp,
    Ws,
    Nc,
    Evo,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::PfS => "pf-s",
            Algo::PfAp => "pf-ap",
            Algo::Ws => "ws",
            Algo::Nc => "nc",
            Algo::Evo => "evo",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// PF-AP grid factor l.
    #[arg(long, default_value_t = 2)]
    pub grid: usize,
    /// Worker threads; defaults to the available cores.
    #[arg(long, env = "MOO_THREADS")]
    pub threads: Option<usize>,
    /// Overrides the seed in the problem file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evolutionary population size.
    #[arg(long, default_value_t = 20)]
    pub population: usize,
    /// Overrides alpha in uncertainty-adjusted models.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Zero every timestamp for byte-reproducible output.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "pf-s")]
    pub algo: Algo,
    /// Probe budget (solver calls, or generations for evo).
    #[arg(long, default_value_t = 50)]
    pub probes: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Un,
    Wun,
}

#[derive(Debug, Clone, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub frontier: PathBuf,
    /// Problem file whose objective bounds pre-filter the frontier.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "un")]
    pub strategy: Strategy,
    /// External weights for wun, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub category: Option<WorkloadCategory>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pf-s,pf-ap,ws,nc,evo")]
    pub algos: Vec<Algo>,
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    /// Extra seeds; each runs the whole schedule.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Oracle grid points per dimension; defaults by dimension.
    #[arg(long)]
    pub oracle_resolution: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub oracle_resolution: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments and runs the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Recommend(a) => cmd_recommend(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    }
}

struct Context {
    problem: Problem,
    settings: FrontierSettings,
    grid: usize,
    population: usize,
}

fn threads(requested: Option<usize>) -> Result<usize, CliError> {
    match requested {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn load_options(alpha: Option<f64>) -> LoadOptions {
    LoadOptions { alpha_override: alpha }
}

fn context(run: &RunArgs) -> Result<Context, CliError> {
    let loaded = spec::load(&run.problem, &load_options(run.alpha))?;
    let mut solver = loaded.spec.solver.clone();
    if let Some(seed) = run.seed.or(loaded.spec.seed) {
        solver.seed = seed;
    }
    let mut settings = FrontierSettings {
        solver,
        target: loaded.spec.target,
        threads: threads(run.threads)?,
        timing: !run.no_timing,
        ..Default::default()
    };
    if let Some(min_side) = loaded.spec.min_side {
        settings.min_side = min_side;
    }
    if let Some(resolution) = loaded.spec.resolution {
        settings.resolution = resolution;
    }
    if run.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    Ok(Context { problem: loaded.problem, settings, grid: run.grid, population: run.population })
}

/// Runs one algorithm with budget `probes`, splitting over enumerated categoricals.
fn solve_with(ctx: &Context, algo: Algo, probes: usize) -> Result<ParetoFrontier, CliError> {
    let k = ctx.problem.k();
    if k < 2 {
        return Err(CliError::Validation(format!("need at least 2 objectives, got {k}")));
    }
    if matches!(algo, Algo::PfS | Algo::PfAp) && probes < k {
        return Err(CliError::Usage(format!("--probes must be at least the objective count {k}")));
    }
    let s = &ctx.settings;
    let one = |p: &Problem| -> Result<ParetoFrontier, ProblemError> {
        match algo {
            Algo::PfS => pf_sequential(p, probes, s),
            Algo::PfAp => pf_parallel(p, ctx.grid, probes, s),
            Algo::Ws => weighted_sum(p, &ws_weights(k, probes.max(1)), s),
            Algo::Nc => {
                let n = ((probes.max(1) as f64).powf(1.0 / (k - 1) as f64).round() as usize).max(2);
                nc_grid(p, n, s)
            }
            Algo::Evo => evo_nsga2(p, ctx.population, probes, s),
        }
    };
    Ok(solve_split(&ctx.problem, ENUMERATION_CAP, s.threads, s.merge_tol, one)?)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let ctx = context(&args.run)?;
    let frontier = solve_with(&ctx, args.algo, args.probes)?;
    if frontier.points.is_empty() {
        eprintln!("warning: no feasible point satisfies the objective bounds; frontier is empty");
    }
    io::write_json(&args.out, &FrontierFile::from_frontier(&frontier, &ctx.problem))?;
    Ok(())
}

pub fn cmd_recommend(args: &RecommendArgs) -> Result<(), CliError> {
    let file: FrontierFile = io::read_json(&args.frontier)?;
    let mut frontier = file.to_frontier()?;
    let k = file.directions.len();
    if let Some(path) = &args.problem {
        let loaded = spec::load(path, &LoadOptions::default())?;
        let bounds: Vec<Option<(f64, f64)>> = file
            .objective_names
            .iter()
            .map(|name| loaded.problem.objectives().iter().find(|o| &o.name == name).and_then(|o| o.oriented_bounds()))
            .collect();
        frontier.points.retain(|p| {
            p.objectives.iter().zip(&bounds).all(|(v, b)| b.is_none_or(|(lo, hi)| *v >= lo && *v <= hi))
        });
    }
    if frontier.points.is_empty() {
        return Err(CliError::Runtime("no feasible recommendation: the frontier is empty after applying bounds".into()));
    }
    let (point, weights, strategy) = match args.strategy {
        Strategy::Un => {
            if args.weights.is_some() || args.category.is_some() {
                return Err(CliError::Usage("--weights and --category apply only to --strategy wun".into()));
            }
            (utopia_nearest(&frontier).map_err(|e| CliError::Runtime(e.to_string()))?, WeightVector::uniform(k), "un")
        }
        Strategy::Wun => {
            let external = match &args.weights {
                Some(w) => WeightVector::normalized(w.clone()).map_err(|e| CliError::Usage(e.to_string()))?,
                None => WeightVector::uniform(k),
            };
            if external.len() != k {
                return Err(CliError::Usage(format!("--weights needs {k} values, got {}", external.len())));
            }
            if args.category.is_some() && k != 2 {
                return Err(CliError::Usage("--category needs exactly 2 objectives (latency, cost)".into()));
            }
            let pref = Preference { external, internal: None, category: args.category };
            let w = compose_weights(&pref, &CategoryTable::default()).map_err(|e| CliError::Usage(e.to_string()))?;
            let p = weighted_utopia_nearest(&frontier, &w).map_err(|e| CliError::Runtime(e.to_string()))?;
            (p, w, "wun")
        }
    };
    let idx = file.points.iter().position(|r| r.probe == point.probe && r.unit == point.unit.coords());
    let rec = RecommendationFile {
        point: point.objectives.iter().zip(&file.directions).map(|(v, d)| orient(*v, *d)).collect(),
        config: idx.map(|i| file.points[i].config.clone()).unwrap_or_default(),
        strategy: strategy.into(),
        weights: weights.values().to_vec(),
        probe: point.probe,
    };
    io::write_json(&args.out, &rec)?;
    Ok(())
}

fn orient(v: f64, d: progfront::models::Direction) -> f64 {
    match d {
        progfront::models::Direction::Minimize => v,
        progfront::models::Direction::Maximize => -v,
    }
}

fn oracle_for(problem: &Problem, resolution: Option<usize>) -> Result<OracleFrontier, OracleError> {
    let r = resolution.unwrap_or_else(|| oracle::default_resolution(problem.dim()));
    oracle::grid_frontier(problem, r)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let loaded = spec::load(&args.problem, &load_options(args.alpha))?;
    let truth = oracle_for(&loaded.problem, args.oracle_resolution).map_err(|e| CliError::Validation(e.to_string()))?;
    io::write_json(&args.out, &FrontierFile::from_oracle(&truth, &loaded.problem))?;
    Ok(())
}

/// Per-truth-point distance to the nearest candidate, normalised by the truth box.
fn coverage_profile(candidate: &[Vec<f64>], truth: &[Vec<f64>]) -> Vec<f64> {
    truth
        .iter()
        .map(|t| oracle::point_set_distance(candidate, std::slice::from_ref(t)).map_or(f64::INFINITY, |d| d.0))
        .collect()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let mut ctx = context(&args.run)?;
    let schedule = args.schedule.clone().unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
    if schedule.is_empty() {
        return Err(CliError::Usage("--schedule is empty".into()));
    }
    let seeds = args.seeds.clone().unwrap_or_else(|| vec![ctx.settings.solver.seed]);
    let truth = match oracle_for(&ctx.problem, args.oracle_resolution) {
        Ok(t) => Some(t.objective_points()),
        Err(e) => {
            eprintln!("warning: oracle skipped: {e}");
            None
        }
    };
    let mut out = csv::Writer::from_path(&args.out).map_err(|e| CliError::Runtime(format!("{}: {e}", args.out.display())))?;
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    out.write_record(BENCH_HEADER).map_err(csv_err)?;
    for &algo in &args.algos {
        for &seed in &seeds {
            ctx.settings.solver.seed = seed;
            let mut previous: Option<Vec<f64>> = None;
            for &probes in &schedule {
                let started = Instant::now();
                let result = solve_with(&ctx, algo, probes);
                let elapsed = if args.run.no_timing { 0.0 } else { started.elapsed().as_secs_f64() * 1e3 };
                let mut row = vec![algo.name().to_string(), probes.to_string(), seed.to_string(), format!("{elapsed:.3}")];
                match result {
                    Ok(f) => {
                        let pts = f.objective_points();
                        let fraction = f.uncertain_trace.last().map(|s| s.fraction.to_string()).unwrap_or_default();
                        let (cov, opt, regressed) = match (&truth, pts.is_empty()) {
                            (Some(t), false) => {
                                let (c, o) = oracle::point_set_distance(&pts, t).map_err(|e| CliError::Runtime(e.to_string()))?;
                                let profile = coverage_profile(&pts, t);
                                let regressed = previous
                                    .as_ref()
                                    .is_some_and(|prev| profile.iter().zip(prev).any(|(now, before)| *now > before + 1e-9));
                                previous = Some(profile);
                                (c.to_string(), o.to_string(), regressed.to_string())
                            }
                            _ => (String::new(), String::new(), String::new()),
                        };
                        row.extend([fraction, pts.len().to_string(), cov, opt, regressed, String::new()]);
                    }
                    Err(e) => row.extend([String::new(), String::new(), String::new(), String::new(), String::new(), e.to_string()]),
                }
                out.write_record(&row).map_err(csv_err)?;
            }
        }
    }
    out.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// Convenience for tests and scripts: the problem a spec file describes.
pub fn load_problem(path: &Path) -> Result<Problem, CliError> {
    Ok(spec::load(path, &LoadOptions::default())?.problem)
}
