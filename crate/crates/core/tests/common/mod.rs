#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use progfront::models::{AnalyticModel, MlpModel, ObjectiveSpec};
use progfront::problem::Problem;
use progfront::space::{ParameterSpace, VariableSpec};

pub fn unit_space(d: usize) -> ParameterSpace {
    ParameterSpace::new((0..d).map(|i| VariableSpec::continuous(format!("x{i}"), 0.0, 1.0)).collect()).unwrap()
}

pub fn pair(d: usize, f1: AnalyticModel, f2: AnalyticModel) -> Problem {
    Problem::new(unit_space(d), vec![ObjectiveSpec::minimize("f1", f1), ObjectiveSpec::minimize("f2", f2)]).unwrap()
}

/// F1 = x, F2 = 1 − x.
pub fn linear() -> Problem {
    pair(1, AnalyticModel::affine(vec![1.0], 0.0), AnalyticModel::affine(vec![-1.0], 1.0))
}

/// F1 = x², F2 = (1 − x)².
pub fn quadratic() -> Problem {
    pair(1, AnalyticModel::quadratic(vec![1.0], vec![0.0]), AnalyticModel::quadratic(vec![1.0], vec![1.0]))
}

/// F1 = max(0, 12x − 3), F2 = max(0, 8x − 1).
pub fn relu_pair() -> Problem {
    pair(1, AnalyticModel::relu_affine(vec![12.0], -3.0), AnalyticModel::relu_affine(vec![8.0], -1.0))
}

/// F1 = max(0, 12x1 + 8x2 − 8), F2 = max(0, 4x1 − 16x2 + 4).
pub fn relu_bivariate() -> Problem {
    pair(2, AnalyticModel::relu_affine(vec![12.0, 8.0], -8.0), AnalyticModel::relu_affine(vec![4.0, -16.0], 4.0))
}

/// F1 = u, F2 = −(u + 0.5)²/2: the frontier bulges above its chord, with
/// end slopes −0.5 and −1.5.
pub fn concave() -> Problem {
    pair(1, AnalyticModel::affine(vec![1.0], 0.0), AnalyticModel::quadratic(vec![-0.5], vec![-0.5]))
}

/// F1 = mean(x), F2 = 1 − mean(x) over `d` inputs.
pub fn linear_mean(d: usize) -> Problem {
    let a = vec![1.0 / d as f64; d];
    pair(d, AnalyticModel::affine(a.clone(), 0.0), AnalyticModel::affine(a.iter().map(|v| -v).collect(), 1.0))
}

pub fn random_mlp_problem(seed: u64, d: usize, k: usize, hidden: &[usize]) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objectives =
        (0..k).map(|j| ObjectiveSpec::minimize(format!("f{j}"), MlpModel::random(d, hidden, &mut rng))).collect();
    Problem::new(unit_space(d), objectives).unwrap()
}

pub fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}
