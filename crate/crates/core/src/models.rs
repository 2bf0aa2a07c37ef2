//! Black-box objective models over the encoded unit hypercube.
//!
//! Every model maps a `D`-dimensional unit vector to a scalar. Gradients and
//! predictive standard deviations are optional capabilities. Models are
//! immutable after construction and shared across solver threads behind an
//! [`Arc`].

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, SolveError};

pub trait ObjectiveModel: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;

    fn predict(&self, u: &[f64]) -> f64;

    /// Gradient with respect to `u`, or `None` when the model cannot provide one.
    fn grad(&self, u: &[f64]) -> Option<Vec<f64>> {
        self.value_and_grad(u).map(|(_, g)| g)
    }

    /// Value and gradient in one pass. Models that can share work between
    /// the two should override this.
    fn value_and_grad(&self, _u: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }

    /// Predictive standard deviation, when the model is probabilistic.
    fn std(&self, _u: &[f64]) -> Option<f64> {
        None
    }

    /// Gradient of [`ObjectiveModel::std`].
    fn std_grad(&self, _u: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

pub type SharedModel = Arc<dyn ObjectiveModel>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// One dense layer; `weights` is row-major with `out_dim` rows of `in_dim` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(rows: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self, ModelError> {
        let out_dim = rows.len();
        if out_dim == 0 {
            return Err(ModelError::invalid("w", "layer has no rows"));
        }
        let in_dim = rows[0].len();
        if in_dim == 0 {
            return Err(ModelError::invalid("w", "layer has zero-width rows"));
        }
        if let Some(r) = rows.iter().position(|row| row.len() != in_dim) {
            return Err(ModelError::invalid(
                format!("w[{r}]"),
                format!("row has {} entries, expected {in_dim}", rows[r].len()),
            ));
        }
        if bias.len() != out_dim {
            return Err(ModelError::invalid("b", format!("bias has {} entries, expected {out_dim}", bias.len())));
        }
        if rows.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(ModelError::invalid("w", "non-finite parameter"));
        }
        Ok(Self { in_dim, out_dim, weights: rows.into_iter().flatten().collect(), bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.in_dim)
    }

    /// Writes the pre-activation `W x + b` into `z`.
    fn affine(&self, x: &[f64], z: &mut Vec<f64>) {
        z.clear();
        z.extend(self.rows().zip(&self.bias).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
        }));
    }
}

/// Feed-forward network with a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    layers: Vec<DenseLayer>,
}

impl MlpModel {
    pub fn new(input_dim: usize, layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::invalid("layers", "network has no layers"));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != width {
                return Err(ModelError::invalid(
                    format!("layers[{i}].w"),
                    format!("layer takes {} inputs but the previous width is {width}", layer.in_dim),
                ));
            }
            width = layer.out_dim;
        }
        if width != 1 {
            return Err(ModelError::invalid(
                format!("layers[{}]", layers.len() - 1),
                format!("final layer must have width 1, has {width}"),
            ));
        }
        Ok(Self { input_dim, layers })
    }

    /// He-initialised ReLU network with a linear scalar head.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = input_dim;
        for (i, &out) in hidden.iter().chain(std::iter::once(&1)).enumerate() {
            let normal = Normal::new(0.0, (2.0 / width as f64).sqrt()).expect("finite std");
            let rows = (0..out).map(|_| (0..width).map(|_| normal.sample(rng)).collect()).collect();
            let bias = (0..out).map(|_| 0.1 * normal.sample(rng)).collect();
            let act = if i == hidden.len() { Activation::Linear } else { Activation::Relu };
            layers.push(DenseLayer::new(rows, bias, act).expect("consistent shapes"));
            width = out;
        }
        Self::new(input_dim, layers).expect("consistent shapes")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn forward(&self, u: &[f64]) -> Result<f64, ModelError> {
        self.check(u)?;
        Ok(self.forward_unchecked(u))
    }

    /// Reverse-mode gradient. A ReLU whose pre-activation is exactly zero
    /// contributes slope 0.
    pub fn backward(&self, u: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check(u)?;
        Ok(self.forward_backward(u).1)
    }

    fn check(&self, u: &[f64]) -> Result<(), ModelError> {
        if u.len() != self.input_dim {
            return Err(ModelError::DimensionMismatch { expected: self.input_dim, actual: u.len() });
        }
        Ok(())
    }

    fn forward_unchecked(&self, u: &[f64]) -> f64 {
        let mut x = u.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.affine(&x, &mut z);
            if layer.activation == Activation::Relu {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut x, &mut z);
        }
        x[0]
    }

    fn forward_backward(&self, u: &[f64]) -> (f64, Vec<f64>) {
        // pre[i] is the pre-activation of layer i
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut x = u.to_vec();
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.affine(&x, &mut z);
            let out = match layer.activation {
                Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
                Activation::Linear => z.clone(),
            };
            pre.push(z);
            x = out;
        }
        let value = x[0];

        let mut delta = vec![1.0];
        for (layer, z) in self.layers.iter().zip(&pre).rev() {
            if layer.activation == Activation::Relu {
                for (d, &zv) in delta.iter_mut().zip(z) {
                    if zv <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let mut back = vec![0.0; layer.in_dim];
            for (row, &d) in layer.rows().zip(&delta) {
                if d != 0.0 {
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += w * d;
                    }
                }
            }
            delta = back;
        }
        (value, delta)
    }
}

impl ObjectiveModel for MlpModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.input_dim);
        self.forward_unchecked(u)
    }

    fn value_and_grad(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        debug_assert_eq!(u.len(), self.input_dim);
        Some(self.forward_backward(u))
    }
}

/// Closed-form test functions.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticForm {
    /// `a·u + b`
    Affine { a: Vec<f64>, b: f64 },
    /// `max(0, a·u + b)`
    ReluAffine { a: Vec<f64>, b: f64 },
    /// `Σ c_d (u_d − m_d)²`
    Quadratic { c: Vec<f64>, m: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticModel {
    input_dim: usize,
    form: AnalyticForm,
}

impl AnalyticModel {
    pub fn new(input_dim: usize, form: AnalyticForm) -> Result<Self, ModelError> {
        let check = |field: &str, v: &[f64]| {
            if v.len() != input_dim {
                return Err(ModelError::invalid(
                    format!("params.{field}"),
                    format!("has {} entries, expected input_dim = {input_dim}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::invalid(format!("params.{field}"), "non-finite entry"));
            }
            Ok(())
        };
        match &form {
            AnalyticForm::Affine { a, b } | AnalyticForm::ReluAffine { a, b } => {
                check("a", a)?;
                if !b.is_finite() {
                    return Err(ModelError::invalid("params.b", "non-finite"));
                }
            }
            AnalyticForm::Quadratic { c, m } => {
                check("c", c)?;
                check("m", m)?;
            }
        }
        Ok(Self { input_dim, form })
    }

    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        Self::new(a.len(), AnalyticForm::Affine { a, b }).expect("finite parameters")
    }

    pub fn relu_affine(a: Vec<f64>, b: f64) -> Self {
        Self::new(a.len(), AnalyticForm::ReluAffine { a, b }).expect("finite parameters")
    }

    pub fn quadratic(c: Vec<f64>, m: Vec<f64>) -> Self {
        Self::new(c.len(), AnalyticForm::Quadratic { c, m }).expect("matching lengths")
    }

    pub fn constant(input_dim: usize, value: f64) -> Self {
        Self::affine(vec![0.0; input_dim], value)
    }

    pub fn form(&self) -> &AnalyticForm {
        &self.form
    }
}

fn dot(a: &[f64], u: &[f64]) -> f64 {
    a.iter().zip(u).map(|(a, u)| a * u).sum()
}

impl ObjectiveModel for AnalyticModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict(&self, u: &[f64]) -> f64 {
        match &self.form {
            AnalyticForm::Affine { a, b } => dot(a, u) + b,
            AnalyticForm::ReluAffine { a, b } => (dot(a, u) + b).max(0.0),
            AnalyticForm::Quadratic { c, m } => {
                c.iter().zip(m).zip(u).map(|((c, m), u)| c * (u - m) * (u - m)).sum()
            }
        }
    }

    fn value_and_grad(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        let out = match &self.form {
            AnalyticForm::Affine { a, b } => (dot(a, u) + b, a.clone()),
            AnalyticForm::ReluAffine { a, b } => {
                let z = dot(a, u) + b;
                if z > 0.0 {
                    (z, a.clone())
                } else {
                    (0.0, vec![0.0; a.len()])
                }
            }
            AnalyticForm::Quadratic { c, m } => {
                let value = self.predict(u);
                let grad = c.iter().zip(m).zip(u).map(|((c, m), u)| 2.0 * c * (u - m)).collect();
                (value, grad)
            }
        };
        Some(out)
    }
}

/// Conservative estimate `E[F] + α·std[F]` built from a mean model and a
/// standard-deviation model. Negative std predictions are clipped to zero.
#[derive(Debug, Clone)]
pub struct UncertaintyAdjusted {
    inner: SharedModel,
    std_model: SharedModel,
    alpha: f64,
}

impl UncertaintyAdjusted {
    pub fn new(inner: SharedModel, std_model: SharedModel, alpha: f64) -> Result<Self, ModelError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(ModelError::invalid("alpha", "must be finite and non-negative"));
        }
        if inner.input_dim() != std_model.input_dim() {
            return Err(ModelError::invalid(
                "std",
                format!("std model takes {} inputs, mean model {}", std_model.input_dim(), inner.input_dim()),
            ));
        }
        Ok(Self { inner, std_model, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn inner(&self) -> &SharedModel {
        &self.inner
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ModelError> {
        Self::new(self.inner.clone(), self.std_model.clone(), alpha)
    }
}

impl ObjectiveModel for UncertaintyAdjusted {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn predict(&self, u: &[f64]) -> f64 {
        self.inner.predict(u) + self.alpha * self.std_model.predict(u).max(0.0)
    }

    fn value_and_grad(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (mean, mut grad) = self.inner.value_and_grad(u)?;
        if self.alpha == 0.0 {
            return Some((mean, grad));
        }
        let (std, std_grad) = self.std_model.value_and_grad(u)?;
        if std > 0.0 {
            for (g, s) in grad.iter_mut().zip(&std_grad) {
                *g += self.alpha * s;
            }
        }
        Some((mean + self.alpha * std.max(0.0), grad))
    }

    fn std(&self, u: &[f64]) -> Option<f64> {
        Some(self.std_model.predict(u).max(0.0))
    }

    fn std_grad(&self, u: &[f64]) -> Option<Vec<f64>> {
        let (std, grad) = self.std_model.value_and_grad(u)?;
        Some(if std > 0.0 { grad } else { vec![0.0; grad.len()] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Minimize,
    Maximize,
}

/// An objective: a model plus its optimisation direction.
///
/// `bounds`, when given, are the hard `[F^L, F^U]` limits in the model's own
/// (unoriented) units.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub name: String,
    pub direction: Direction,
    pub model: SharedModel,
    pub bounds: Option<(f64, f64)>,
}

impl ObjectiveSpec {
    pub fn minimize(name: impl Into<String>, model: impl ObjectiveModel + 'static) -> Self {
        Self { name: name.into(), direction: Direction::Minimize, model: Arc::new(model), bounds: None }
    }

    pub fn maximize(name: impl Into<String>, model: impl ObjectiveModel + 'static) -> Self {
        Self { direction: Direction::Maximize, ..Self::minimize(name, model) }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.bounds = Some((lower, upper));
        self
    }

    fn sign(&self) -> f64 {
        match self.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        }
    }

    /// Model value turned into a quantity to minimise.
    pub fn oriented_predict(&self, u: &[f64]) -> f64 {
        self.sign() * self.model.predict(u)
    }

    pub fn oriented_value_and_grad(&self, u: &[f64]) -> Result<(f64, Vec<f64>), SolveError> {
        let (v, mut g) = self
            .model
            .value_and_grad(u)
            .ok_or_else(|| SolveError::MissingGradient { name: self.name.clone() })?;
        let s = self.sign();
        if s < 0.0 {
            g.iter_mut().for_each(|x| *x = -*x);
        }
        Ok((s * v, g))
    }

    /// Hard bounds expressed in the oriented (minimised) frame.
    pub fn oriented_bounds(&self) -> Option<(f64, f64)> {
        self.bounds.map(|(lo, hi)| match self.direction {
            Direction::Minimize => (lo, hi),
            Direction::Maximize => (-hi, -lo),
        })
    }

    /// Converts an oriented value back to model units.
    pub fn unorient(&self, value: f64) -> f64 {
        self.sign() * value
    }
}

// ---------------------------------------------------------------------------
// Model files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: Activation,
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    Mlp {
        input_dim: usize,
        layers: Vec<LayerFile>,
    },
    Analytic {
        form: String,
        params: serde_json::Map<String, serde_json::Value>,
        input_dim: usize,
    },
    UncertaintyAdjusted {
        inner: Box<ModelFile>,
        std: Box<ModelFile>,
        alpha: f64,
    },
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Replaces `alpha` in every uncertainty-adjusted model.
    pub alpha_override: Option<f64>,
}

impl ModelFile {
    pub fn build(&self, opts: &LoadOptions) -> Result<SharedModel, ModelError> {
        match self {
            ModelFile::Mlp { input_dim, layers } => {
                let layers = layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        DenseLayer::new(l.w.clone(), l.b.clone(), l.act).map_err(|e| prefix(e, &format!("layers[{i}]")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Arc::new(MlpModel::new(*input_dim, layers)?))
            }
            ModelFile::Analytic { form, params, input_dim } => {
                let vec_param = |key: &str| -> Result<Vec<f64>, ModelError> {
                    let v = params.get(key).ok_or_else(|| ModelError::invalid(format!("params.{key}"), "missing"))?;
                    serde_json::from_value(v.clone())
                        .map_err(|e| ModelError::invalid(format!("params.{key}"), e.to_string()))
                };
                let scalar_param = |key: &str| -> Result<f64, ModelError> {
                    let v = params.get(key).ok_or_else(|| ModelError::invalid(format!("params.{key}"), "missing"))?;
                    v.as_f64().ok_or_else(|| ModelError::invalid(format!("params.{key}"), "expected a number"))
                };
                let form = match form.as_str() {
                    "affine" => AnalyticForm::Affine { a: vec_param("a")?, b: scalar_param("b")? },
                    "relu_affine" => AnalyticForm::ReluAffine { a: vec_param("a")?, b: scalar_param("b")? },
                    "quadratic" => AnalyticForm::Quadratic { c: vec_param("c")?, m: vec_param("m")? },
                    other => return Err(ModelError::invalid("form", format!("unknown analytic form `{other}`"))),
                };
                Ok(Arc::new(AnalyticModel::new(*input_dim, form)?))
            }
            ModelFile::UncertaintyAdjusted { inner, std, alpha } => {
                let inner = inner.build(opts).map_err(|e| prefix(e, "inner"))?;
                let std = std.build(opts).map_err(|e| prefix(e, "std"))?;
                Ok(Arc::new(UncertaintyAdjusted::new(inner, std, opts.alpha_override.unwrap_or(*alpha))?))
            }
        }
    }

    pub fn from_mlp(model: &MlpModel) -> Self {
        ModelFile::Mlp {
            input_dim: model.input_dim,
            layers: model
                .layers
                .iter()
                .map(|l| LayerFile { w: l.rows().map(<[f64]>::to_vec).collect(), b: l.bias.clone(), act: l.activation })
                .collect(),
        }
    }

    pub fn from_analytic(model: &AnalyticModel) -> Self {
        let mut params = serde_json::Map::new();
        let form = match &model.form {
            AnalyticForm::Affine { a, b } | AnalyticForm::ReluAffine { a, b } => {
                params.insert("a".into(), serde_json::json!(a));
                params.insert("b".into(), serde_json::json!(b));
                if matches!(model.form, AnalyticForm::Affine { .. }) { "affine" } else { "relu_affine" }
            }
            AnalyticForm::Quadratic { c, m } => {
                params.insert("c".into(), serde_json::json!(c));
                params.insert("m".into(), serde_json::json!(m));
                "quadratic"
            }
        };
        ModelFile::Analytic { form: form.into(), params, input_dim: model.input_dim }
    }
}

fn prefix(err: ModelError, at: &str) -> ModelError {
    match err {
        ModelError::Invalid { field, reason } => ModelError::Invalid { field: format!("{at}.{field}"), reason },
        other => other,
    }
}

pub fn parse_model(text: &str, opts: &LoadOptions) -> Result<SharedModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.build(opts)
}

/// Reads and validates a model file. Errors carry the file path.
pub fn load_model(path: impl AsRef<Path>) -> Result<SharedModel, ModelError> {
    load_model_with(path, &LoadOptions::default())
}

pub fn load_model_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<SharedModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::from(e).at(path))?;
    parse_model(&text, opts).map_err(|e| e.at(path))
}
