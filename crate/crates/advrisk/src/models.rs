//! Small dense classifiers and synthetic datasets.
//!
//! The models here exist to exercise the attack and estimation pipeline,
//! not to win benchmarks: a linear softmax classifier and a fully
//! connected MLP with relu or tanh hidden layers. Weights live in one flat
//! `Vec<f64>` (per layer: row-major weight matrix, then bias vector) so
//! they serialize to the model file format without reshaping.
//!
//! Everything is deterministic given a seed. Prediction ties resolve to
//! the lowest class index, and the relu subgradient at exactly zero is
//! taken as zero.

use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::domain::{Dataset, Observation};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Tanh => write!(f, "tanh"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!(
                "unknown activation {other:?}, expected \"relu\" or \"tanh\""
            ))),
        }
    }
}

/// Network shape. Rendered as `linear` or `mlp:<h1,h2,...>:<activation>`
/// in model files and CLI flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Architecture {
    Linear,
    Mlp {
        hidden: Vec<usize>,
        activation: Activation,
    },
}

impl Architecture {
    /// Per-layer `(fan_in, fan_out)` pairs for given input/output widths.
    fn layer_dims(&self, dim: usize, num_classes: usize) -> Vec<(usize, usize)> {
        match self {
            Architecture::Linear => vec![(dim, num_classes)],
            Architecture::Mlp { hidden, .. } => {
                let mut dims = Vec::with_capacity(hidden.len() + 1);
                let mut prev = dim;
                for &h in hidden {
                    dims.push((prev, h));
                    prev = h;
                }
                dims.push((prev, num_classes));
                dims
            }
        }
    }

    fn hidden_activation(&self) -> Option<Activation> {
        match self {
            Architecture::Linear => None,
            Architecture::Mlp { activation, .. } => Some(*activation),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Architecture::Mlp { hidden, .. } = self {
            if hidden.is_empty() {
                return Err(Error::invalid("mlp needs at least one hidden layer"));
            }
            if hidden.contains(&0) {
                return Err(Error::invalid("hidden layer sizes must be positive"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Linear => write!(f, "linear"),
            Architecture::Mlp { hidden, activation } => {
                let sizes: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
                write!(f, "mlp:{}:{}", sizes.join(","), activation)
            }
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "linear" {
            return Ok(Architecture::Linear);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 || parts[0] != "mlp" {
            return Err(Error::invalid(format!(
                "unknown architecture {s:?}, expected \"linear\" or \"mlp:<sizes>:<relu|tanh>\""
            )));
        }
        let hidden = parts[1]
            .split(',')
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad hidden layer size {p:?}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let arch = Architecture::Mlp {
            hidden,
            activation: parts[2].parse()?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

/// Training hyperparameters for [`train`].
#[derive(Clone, Debug)]
pub struct Hyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 32,
            l2: 0.0,
            seed: 0,
        }
    }
}

impl Hyper {
    fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be finite and > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !self.l2.is_finite() || self.l2 < 0.0 {
            return Err(Error::invalid("l2 penalty must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Immutable classifier. Construct via [`Predictor::init`],
/// [`Predictor::from_parts`] or [`train`].
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    model_id: String,
    arch: Architecture,
    dim: usize,
    num_classes: usize,
    weights: Vec<f64>,
}

/// Intermediate state of one forward pass, kept for backpropagation.
struct Trace {
    /// Activations per layer boundary; `activations[0]` is the input.
    activations: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
}

impl Predictor {
    fn weight_count(arch: &Architecture, dim: usize, num_classes: usize) -> usize {
        arch.layer_dims(dim, num_classes)
            .iter()
            .map(|(fi, fo)| fi * fo + fo)
            .sum()
    }

    fn check_shape(
        model_id: &str,
        arch: &Architecture,
        dim: usize,
        num_classes: usize,
    ) -> Result<()> {
        if model_id.is_empty() {
            return Err(Error::invalid("model id must be nonempty"));
        }
        if model_id.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
            return Err(Error::invalid(format!(
                "model id {model_id:?} contains tab or newline"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        arch.validate()
    }

    /// Fresh predictor with every parameter of a layer drawn uniformly
    /// from `(-1/sqrt(fan_in), +1/sqrt(fan_in))`.
    pub fn init(
        model_id: impl Into<String>,
        arch: Architecture,
        dim: usize,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let model_id = model_id.into();
        Self::check_shape(&model_id, &arch, dim, num_classes)?;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(Self::weight_count(&arch, dim, num_classes));
        for (fan_in, fan_out) in arch.layer_dims(dim, num_classes) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out + fan_out {
                weights.push(rng.random_range(-bound..bound));
            }
        }
        Ok(Predictor {
            model_id,
            arch,
            dim,
            num_classes,
            weights,
        })
    }

    /// Rebuilds a predictor from serialized parts, validating the weight
    /// count and finiteness.
    pub fn from_parts(
        model_id: impl Into<String>,
        arch: Architecture,
        dim: usize,
        num_classes: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let model_id = model_id.into();
        Self::check_shape(&model_id, &arch, dim, num_classes)?;
        let expected = Self::weight_count(&arch, dim, num_classes);
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("model weights must be finite"));
        }
        Ok(Predictor {
            model_id,
            arch,
            dim,
            num_classes,
            weights,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same parameters under a different id; used when a stored model is
    /// loaded for comparison runs.
    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Result<Self> {
        let model_id = model_id.into();
        Self::check_shape(&model_id, &self.arch, self.dim, self.num_classes)?;
        self.model_id = model_id;
        Ok(self)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model input must be finite"));
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Trace {
        let dims = self.arch.layer_dims(self.dim, self.num_classes);
        let act = self.arch.hidden_activation();
        let mut activations = Vec::with_capacity(dims.len() + 1);
        let mut pre = Vec::with_capacity(dims.len());
        activations.push(x.to_vec());
        let mut offset = 0;
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let w = &self.weights[offset..offset + fan_in * fan_out];
            let b = &self.weights[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let input = &activations[l];
            let mut z = vec![0.0; fan_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                *zo = row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>() + b[o];
            }
            let a = if l + 1 == dims.len() {
                z.clone()
            } else {
                let act = act.expect("hidden layer implies mlp");
                z.iter().map(|&v| act.apply(v)).collect()
            };
            pre.push(z);
            activations.push(a);
        }
        Trace { activations, pre }
    }

    /// Raw class scores.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let trace = self.forward(x);
        Ok(trace.activations.last().cloned().unwrap_or_default())
    }

    /// Predicted class: argmax over logits, ties to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let logits = self.logits(x)?;
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Cross-entropy of the softmax distribution against `label`.
    pub fn cross_entropy(&self, x: &[f64], label: usize) -> Result<f64> {
        self.check_input(x)?;
        if label >= self.num_classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.num_classes
            )));
        }
        let trace = self.forward(x);
        let logits = trace.activations.last().unwrap();
        Ok(log_sum_exp(logits) - logits[label])
    }

    /// Gradient of the cross-entropy loss at `(x, label)` with respect to
    /// the input coordinates.
    pub fn input_gradient(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if label >= self.num_classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.num_classes
            )));
        }
        let trace = self.forward(x);
        let (_, input_grad) = self.backward(&trace, label);
        Ok(input_grad)
    }

    /// Backpropagation from the softmax cross-entropy at the output.
    /// Returns (gradient w.r.t. all weights, gradient w.r.t. the input).
    fn backward(&self, trace: &Trace, label: usize) -> (Vec<f64>, Vec<f64>) {
        let dims = self.arch.layer_dims(self.dim, self.num_classes);
        let act = self.arch.hidden_activation();
        let logits = trace.activations.last().unwrap();
        let mut dz = softmax(logits);
        dz[label] -= 1.0;

        let mut weight_grad = vec![0.0; self.weights.len()];
        let mut layer_offsets = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &(fi, fo) in &dims {
            layer_offsets.push(offset);
            offset += fi * fo + fo;
        }

        let mut input_grad = Vec::new();
        for l in (0..dims.len()).rev() {
            let (fan_in, fan_out) = dims[l];
            let base = layer_offsets[l];
            let w = &self.weights[base..base + fan_in * fan_out];
            let input = &trace.activations[l];
            for o in 0..fan_out {
                let g = &mut weight_grad[base + o * fan_in..base + (o + 1) * fan_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi = dz[o] * xi;
                }
            }
            for o in 0..fan_out {
                weight_grad[base + fan_in * fan_out + o] = dz[o];
            }
            let mut da = vec![0.0; fan_in];
            for (o, &dzo) in dz.iter().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                for (dai, wi) in da.iter_mut().zip(row) {
                    *dai += dzo * wi;
                }
            }
            if l == 0 {
                input_grad = da;
            } else {
                let act = act.expect("hidden layer implies mlp");
                let z_prev = &trace.pre[l - 1];
                dz = da
                    .iter()
                    .zip(z_prev)
                    .map(|(d, &z)| d * act.derivative(z))
                    .collect();
            }
        }
        (weight_grad, input_grad)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|&v| (v - lse).exp()).collect()
}

/// Mean cross-entropy over a dataset. Errors on an empty dataset.
pub fn mean_cross_entropy(p: &Predictor, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset for loss evaluation".into()));
    }
    let mut total = 0.0;
    for o in ds.observations() {
        total += p.cross_entropy(o.features(), o.label())?;
    }
    Ok(total / ds.len() as f64)
}

/// Fraction of observations predicted correctly.
pub fn accuracy(p: &Predictor, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset for accuracy".into()));
    }
    let mut hits = 0usize;
    for o in ds.observations() {
        if p.predict(o.features())? == o.label() {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

/// Plain minibatch SGD on softmax cross-entropy with an optional L2
/// penalty. Deterministic given `hyper.seed`: the seed drives both weight
/// initialization and the per-epoch shuffle. `epochs == 0` returns the
/// initialized model untouched. Fails if the loss stops being finite.
pub fn train(
    model_id: impl Into<String>,
    arch: Architecture,
    ds: &Dataset,
    hyper: &Hyper,
) -> Result<Predictor> {
    hyper.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("training dataset".into()));
    }
    let mut p = Predictor::init(model_id, arch, ds.dim(), ds.num_classes(), hyper.seed)?;
    let mut rng = StdRng::seed_from_u64(hyper.seed);
    // Burn the draws the initializer consumed so shuffling does not replay
    // the initialization stream.
    for _ in 0..p.weights.len() {
        let _: f64 = rng.random();
    }
    let mut indices: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..hyper.epochs {
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(hyper.batch_size) {
            let mut grad = vec![0.0; p.weights.len()];
            for &i in chunk {
                let o = &ds.observations()[i];
                let trace = p.forward(o.features());
                let (wg, _) = p.backward(&trace, o.label());
                for (g, wgi) in grad.iter_mut().zip(&wg) {
                    *g += wgi;
                }
            }
            let scale = hyper.learning_rate / chunk.len() as f64;
            for (w, g) in p.weights.iter_mut().zip(&grad) {
                *w -= scale * g + hyper.learning_rate * hyper.l2 * *w;
            }
        }
        let loss = mean_cross_entropy(&p, ds)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "loss became non-finite after epoch {}",
                epoch + 1
            )));
        }
    }
    Ok(p)
}

/// Families of synthetic datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Isotropic gaussian clusters, one per class, centers on a circle
    /// (or evenly spaced when `dim == 1`).
    GaussianBlobs,
    /// Two interleaved half-circles; requires `dim == 2`, 2 classes.
    TwoMoons,
    /// Uniform points in `[-1,1]^2` labelled by the XOR of the quadrant
    /// signs; requires `dim == 2`, 2 classes. Not linearly separable.
    XorGrid,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticKind::GaussianBlobs => write!(f, "gaussian-blobs"),
            SyntheticKind::TwoMoons => write!(f, "two-moons"),
            SyntheticKind::XorGrid => write!(f, "xor-grid"),
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-blobs" => Ok(SyntheticKind::GaussianBlobs),
            "two-moons" => Ok(SyntheticKind::TwoMoons),
            "xor-grid" => Ok(SyntheticKind::XorGrid),
            other => Err(Error::invalid(format!(
                "unknown dataset kind {other:?}"
            ))),
        }
    }
}

/// Recipe for [`generate_dataset`].
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub dim: usize,
    pub num_classes: usize,
    /// Standard deviation of the gaussian jitter added to each coordinate.
    pub noise: f64,
    pub seed: u64,
}

const BLOB_RADIUS: f64 = 3.0;

/// Deterministic synthetic dataset. Labels are assigned round-robin, so
/// class counts are balanced to within one. Zero noise yields exact
/// geometric positions (blob centers, moon arcs, grid points).
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    if !spec.noise.is_finite() || spec.noise < 0.0 {
        return Err(Error::invalid("noise must be finite and >= 0"));
    }
    match spec.kind {
        SyntheticKind::TwoMoons | SyntheticKind::XorGrid => {
            if spec.dim != 2 {
                return Err(Error::invalid(format!(
                    "{} requires dim == 2, got {}",
                    spec.kind, spec.dim
                )));
            }
            if spec.num_classes != 2 {
                return Err(Error::invalid(format!(
                    "{} requires exactly 2 classes, got {}",
                    spec.kind, spec.num_classes
                )));
            }
        }
        SyntheticKind::GaussianBlobs => {
            if spec.dim == 0 {
                return Err(Error::invalid("dim must be at least 1"));
            }
            if spec.num_classes < 2 {
                return Err(Error::invalid("need at least 2 classes"));
            }
        }
    }

    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut observations = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let label = i % spec.num_classes;
        let mut features = match spec.kind {
            SyntheticKind::GaussianBlobs => blob_center(label, spec.num_classes, spec.dim),
            SyntheticKind::TwoMoons => {
                let t = rng.random_range(0.0..std::f64::consts::PI);
                if label == 0 {
                    vec![t.cos(), t.sin()]
                } else {
                    vec![1.0 - t.cos(), 0.5 - t.sin()]
                }
            }
            SyntheticKind::XorGrid => {
                let x = rng.random_range(-1.0..1.0);
                let y = rng.random_range(-1.0..1.0);
                vec![x, y]
            }
        };
        // The xor label comes from the point itself, not from round-robin
        // assignment.
        let label = if spec.kind == SyntheticKind::XorGrid {
            usize::from((features[0] > 0.0) != (features[1] > 0.0))
        } else {
            label
        };
        for v in features.iter_mut() {
            *v += spec.noise * standard_normal(&mut rng);
        }
        observations.push(Observation::new(format!("x{i:06}"), features, label)?);
    }
    Dataset::new(observations, spec.dim, spec.num_classes)
}

fn blob_center(class: usize, num_classes: usize, dim: usize) -> Vec<f64> {
    let mut center = vec![0.0; dim];
    if dim == 1 {
        center[0] = 4.0 * class as f64 - 2.0 * (num_classes as f64 - 1.0);
    } else {
        let angle = 2.0 * std::f64::consts::PI * class as f64 / num_classes as f64;
        center[0] = BLOB_RADIUS * angle.cos();
        center[1] = BLOB_RADIUS * angle.sin();
    }
    center
}

/// Box-Muller transform over the rng's uniform stream.
pub(crate) fn standard_normal(rng: &mut StdRng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
