//! Dense feed-forward networks with exact analytic gradients.
//!
//! Everything is double precision and single-threaded. A [`DenseNet`] is a
//! chain of affine layers, each followed by `tanh` or the identity. Forward
//! passes return a [`ForwardCache`] that [`DenseNet::backward`] consumes; the
//! cache records the network revision so gradients are never computed
//! against parameters that changed after the forward pass.
//!
//! Weights are stored row-major with shape `(outputs, inputs)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current version of the JSON weights document.
pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("forward cache does not belong to this network state (stale or foreign cache)")]
    StaleCache,
    #[error("training diverged: {0}")]
    TrainingDiverged(String),
    #[error("malformed weights document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch {
                context: "matrix construction",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. An empty slice gives a `0 x 0` matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(NnError::ShapeMismatch {
                    context: "matrix rows",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so guard zero-width matrices.
        let width = self.cols.max(1);
        self.data.chunks_exact(width).take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Self> {
        if self.rows > 0 && other.rows > 0 && self.cols != other.cols {
            return Err(NnError::ShapeMismatch {
                context: "vstack",
                expected: self.cols,
                found: other.cols,
            });
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }

    /// Copies the column range `start..end` into a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

/// Glorot-uniform weight matrix of shape `(fan_out, fan_in)`.
///
/// Entries are drawn from `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(NnError::InvalidArchitecture(format!(
            "xavier init needs positive fans, got fan_in={fan_in}, fan_out={fan_out}"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(NnError::InvalidArchitecture("empty weight matrix".into()));
        }
        if biases.len() != weights.rows() {
            return Err(NnError::ShapeMismatch {
                context: "layer biases",
                expected: weights.rows(),
                found: biases.len(),
            });
        }
        Ok(Self {
            inputs: weights.cols(),
            outputs: weights.rows(),
            activation,
            weights: weights.data,
            biases,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn forward_into(&self, input: &Matrix, out: &mut Matrix) {
        for r in 0..input.rows() {
            let x = input.row(r);
            let y = out.row_mut(r);
            for (o, (yo, w)) in y.iter_mut().zip(self.weights.chunks_exact(self.inputs)).enumerate() {
                let mut acc = self.biases[o];
                for (wi, xi) in w.iter().zip(x) {
                    acc += wi * xi;
                }
                *yo = self.activation.apply(acc);
            }
        }
    }
}

/// Cached activations of one forward pass: `activations[0]` is the input,
/// `activations[k + 1]` the output of layer `k`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    shape: Vec<usize>,
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds at least the input")
    }

    /// Output of layer `layer` (0-based).
    pub fn layer_output(&self, layer: usize) -> &Matrix {
        &self.activations[layer + 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Partial derivatives of a scalar loss, one entry per network parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    fn congruent_with(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Layer>,
    revision: u64,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl DenseNet {
    /// Xavier-initialized network with the given layer sizes. `hidden` applies
    /// to every layer except the last, which uses `output`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(NnError::InvalidArchitecture(format!(
                "need at least input and output sizes, got {sizes:?}"
            )));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (k, pair) in sizes.windows(2).enumerate() {
            let weights = xavier_init(pair[0], pair[1], rng)?;
            let activation = if k + 2 == sizes.len() { output } else { hidden };
            layers.push(Layer::new(weights, vec![0.0; pair[1]], activation)?);
        }
        Ok(Self { layers, revision: 0 })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::InvalidArchitecture("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(NnError::InvalidArchitecture(format!(
                    "layer output {} does not chain into layer input {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        Ok(Self { layers, revision: 0 })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters in layer order (weights row-major, then biases).
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    /// Overwrites the parameter with flat index `index` (ordering as in [`DenseNet::parameters`]).
    pub fn set_parameter(&mut self, mut index: usize, value: f64) {
        self.revision += 1;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if index < nw {
                layer.weights[index] = value;
                return;
            }
            index -= nw;
            if index < layer.biases.len() {
                layer.biases[index] = value;
                return;
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Batched forward pass over the rows of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                context: "network input",
                expected: self.input_dim(),
                found: x.cols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let input = activations.last().expect("non-empty");
            let mut out = Matrix::zeros(input.rows(), layer.outputs);
            layer.forward_into(input, &mut out);
            activations.push(out);
        }
        let output = activations.last().expect("non-empty").clone();
        Ok((
            output,
            ForwardCache {
                revision: self.revision,
                shape: self.layer_sizes(),
                activations,
            },
        ))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                context: "network input",
                expected: self.input_dim(),
                found: x.cols(),
            });
        }
        let mut current = x.clone();
        for layer in &self.layers {
            let mut out = Matrix::zeros(current.rows(), layer.outputs);
            layer.forward_into(&current, &mut out);
            current = out;
        }
        Ok(current)
    }

    /// Output of hidden layer `layer` (0-based) for every row of `x`.
    pub fn layer_output(&self, x: &Matrix, layer: usize) -> Result<Matrix> {
        if layer >= self.layers.len() {
            return Err(NnError::InvalidArchitecture(format!(
                "layer {layer} out of range for {} layers",
                self.layers.len()
            )));
        }
        let (_, cache) = self.forward(x)?;
        Ok(cache.layer_output(layer).clone())
    }

    /// Gradients of a scalar loss given `dL/d(output)` for every row.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Matrix) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_accumulate(cache, d_output, &mut grads, false)?;
        Ok(grads)
    }

    /// Like [`DenseNet::backward`] but also returns `dL/d(input)`.
    pub fn backward_with_input(
        &self,
        cache: &ForwardCache,
        d_output: &Matrix,
    ) -> Result<(Gradients, Matrix)> {
        let mut grads = Gradients::zeros_like(self);
        let d_input = self
            .backward_accumulate(cache, d_output, &mut grads, true)?
            .expect("input gradient requested");
        Ok((grads, d_input))
    }

    /// Adds this pass's gradients into `grads`; optionally returns `dL/d(input)`.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        d_output: &Matrix,
        grads: &mut Gradients,
        want_input_grad: bool,
    ) -> Result<Option<Matrix>> {
        if cache.revision != self.revision
            || cache.shape != self.layer_sizes()
            || cache.activations.len() != self.layers.len() + 1
        {
            return Err(NnError::StaleCache);
        }
        if !grads.congruent_with(self) {
            return Err(NnError::InvalidArchitecture(
                "gradient buffer does not match network".into(),
            ));
        }
        let rows = cache.activations[0].rows();
        if d_output.rows() != rows || d_output.cols() != self.output_dim() {
            return Err(NnError::ShapeMismatch {
                context: "output gradient",
                expected: rows * self.output_dim(),
                found: d_output.rows() * d_output.cols(),
            });
        }

        let mut upstream = d_output.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[k];
            let output = &cache.activations[k + 1];
            // delta = dL/d(pre-activation)
            let mut delta = upstream;
            for (d, y) in delta.as_mut_slice().iter_mut().zip(output.as_slice()) {
                *d *= layer.activation.derivative_from_output(*y);
            }
            let g = &mut grads.layers[k];
            let n_in = layer.inputs;
            for r in 0..rows {
                let x = &input.row(r)[..n_in];
                let dr = delta.row(r);
                for (gb, &d) in g.biases.iter_mut().zip(dr) {
                    *gb += d;
                }
                for (gw, &d) in g.weights.chunks_exact_mut(n_in).zip(dr) {
                    for (gwi, &xi) in gw.iter_mut().zip(x) {
                        *gwi += d * xi;
                    }
                }
            }
            if k == 0 && !want_input_grad {
                return Ok(None);
            }
            let mut d_input = Matrix::zeros(rows, n_in);
            for r in 0..rows {
                let di = &mut d_input.row_mut(r)[..n_in];
                for (w, &d) in layer.weights.chunks_exact(n_in).zip(delta.row(r)) {
                    for (dii, &wi) in di.iter_mut().zip(w) {
                        *dii += d * wi;
                    }
                }
            }
            upstream = d_input;
        }
        Ok(Some(upstream))
    }

    pub fn to_document(&self) -> WeightsDocument {
        WeightsDocument {
            format_version: WEIGHTS_FORMAT_VERSION,
            layer_sizes: self.layer_sizes(),
            activations: self.layers.iter().map(|l| l.activation).collect(),
            weights: self.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.layers.iter().map(|l| l.biases.clone()).collect(),
        }
    }

    pub fn from_document(doc: &WeightsDocument) -> Result<Self> {
        if doc.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(NnError::Format(format!(
                "unsupported format_version {} (expected {WEIGHTS_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let n_layers = doc.layer_sizes.len().saturating_sub(1);
        if n_layers == 0
            || doc.activations.len() != n_layers
            || doc.weights.len() != n_layers
            || doc.biases.len() != n_layers
        {
            return Err(NnError::Format(
                "layer_sizes, activations, weights and biases disagree on layer count".into(),
            ));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let (fan_in, fan_out) = (doc.layer_sizes[k], doc.layer_sizes[k + 1]);
            let w = Matrix::from_vec(fan_out, fan_in, doc.weights[k].clone())
                .map_err(|e| NnError::Format(format!("layer {k}: {e}")))?;
            layers.push(Layer::new(w, doc.biases[k].clone(), doc.activations[k])?);
        }
        Self::from_layers(layers)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.to_document()).map_err(|e| NnError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WeightsDocument =
            serde_json::from_str(text).map_err(|e| NnError::Format(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// Versioned, lossless JSON form of a [`DenseNet`]. `serde_json` prints
/// shortest round-trip decimals, so every `f64` survives exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDocument {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl Adam {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        Self {
            config,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.first
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.second
    }

    /// One bias-corrected Adam update. Non-finite gradients leave both the
    /// network and the optimizer untouched.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if !grads.congruent_with(net) || !self.first.congruent_with(net) {
            return Err(NnError::InvalidArchitecture(
                "gradients do not match the optimized network".into(),
            ));
        }
        if !grads.is_finite() {
            return Err(NnError::TrainingDiverged("non-finite gradient entry".into()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        };
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[k];
            let (m, v) = (&mut self.first.layers[k], &mut self.second.layers[k]);
            for i in 0..layer.weights.len() {
                update(&mut layer.weights[i], g.weights[i], &mut m.weights[i], &mut v.weights[i]);
            }
            for i in 0..layer.biases.len() {
                update(&mut layer.biases[i], g.biases[i], &mut m.biases[i], &mut v.biases[i]);
            }
        }
        net.revision += 1;
        Ok(())
    }
}

/// Mini-batch training settings shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    /// Autoencoder stage defaults: lr 0.005, batch 512, 800 epochs.
    pub fn autoencoder() -> Self {
        Self {
            learning_rate: 0.005,
            batch_size: 512,
            epochs: 800,
            seed: 0,
        }
    }

    /// One-class stage defaults: lr 0.001, batch 16, 300 epochs.
    pub fn one_class() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 16,
            epochs: 300,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NnError::InvalidArchitecture("batch size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::InvalidArchitecture("learning rate must be positive".into()));
        }
        Ok(())
    }
}
