//! Small dense networks with hand-written backpropagation and Adam.
//!
//! Two shapes exist: a single linear layer, and two ReLU hidden layers of
//! width 300 followed by a linear head. Batches are `(examples, features)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::GameRng;

pub const HIDDEN_WIDTH: usize = 300;

/// Recorded in every config hash so that changing any of these invalidates
/// old weight files.
pub const NONLINEARITY: &str = "relu";
pub const INIT_SCHEME: &str = "glorot_uniform_zero_bias";
pub const OPTIMIZER: &str = "adam(0.9,0.999,1e-8)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Linear,
    #[serde(rename = "mlp2x300")]
    Mlp2x300,
}

impl Arch {
    pub fn layer_sizes(self, inputs: usize, outputs: usize) -> Vec<usize> {
        match self {
            Arch::Linear => vec![inputs, outputs],
            Arch::Mlp2x300 => vec![inputs, HIDDEN_WIDTH, HIDDEN_WIDTH, outputs],
        }
    }

    pub fn parameter_count(self, inputs: usize, outputs: usize) -> usize {
        self.layer_sizes(inputs, outputs)
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Linear => "linear",
            Arch::Mlp2x300 => "mlp2x300",
        })
    }
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(Arch::Linear),
            "mlp" | "mlp2x300" => Ok(Arch::Mlp2x300),
            _ => Err(format!("unknown architecture '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DenseRepr", into = "DenseRepr")]
pub struct Dense {
    /// `(inputs, outputs)`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct DenseRepr {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<DenseRepr> for Dense {
    fn from(r: DenseRepr) -> Self {
        Dense {
            weights: Array2::from_shape_vec((r.inputs, r.outputs), r.weights)
                .expect("weight count matches shape"),
            bias: Array1::from_vec(r.bias),
        }
    }
}

impl From<Dense> for DenseRepr {
    fn from(d: Dense) -> Self {
        let (inputs, outputs) = d.weights.dim();
        DenseRepr {
            inputs,
            outputs,
            weights: d.weights.iter().copied().collect(),
            bias: d.bias.to_vec(),
        }
    }
}

impl Dense {
    fn glorot(inputs: usize, outputs: usize, rng: &mut GameRng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-limit..limit));
        Dense {
            weights,
            bias: Array1::zeros(outputs),
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }
}

/// Feed-forward network: ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub arch: Arch,
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass for backpropagation.
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Gradients with the same layout as [`Network::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter());
        out.extend(l.bias.iter());
    }
    out
}

impl Network {
    pub fn new(arch: Arch, inputs: usize, outputs: usize, rng: &mut GameRng) -> Self {
        let sizes = arch.layer_sizes(inputs, outputs);
        let layers = sizes
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        Network { arch, layers }
    }

    /// All weights and biases zero.
    pub fn zeros(arch: Arch, inputs: usize, outputs: usize) -> Self {
        let sizes = arch.layer_sizes(inputs, outputs);
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Network { arch, layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("non-empty").weights.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = batch.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = x.dot(&layer.weights);
            y += &layer.bias;
            if i < last {
                y.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(x);
            x = y;
        }
        ForwardCache { inputs, output: x }
    }

    /// Output for a single input row.
    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        let mut x = Array1::from_vec(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = x.dot(&layer.weights);
            y += &layer.bias;
            if i < last {
                y.mapv_inplace(|v| v.max(0.0));
            }
            x = y;
        }
        x.to_vec()
    }

    /// Gradients of a loss given `d loss / d output` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Array2<f64>) -> Gradients {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
            if i > 0 {
                let mut prev = delta.dot(&layer.weights.t());
                // The layer input is a ReLU output: zero where inactive.
                prev.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(
            values.len(),
            self.parameter_count(),
            "flat parameter length"
        );
        let mut it = values.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = *it.next().expect("length checked");
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().expect("length checked");
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Adam with the standard moment constants.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn apply(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value with ties broken uniformly at random.
pub fn argmax_random_ties(values: &[f64], rng: &mut GameRng) -> usize {
    let best = values[argmax(values)];
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean squared error over the selected output of each row, with the
/// gradient with respect to the full output matrix.
pub fn selected_mse(
    output: &Array2<f64>,
    actions: &[usize],
    targets: &[f64],
) -> (f64, Array2<f64>) {
    let n = output.nrows() as f64;
    let mut grad = Array2::zeros(output.raw_dim());
    let mut loss = 0.0;
    for (row, (&a, &t)) in actions.iter().zip(targets).enumerate() {
        let err = output[[row, a]] - t;
        loss += err * err / n;
        grad[[row, a]] = 2.0 * err / n;
    }
    (loss, grad)
}

/// Mean softmax cross-entropy against integer labels, with its gradient.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        let p = softmax(logits.row(row).as_slice().expect("standard layout"));
        loss -= p[label].max(1e-300).ln() / n;
        for (j, pj) in p.iter().enumerate() {
            let indicator = if j == label { 1.0 } else { 0.0 };
            grad[[row, j]] = (pj - indicator) / n;
        }
    }
    (loss, grad)
}
