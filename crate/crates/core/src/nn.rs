//! Fully-connected networks with rectifier hidden layers and hand-written
//! backpropagation. Both the embedding and the comparator are built on
//! [`Mlp`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

/// Activation applied after the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
}

/// Smallest and largest values a sigmoid output is clamped to, keeping scores
/// inside the open unit interval even when the logistic saturates.
const SIGMOID_FLOOR: f64 = f64::MIN_POSITIVE;
const SIGMOID_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn sigmoid(z: f64) -> f64 {
    (1.0 / (1.0 + (-z).exp())).clamp(SIGMOID_FLOOR, SIGMOID_CEIL)
}

/// One affine layer. `weights` is `in × out` so that a batch `X` (rows are
/// samples) maps to `X · W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            weights: Matrix::zeros(n_in, n_out),
            bias: vec![0.0; n_out],
        }
    }

    /// Glorot-uniform weights in `±√(6/(n_in+n_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let values = (0..n_in * n_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Dense {
            weights: Matrix::from_vec(n_in, n_out, values).expect("shape matches"),
            bias: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.cols()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut z = x.matmul(&self.weights).expect("caller checked widths");
        for i in 0..z.rows() {
            for (v, b) in z.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.n_in(), l.n_out()))
                .collect(),
        }
    }

    /// Weight then bias for each layer, in layer order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Matrix>,
    /// Final network output (after the output activation).
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<Dense>,
    output: OutputActivation,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "layer dims {dims:?} need at least two positive entries"
            )));
        }
        let layers = dims
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        Ok(Mlp {
            dims: dims.to_vec(),
            layers,
            output,
        })
    }

    /// Builds a network from explicit layers, checking that widths chain.
    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Config("network needs at least one layer".into()));
        };
        let mut dims = vec![first.n_in()];
        for l in &layers {
            check_dim(*dims.last().unwrap(), l.n_in())?;
            check_dim(l.n_out(), l.bias.len())?;
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::Config("network parameters must be finite".into()));
            }
            dims.push(l.n_out());
        }
        Ok(Mlp {
            dims,
            layers,
            output,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Mutable parameter tensors in the same order as [`Gradients::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        check_dim(self.input_dim(), x.cols())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(&current);
            inputs.push(current);
            if i < last {
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.output == OutputActivation::Sigmoid {
                z.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            current = z;
        }
        Ok(ForwardCache {
            inputs,
            output: current,
        })
    }

    /// Backpropagates `upstream = ∂L/∂output` through the network. Returns
    /// parameter gradients and `∂L/∂input`.
    ///
    /// The rectifier derivative at exactly zero is taken as zero.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Gradients, Matrix)> {
        check_dim(cache.output.rows(), upstream.rows())?;
        check_dim(cache.output.cols(), upstream.cols())?;
        let mut delta = upstream.clone();
        if self.output == OutputActivation::Sigmoid {
            for (d, &s) in delta.as_mut_slice().iter_mut().zip(cache.output.as_slice()) {
                *d *= s * (1.0 - s);
            }
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let weights = input.t_matmul(&delta)?;
            let mut bias = vec![0.0; layer.n_out()];
            for row in delta.row_iter() {
                for (b, d) in bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            grads.push(Dense { weights, bias });
            let mut d_input = delta.matmul_t(&layer.weights)?;
            if i > 0 {
                // input of layer i is relu output of layer i-1
                for (d, &a) in d_input.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = d_input;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }
}
