//! The feature embedding: an MLP whose output rows are projected onto the unit
//! sphere.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, Matrix, NORM_EPS};
use crate::nn::{ForwardCache, Gradients, Mlp, OutputActivation};

/// Hidden widths and output dimension used when none are given.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];
pub const DEFAULT_EMBED_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    net: Mlp,
}

/// Forward state needed by [`EmbeddingModel::backward_cached`].
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    net: ForwardCache,
    norms: Vec<f64>,
    output: Matrix,
}

impl EmbeddingCache {
    /// Unit-norm embeddings, one row per input row.
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

impl EmbeddingModel {
    /// Glorot-initialized model with layer widths `dims = [d_in, h_1, ..., d]`.
    /// Hidden layers use rectifiers; the last layer is linear.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        Ok(EmbeddingModel {
            net: Mlp::new(dims, OutputActivation::Identity, rng)?,
        })
    }

    /// `[d_in, 64, 64, 32]`.
    pub fn with_default_dims<R: Rng + ?Sized>(d_in: usize, rng: &mut R) -> Result<Self> {
        let mut dims = vec![d_in];
        dims.extend(DEFAULT_HIDDEN);
        dims.push(DEFAULT_EMBED_DIM);
        Self::new(&dims, rng)
    }

    pub fn from_network(net: Mlp) -> Result<Self> {
        if net.output_activation() != OutputActivation::Identity {
            return Err(Error::Config(
                "embedding network must have a linear output layer".into(),
            ));
        }
        Ok(EmbeddingModel { net })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn layer_dims(&self) -> &[usize] {
        self.net.dims()
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.output)
    }

    /// Embeds one vector.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward(&m)?.into_vec())
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<EmbeddingCache> {
        let net = self.net.forward_cached(x)?;
        let raw = net.output();
        let mut output = raw.clone();
        let mut norms = Vec::with_capacity(raw.rows());
        for i in 0..raw.rows() {
            let n = norm(raw.row(i));
            if !(n > NORM_EPS) {
                return Err(Error::DegenerateVector { norm: n });
            }
            output.row_mut(i).iter_mut().for_each(|v| *v /= n);
            debug_assert!(
                (norm(output.row(i)) - 1.0).abs() <= 1e-9,
                "embedding row {i} lost unit norm"
            );
            norms.push(n);
        }
        Ok(EmbeddingCache { net, norms, output })
    }

    /// Parameter gradients for `upstream = ∂L/∂f`, where `f` is the
    /// normalized output for inputs `x`.
    pub fn backward(&self, x: &Matrix, upstream: &Matrix) -> Result<Gradients> {
        let cache = self.forward_cached(x)?;
        Ok(self.backward_cached(&cache, upstream)?.0)
    }

    /// Backpropagates through normalization and the network. The
    /// normalization Jacobian for row `i` is `(I − f fᵀ) / ‖z‖`. Also returns
    /// `∂L/∂x`.
    pub fn backward_cached(
        &self,
        cache: &EmbeddingCache,
        upstream: &Matrix,
    ) -> Result<(Gradients, Matrix)> {
        check_dim(cache.output.rows(), upstream.rows())?;
        check_dim(cache.output.cols(), upstream.cols())?;
        let mut d_raw = upstream.clone();
        for i in 0..d_raw.rows() {
            let f = cache.output.row(i);
            let g = upstream.row(i);
            let proj: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
            let n = cache.norms[i];
            for ((d, &fj), &gj) in d_raw.row_mut(i).iter_mut().zip(f).zip(g) {
                *d = (gj - fj * proj) / n;
            }
        }
        self.net.backward(&cache.net, &d_raw)
    }
}
