//! Learned similarity between a query embedding and a class feature.
//!
//! The comparator is an MLP over the concatenation `[f_q ‖ f_s]` (query
//! first) with widths `[2d, h, 8, 1]`, rectifier hidden layers and a sigmoid
//! output. It is trained episodically with a mean-squared error against
//! 1/0 same-class targets while the embedding stays frozen, unless joint
//! fine-tuning is requested.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::embedding::EmbeddingModel;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, Matrix, NORM_EPS};
use crate::losses::{mse_similarity_grad, mse_similarity_loss};
use crate::nn::{Gradients, Mlp, OutputActivation};
use crate::optim::AdamState;
use crate::sampler::{batch_episodes, Episode};

pub const DEFAULT_HIDDEN: usize = 64;
/// Width of the penultimate layer.
pub const HEAD_WIDTH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparator {
    net: Mlp,
}

impl Comparator {
    /// `[2·embed_dim, hidden, 8, 1]`, Glorot-initialized.
    pub fn new<R: Rng + ?Sized>(embed_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let net = Mlp::new(
            &[2 * embed_dim, hidden, HEAD_WIDTH, 1],
            OutputActivation::Sigmoid,
            rng,
        )?;
        Ok(Comparator { net })
    }

    pub fn from_network(net: Mlp) -> Result<Self> {
        if net.output_activation() != OutputActivation::Sigmoid
            || net.output_dim() != 1
            || !net.input_dim().is_multiple_of(2)
        {
            return Err(Error::Config(
                "comparator network must map an even-width input to one sigmoid output".into(),
            ));
        }
        Ok(Comparator { net })
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

    pub fn embed_dim(&self) -> usize {
        self.net.input_dim() / 2
    }

    /// Similarity of a query to a support/class feature, in `(0, 1)`.
    pub fn score(&self, query: &[f64], support: &[f64]) -> Result<f64> {
        let d = self.embed_dim();
        check_dim(d, query.len())?;
        check_dim(d, support.len())?;
        let mut input = Vec::with_capacity(2 * d);
        input.extend_from_slice(query);
        input.extend_from_slice(support);
        let out = self.net.forward(&Matrix::from_vec(1, 2 * d, input)?)?;
        Ok(out[(0, 0)])
    }

    /// Scores for a batch of already concatenated pairs, one per row.
    pub fn score_pairs(&self, pairs: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.forward(pairs)?.into_vec())
    }
}

/// Element-wise sum of one class's support embeddings, optionally rescaled to
/// unit length.
pub fn class_feature<S: AsRef<[f64]>>(embeddings: &[S], renormalize: bool) -> Result<Vec<f64>> {
    let Some(first) = embeddings.first() else {
        return Err(Error::EmptySupport);
    };
    let mut sum = vec![0.0; first.as_ref().len()];
    for e in embeddings {
        check_dim(sum.len(), e.as_ref().len())?;
        for (s, v) in sum.iter_mut().zip(e.as_ref()) {
            *s += v;
        }
    }
    if renormalize {
        crate::linalg::l2_normalize(&sum)
    } else {
        Ok(sum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparatorTrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    /// Episodes pooled into each optimizer step.
    pub episodes_per_batch: usize,
    pub way: usize,
    pub shot: usize,
    pub queries: usize,
    pub lr: f64,
    pub renormalize_class_feature: bool,
}

impl Default for ComparatorTrainConfig {
    fn default() -> Self {
        ComparatorTrainConfig {
            epochs: 50,
            batches_per_epoch: 10,
            episodes_per_batch: 4,
            way: 5,
            shot: 1,
            queries: 5,
            lr: 0.001,
            renormalize_class_feature: false,
        }
    }
}

impl ComparatorTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs < 1 || self.batches_per_epoch < 1 {
            return fail("epochs and batches_per_epoch must be at least 1");
        }
        if self.episodes_per_batch < 1 {
            return fail("episodes_per_batch must be at least 1");
        }
        if self.way < 2 || self.shot < 1 || self.queries < 1 {
            return fail("episodes need way >= 2, shot >= 1 and queries >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorEpoch {
    pub epoch: usize,
    /// Mean MSE over the epoch's batches.
    pub loss: f64,
}

/// Embedding access during comparator training.
enum EmbeddingMode<'a> {
    Frozen(&'a EmbeddingModel),
    Joint(&'a mut EmbeddingModel, AdamState),
}

impl EmbeddingMode<'_> {
    fn model(&self) -> &EmbeddingModel {
        match self {
            EmbeddingMode::Frozen(m) => m,
            EmbeddingMode::Joint(m, _) => m,
        }
    }
}

/// Trains the comparator on episodes drawn from `ds`; the embedding is only
/// read.
pub fn train_comparator<R: Rng + ?Sized>(
    comparator: &mut Comparator,
    embedding: &EmbeddingModel,
    ds: &LabeledDataset,
    cfg: &ComparatorTrainConfig,
    rng: &mut R,
) -> Result<Vec<ComparatorEpoch>> {
    run_training(comparator, EmbeddingMode::Frozen(embedding), ds, cfg, rng)
}

/// Like [`train_comparator`], but the MSE gradient also flows back into the
/// embedding, which gets its own Adam state with the same learning rate.
pub fn train_comparator_joint<R: Rng + ?Sized>(
    comparator: &mut Comparator,
    embedding: &mut EmbeddingModel,
    ds: &LabeledDataset,
    cfg: &ComparatorTrainConfig,
    rng: &mut R,
) -> Result<Vec<ComparatorEpoch>> {
    let adam = AdamState::new(cfg.lr);
    run_training(
        comparator,
        EmbeddingMode::Joint(embedding, adam),
        ds,
        cfg,
        rng,
    )
}

fn run_training<R: Rng + ?Sized>(
    comparator: &mut Comparator,
    mut embedding: EmbeddingMode<'_>,
    ds: &LabeledDataset,
    cfg: &ComparatorTrainConfig,
    rng: &mut R,
) -> Result<Vec<ComparatorEpoch>> {
    cfg.validate()?;
    check_dim(comparator.embed_dim(), embedding.model().embed_dim())?;
    check_dim(embedding.model().input_dim(), ds.dim())?;
    let mut adam = AdamState::new(cfg.lr);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..cfg.batches_per_epoch {
            let episodes = batch_episodes(
                ds,
                cfg.episodes_per_batch,
                cfg.way,
                cfg.shot,
                cfg.queries,
                rng,
            )?;
            let joint = matches!(embedding, EmbeddingMode::Joint(..));
            let step =
                episode_batch_step(comparator, embedding.model(), ds, &episodes, cfg, joint)?;
            total += step.loss;
            adam.step(
                &mut comparator.network_mut().tensors_mut(),
                &step.comparator_grads.tensors(),
            )?;
            if let EmbeddingMode::Joint(model, embed_adam) = &mut embedding {
                let grads = step
                    .embedding_grads
                    .expect("joint step computes embedding gradients");
                embed_adam.step(&mut model.network_mut().tensors_mut(), &grads.tensors())?;
            }
        }
        trace.push(ComparatorEpoch {
            epoch,
            loss: total / cfg.batches_per_epoch as f64,
        });
    }
    Ok(trace)
}

struct BatchStep {
    loss: f64,
    comparator_grads: Gradients,
    embedding_grads: Option<Gradients>,
}

/// One pooled mini-batch: every (query, class) pair of every episode is
/// scored and regressed towards 1 (same class) or 0.
fn episode_batch_step(
    comparator: &Comparator,
    embedding: &EmbeddingModel,
    ds: &LabeledDataset,
    episodes: &[Episode],
    cfg: &ComparatorTrainConfig,
    embedding_grads: bool,
) -> Result<BatchStep> {
    let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
    for ep in episodes {
        for &(r, _) in ep.support.iter().chain(&ep.query) {
            let next = slots.len();
            slots.entry(r).or_insert(next);
        }
    }
    let mut rows = vec![0; slots.len()];
    for (&r, &s) in &slots {
        rows[s] = r;
    }
    let cache = embedding.forward_cached(&ds.features().select_rows(&rows))?;
    let f = cache.output();
    let d = f.cols();

    struct Pair {
        query: usize,
        support: Vec<usize>,
        sum_norm: f64,
    }
    let mut pairs = Vec::new();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for ep in episodes {
        let classes: Vec<(Label, Vec<usize>, Vec<f64>, f64)> = ep
            .classes()
            .into_iter()
            .map(|c| {
                let support: Vec<usize> = ep.support_rows(c).iter().map(|r| slots[r]).collect();
                let members: Vec<&[f64]> = support.iter().map(|&s| f.row(s)).collect();
                let sum = class_feature(&members, false)?;
                let n = norm(&sum);
                let feature = if cfg.renormalize_class_feature {
                    if !(n > NORM_EPS) {
                        return Err(Error::DegenerateVector { norm: n });
                    }
                    sum.iter().map(|v| v / n).collect()
                } else {
                    sum
                };
                Ok((c, support, feature, n))
            })
            .collect::<Result<_>>()?;
        for &(qr, ql) in &ep.query {
            let q = slots[&qr];
            for (c, support, feature, n) in &classes {
                inputs.extend_from_slice(f.row(q));
                inputs.extend_from_slice(feature);
                targets.push(if ql == *c { 1.0 } else { 0.0 });
                pairs.push(Pair {
                    query: q,
                    support: support.clone(),
                    sum_norm: *n,
                });
            }
        }
    }
    let x = Matrix::from_vec(targets.len(), 2 * d, inputs)?;
    let net_cache = comparator.network().forward_cached(&x)?;
    let scores = net_cache.output().as_slice();
    let loss = mse_similarity_loss(scores, &targets)?;
    let d_scores = mse_similarity_grad(scores, &targets)?;
    let upstream = Matrix::from_vec(targets.len(), 1, d_scores)?;
    let (comparator_grads, d_input) = comparator.network().backward(&net_cache, &upstream)?;
    if !embedding_grads {
        return Ok(BatchStep {
            loss,
            comparator_grads,
            embedding_grads: None,
        });
    }

    let mut d_embed = Matrix::zeros(f.rows(), d);
    for (k, pair) in pairs.iter().enumerate() {
        let row = d_input.row(k);
        for (dst, src) in d_embed.row_mut(pair.query).iter_mut().zip(&row[..d]) {
            *dst += src;
        }
        let mut d_feature = row[d..].to_vec();
        if cfg.renormalize_class_feature {
            // back through sum / ‖sum‖
            let unit: Vec<f64> = {
                let members: Vec<&[f64]> = pair.support.iter().map(|&s| f.row(s)).collect();
                class_feature(&members, true)?
            };
            let proj: f64 = unit.iter().zip(&d_feature).map(|(u, g)| u * g).sum();
            for (g, u) in d_feature.iter_mut().zip(&unit) {
                *g = (*g - u * proj) / pair.sum_norm;
            }
        }
        for &s in &pair.support {
            for (dst, src) in d_embed.row_mut(s).iter_mut().zip(&d_feature) {
                *dst += src;
            }
        }
    }
    let (embedding_grads, _) = embedding.backward_cached(&cache, &d_embed)?;
    Ok(BatchStep {
        loss,
        comparator_grads,
        embedding_grads: Some(embedding_grads),
    })
}

/// MSE of `comparator` over a fixed set of episodes, without updating
/// anything. Useful for monitoring and gradient checks.
pub fn episode_mse(
    comparator: &Comparator,
    embedding: &EmbeddingModel,
    ds: &LabeledDataset,
    episodes: &[Episode],
    renormalize_class_feature: bool,
) -> Result<f64> {
    let cfg = ComparatorTrainConfig {
        renormalize_class_feature,
        ..ComparatorTrainConfig::default()
    };
    Ok(episode_batch_step(comparator, embedding, ds, episodes, &cfg, false)?.loss)
}

/// Comparator and embedding gradients of [`episode_mse`].
pub fn episode_mse_grads(
    comparator: &Comparator,
    embedding: &EmbeddingModel,
    ds: &LabeledDataset,
    episodes: &[Episode],
    renormalize_class_feature: bool,
) -> Result<(Gradients, Gradients)> {
    let cfg = ComparatorTrainConfig {
        renormalize_class_feature,
        ..ComparatorTrainConfig::default()
    };
    let step = episode_batch_step(comparator, embedding, ds, episodes, &cfg, true)?;
    Ok((
        step.comparator_grads,
        step.embedding_grads.expect("always computed"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_gaussian, SynthSpec};
    use crate::nn::Dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn score_in_open_interval_and_order_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Comparator::new(4, 16, &mut rng).unwrap();
        assert_eq!(c.layer_dims(), &[8, 16, 8, 1]);
        let q = [0.5, -0.5, 0.5, 0.5];
        let s = [1.0, 0.0, 0.0, 0.0];
        let a = c.score(&q, &s).unwrap();
        let b = c.score(&s, &q).unwrap();
        assert!(a > 0.0 && a < 1.0);
        assert_ne!(a, b);
        let huge = [1e6, -1e6, 1e6, -1e6];
        let h = c.score(&huge, &huge).unwrap();
        assert!(h > 0.0 && h < 1.0);
        assert!(c.score(&q, &s[..3]).is_err());
    }

    #[test]
    fn hand_sized_forward() {
        // d = 2, h = 3
        let l1 = Dense {
            weights: Matrix::from_rows(&[
                [0.1, -0.2, 0.3],
                [0.4, 0.5, -0.6],
                [-0.7, 0.8, 0.9],
                [1.0, -1.1, 1.2],
            ])
            .unwrap(),
            bias: vec![0.01, 0.02, -0.03],
        };
        let l2 = Dense {
            weights: Matrix::from_vec(3, 8, (0..24).map(|i| (i as f64 - 12.0) / 20.0).collect())
                .unwrap(),
            bias: vec![0.05; 8],
        };
        let l3 = Dense {
            weights: Matrix::from_vec(8, 1, (0..8).map(|i| 0.3 - i as f64 * 0.1).collect())
                .unwrap(),
            bias: vec![-0.1],
        };
        let c = Comparator::from_network(
            Mlp::from_layers(
                vec![l1.clone(), l2.clone(), l3.clone()],
                OutputActivation::Sigmoid,
            )
            .unwrap(),
        )
        .unwrap();
        let x = [0.6, 0.8, -1.0, 0.0];
        let relu = |v: f64| if v > 0.0 { v } else { 0.0 };
        let h1: Vec<f64> = (0..3)
            .map(|j| relu(l1.bias[j] + (0..4).map(|k| x[k] * l1.weights[(k, j)]).sum::<f64>()))
            .collect();
        let h2: Vec<f64> = (0..8)
            .map(|j| relu(l2.bias[j] + (0..3).map(|k| h1[k] * l2.weights[(k, j)]).sum::<f64>()))
            .collect();
        let z = l3.bias[0] + (0..8).map(|k| h2[k] * l3.weights[(k, 0)]).sum::<f64>();
        let expected = 1.0 / (1.0 + (-z).exp());
        assert!((c.score(&x[..2], &x[2..]).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn class_feature_cases() {
        let v = [0.6, 0.8];
        assert_eq!(class_feature(&[v], false).unwrap(), vec![0.6, 0.8]);
        let two = class_feature(&[v, v], false).unwrap();
        assert_eq!(two, vec![1.2, 1.6]);
        assert!((norm(&two) - 2.0).abs() < 1e-15);
        let renorm = class_feature(&[v, v], true).unwrap();
        assert!((norm(&renorm) - 1.0).abs() < 1e-12);
        let empty: [[f64; 2]; 0] = [];
        assert!(matches!(
            class_feature(&empty, false),
            Err(Error::EmptySupport)
        ));
        assert!(class_feature(&[vec![1.0], vec![1.0, 2.0]], false).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let got = class_feature(&vs, false).unwrap();
        for j in 0..6 {
            let mut s = 0.0;
            for v in &vs {
                s += v[j];
            }
            assert!((got[j] - s).abs() < 1e-12);
        }
    }

    fn setup() -> (LabeledDataset, EmbeddingModel, Comparator) {
        let ds = synth_gaussian(&SynthSpec {
            num_classes: 8,
            per_class: 12,
            dim: 6,
            spread: 0.1,
            seed: 1,
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let emb = EmbeddingModel::new(&[6, 12, 8], &mut rng).unwrap();
        let cmp = Comparator::new(8, 10, &mut rng).unwrap();
        (ds, emb, cmp)
    }

    fn quick() -> ComparatorTrainConfig {
        ComparatorTrainConfig {
            epochs: 15,
            batches_per_epoch: 4,
            episodes_per_batch: 2,
            queries: 3,
            lr: 0.01,
            ..ComparatorTrainConfig::default()
        }
    }

    #[test]
    fn frozen_training_reduces_mse_and_is_deterministic() {
        let (ds, emb, cmp) = setup();
        let run = || {
            let mut c = cmp.clone();
            let t = train_comparator(
                &mut c,
                &emb,
                &ds,
                &quick(),
                &mut ChaCha8Rng::seed_from_u64(4),
            )
            .unwrap();
            (c, t)
        };
        let (c1, t1) = run();
        let (c2, t2) = run();
        assert_eq!(t1, t2);
        assert_eq!(c1, c2);
        assert_eq!(t1.len(), 15);
        assert!(t1.last().unwrap().loss < t1[0].loss);
    }

    #[test]
    fn zero_episodes_per_batch_is_rejected() {
        let (ds, emb, mut cmp) = setup();
        let cfg = ComparatorTrainConfig {
            episodes_per_batch: 0,
            ..quick()
        };
        assert!(matches!(
            train_comparator(&mut cmp, &emb, &ds, &cfg, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn joint_training_moves_the_embedding() {
        let (ds, mut emb, mut cmp) = setup();
        let before = emb.clone();
        train_comparator_joint(
            &mut cmp,
            &mut emb,
            &ds,
            &quick(),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert_ne!(before, emb);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (ds, emb, cmp) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let episodes = batch_episodes(&ds, 2, 3, 2, 2, &mut rng).unwrap();
        for renorm in [false, true] {
            let (gc, ge) = episode_mse_grads(&cmp, &emb, &ds, &episodes, renorm).unwrap();
            let h = 1e-5;
            let check = |fd: f64, an: f64| {
                let denom = fd.abs().max(an.abs());
                assert!(
                    denom < 1e-9 || (fd - an).abs() / denom < 1e-4,
                    "fd {fd} analytic {an}"
                );
            };
            let gc_t: Vec<Vec<f64>> = gc.tensors().iter().map(|t| t.to_vec()).collect();
            let mut probe = cmp.clone();
            for (t, g) in gc_t.iter().enumerate() {
                for i in (0..g.len()).step_by(7) {
                    let orig = probe.network_mut().tensors_mut()[t][i];
                    probe.network_mut().tensors_mut()[t][i] = orig + h;
                    let up = episode_mse(&probe, &emb, &ds, &episodes, renorm).unwrap();
                    probe.network_mut().tensors_mut()[t][i] = orig - h;
                    let down = episode_mse(&probe, &emb, &ds, &episodes, renorm).unwrap();
                    probe.network_mut().tensors_mut()[t][i] = orig;
                    check((up - down) / (2.0 * h), g[i]);
                }
            }
            let ge_t: Vec<Vec<f64>> = ge.tensors().iter().map(|t| t.to_vec()).collect();
            let mut probe = emb.clone();
            for (t, g) in ge_t.iter().enumerate() {
                for i in (0..g.len()).step_by(5) {
                    let orig = probe.network_mut().tensors_mut()[t][i];
                    probe.network_mut().tensors_mut()[t][i] = orig + h;
                    let up = episode_mse(&cmp, &probe, &ds, &episodes, renorm).unwrap();
                    probe.network_mut().tensors_mut()[t][i] = orig - h;
                    let down = episode_mse(&cmp, &probe, &ds, &episodes, renorm).unwrap();
                    probe.network_mut().tensors_mut()[t][i] = orig;
                    check((up - down) / (2.0 * h), g[i]);
                }
            }
        }
    }
}
