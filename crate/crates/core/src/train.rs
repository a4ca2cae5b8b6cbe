//! Embedding training: K-tuplet loss for the first phase, then the semi-hard
//! filtered loss from `switch_epoch` on.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::losses::{tuplet_objective, EmbeddedTuplet, FilterMode, Objective};
use crate::nn::Gradients;
use crate::optim::{lr_schedule, AdamState};
use crate::sampler::{sample_tuplets, Tuplet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedTrainConfig {
    pub epochs: usize,
    /// First epoch that uses the semi-hard loss. `epochs` disables mining.
    pub switch_epoch: usize,
    pub batch_size: usize,
    pub k_neg: usize,
    pub margin: f64,
    pub lr: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub eq2_verbatim: bool,
    /// Optimizer steps per epoch; `None` means `ceil(N / batch_size)`.
    pub batches_per_epoch: Option<usize>,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            epochs: 100,
            switch_epoch: 80,
            batch_size: 64,
            k_neg: 5,
            margin: 0.5,
            lr: 0.001,
            decay_every: 40,
            decay_factor: 0.5,
            eq2_verbatim: false,
            batches_per_epoch: None,
        }
    }
}

impl EmbedTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if self.switch_epoch > self.epochs {
            return fail("switch_epoch cannot exceed epochs");
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if self.k_neg < 1 {
            return fail("k_neg must be at least 1");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return fail("margin must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if self.decay_every < 1 {
            return fail("decay_every must be at least 1");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return fail("decay_factor must be in (0, 1]");
        }
        if self.batches_per_epoch == Some(0) {
            return fail("batches_per_epoch must be at least 1");
        }
        Ok(())
    }

    pub fn objective_for(&self, epoch: usize) -> Objective {
        if epoch < self.switch_epoch {
            Objective::KTuplet
        } else if self.eq2_verbatim {
            Objective::SemiHard(FilterMode::Verbatim)
        } else {
            Objective::SemiHard(FilterMode::Violating)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub objective: Objective,
    /// Mean batch loss over the epoch.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// Largest `|‖f‖ − 1|` over every embedding produced during training.
    pub max_norm_deviation: f64,
}

impl TrainTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

/// Loss, parameter gradients and norm check for one tuplet batch.
#[derive(Debug, Clone)]
pub struct BatchEval {
    pub loss: f64,
    pub grads: Gradients,
    pub max_norm_deviation: f64,
}

/// Embeds every distinct row referenced by `batch` once, averages the
/// per-tuplet objective over the batch and backpropagates it.
pub fn batch_objective(
    model: &EmbeddingModel,
    ds: &LabeledDataset,
    batch: &[Tuplet],
    margin: f64,
    objective: Objective,
) -> Result<BatchEval> {
    if batch.is_empty() {
        return Err(Error::Config("empty tuplet batch".into()));
    }
    let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
    for t in batch {
        for &r in std::iter::once(&t.anchor)
            .chain(std::iter::once(&t.positive))
            .chain(&t.negatives)
        {
            let next = slots.len();
            slots.entry(r).or_insert(next);
        }
    }
    let mut rows = vec![0; slots.len()];
    for (&r, &s) in &slots {
        rows[s] = r;
    }
    let x = ds.features().select_rows(&rows);
    let cache = model.forward_cached(&x)?;
    let f = cache.output();
    let max_norm_deviation = f
        .row_iter()
        .map(|r| (norm(r) - 1.0).abs())
        .fold(0.0, f64::max);

    let scale = 1.0 / batch.len() as f64;
    let mut upstream = Matrix::zeros(f.rows(), f.cols());
    let mut loss = 0.0;
    for t in batch {
        let sa = slots[&t.anchor];
        let sp = slots[&t.positive];
        let sn: Vec<usize> = t.negatives.iter().map(|r| slots[r]).collect();
        let et = EmbeddedTuplet::new(f.row(sa), f.row(sp), sn.iter().map(|&s| f.row(s)).collect());
        let (l, g) = tuplet_objective(&et, margin, objective)?;
        loss += l;
        add_scaled(upstream.row_mut(sa), &g.anchor, scale);
        add_scaled(upstream.row_mut(sp), &g.positive, scale);
        for (&s, gn) in sn.iter().zip(&g.negatives) {
            add_scaled(upstream.row_mut(s), gn, scale);
        }
    }
    let (grads, _) = model.backward_cached(&cache, &upstream)?;
    Ok(BatchEval {
        loss: loss * scale,
        grads,
        max_norm_deviation,
    })
}

fn add_scaled(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s * scale;
    }
}

/// Trains `model` in place and returns the per-epoch trace.
///
/// Each epoch runs `batches_per_epoch` Adam steps on freshly sampled tuplet
/// batches. The learning rate follows [`lr_schedule`] by epoch.
pub fn train_embedding<R: Rng + ?Sized>(
    model: &mut EmbeddingModel,
    ds: &LabeledDataset,
    cfg: &EmbedTrainConfig,
    rng: &mut R,
) -> Result<TrainTrace> {
    cfg.validate()?;
    if ds.dim() != model.input_dim() {
        return Err(Error::Dimension {
            expected: model.input_dim(),
            got: ds.dim(),
        });
    }
    let steps = cfg
        .batches_per_epoch
        .unwrap_or_else(|| ds.len().div_ceil(cfg.batch_size));
    let mut adam = AdamState::new(cfg.lr);
    let mut trace = TrainTrace {
        epochs: Vec::with_capacity(cfg.epochs),
        max_norm_deviation: 0.0,
    };
    for epoch in 0..cfg.epochs {
        let objective = cfg.objective_for(epoch);
        adam.lr = lr_schedule(cfg.lr, epoch, cfg.decay_every, cfg.decay_factor);
        let mut total = 0.0;
        for _ in 0..steps {
            let batch = sample_tuplets(ds, cfg.batch_size, cfg.k_neg, rng)?;
            let eval = batch_objective(model, ds, &batch, cfg.margin, objective)?;
            trace.max_norm_deviation = trace.max_norm_deviation.max(eval.max_norm_deviation);
            total += eval.loss;
            let grads = eval.grads.tensors();
            adam.step(&mut model.network_mut().tensors_mut(), &grads)?;
        }
        trace.epochs.push(EpochRecord {
            epoch,
            lr: adam.lr,
            objective,
            loss: total / steps as f64,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_gaussian, SynthSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data() -> LabeledDataset {
        synth_gaussian(&SynthSpec {
            num_classes: 5,
            per_class: 20,
            dim: 8,
            spread: 0.1,
            seed: 3,
        })
        .unwrap()
    }

    fn quick() -> EmbedTrainConfig {
        EmbedTrainConfig {
            epochs: 12,
            switch_epoch: 8,
            batch_size: 16,
            batches_per_epoch: Some(4),
            decay_every: 5,
            lr: 0.005,
            ..EmbedTrainConfig::default()
        }
    }

    fn model(seed: u64) -> EmbeddingModel {
        EmbeddingModel::new(&[8, 16, 8], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn objective_schedule() {
        let cfg = EmbedTrainConfig::default();
        assert_eq!(cfg.objective_for(79), Objective::KTuplet);
        assert_eq!(
            cfg.objective_for(80),
            Objective::SemiHard(FilterMode::Violating)
        );
        let verbatim = EmbedTrainConfig {
            eq2_verbatim: true,
            ..cfg
        };
        assert_eq!(
            verbatim.objective_for(99),
            Objective::SemiHard(FilterMode::Verbatim)
        );
    }

    #[test]
    fn trace_is_deterministic_and_complete() {
        let ds = data();
        let run = || {
            let mut m = model(1);
            let t =
                train_embedding(&mut m, &ds, &quick(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            (m, t)
        };
        let (m1, t1) = run();
        let (m2, t2) = run();
        assert_eq!(t1, t2);
        assert_eq!(m1, m2);
        assert_eq!(t1.epochs.len(), 12);
        assert!(t1.max_norm_deviation <= 1e-9);
        assert_eq!(t1.epochs[7].objective, Objective::KTuplet);
        assert_eq!(
            t1.epochs[8].objective,
            Objective::SemiHard(FilterMode::Violating)
        );
        assert_eq!(t1.epochs[5].lr, 0.0025);
    }

    #[test]
    fn switch_at_end_never_mines() {
        let ds = data();
        let cfg = EmbedTrainConfig {
            switch_epoch: 12,
            ..quick()
        };
        let t =
            train_embedding(&mut model(1), &ds, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(t.epochs.iter().all(|e| e.objective == Objective::KTuplet));
    }

    #[test]
    fn loss_decreases() {
        let ds = data();
        let cfg = EmbedTrainConfig {
            switch_epoch: 12,
            ..quick()
        };
        let t =
            train_embedding(&mut model(4), &ds, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(t.epochs.last().unwrap().loss < t.epochs[0].loss);
    }

    #[test]
    fn invalid_configs() {
        let ds = data();
        let mut m = model(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for bad in [
            EmbedTrainConfig {
                switch_epoch: 13,
                ..quick()
            },
            EmbedTrainConfig {
                margin: -1.0,
                ..quick()
            },
            EmbedTrainConfig {
                decay_factor: 1.5,
                ..quick()
            },
            EmbedTrainConfig {
                k_neg: 0,
                ..quick()
            },
            EmbedTrainConfig {
                batches_per_epoch: Some(0),
                ..quick()
            },
        ] {
            assert!(matches!(
                train_embedding(&mut m, &ds, &bad, &mut rng),
                Err(Error::Config(_))
            ));
        }
    }
}
