//! Tuplet batches for embedding training and C-way K-shot episodes for
//! comparator training and evaluation.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

/// An anchor, one same-class positive and `negatives.len()` out-of-class
/// negatives, all as row indices into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuplet {
    pub anchor: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

pub type TupletBatch = Vec<Tuplet>;

/// Draws `batch_size` tuplets.
///
/// Anchors are uniform over all rows, positives uniform over the other rows
/// of the anchor's class, and each negative independently uniform over every
/// row with a different label (duplicates allowed).
pub fn sample_tuplets<R: Rng + ?Sized>(
    ds: &LabeledDataset,
    batch_size: usize,
    k_neg: usize,
    rng: &mut R,
) -> Result<TupletBatch> {
    if k_neg < 1 {
        return Err(Error::Config("k_neg must be at least 1".into()));
    }
    if ds.num_classes() < 2 {
        return Err(Error::Sampling(
            "tuplet sampling needs at least two classes".into(),
        ));
    }
    let n = ds.len();
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let anchor = rng.random_range(0..n);
        let label = ds.label(anchor);
        let class_rows = ds.rows_of(label);
        if class_rows.len() < 2 {
            return Err(Error::Sampling(format!(
                "class {label} has a single sample; no positive exists"
            )));
        }
        // uniform over class rows other than the anchor
        let pos_slot = rng.random_range(0..class_rows.len() - 1);
        let anchor_slot = class_rows
            .binary_search(&anchor)
            .expect("anchor is listed in its class");
        let positive = class_rows[if pos_slot >= anchor_slot {
            pos_slot + 1
        } else {
            pos_slot
        }];

        let outside = n - class_rows.len();
        let negatives = (0..k_neg)
            .map(|_| nth_outside(class_rows, rng.random_range(0..outside)))
            .collect();
        batch.push(Tuplet {
            anchor,
            positive,
            negatives,
        });
    }
    Ok(batch)
}

/// The `k`-th row index (ascending) that is not in the sorted `excluded` list.
fn nth_outside(excluded: &[usize], k: usize) -> usize {
    let mut row = k;
    for &e in excluded {
        if e <= row {
            row += 1;
        } else {
            break;
        }
    }
    row
}

/// One C-way K-shot task. Support entries are grouped by class in the order
/// the classes were drawn; queries follow the same class order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    pub support: Vec<(usize, Label)>,
    pub query: Vec<(usize, Label)>,
}

impl Episode {
    /// Distinct support labels in the order they were drawn.
    pub fn classes(&self) -> Vec<Label> {
        let mut seen = BTreeSet::new();
        self.support
            .iter()
            .filter_map(|&(_, l)| seen.insert(l).then_some(l))
            .collect()
    }

    /// Support rows belonging to `label`.
    pub fn support_rows(&self, label: Label) -> Vec<usize> {
        self.support
            .iter()
            .filter(|&&(_, l)| l == label)
            .map(|&(r, _)| r)
            .collect()
    }

    /// Checks every structural invariant against the source dataset.
    pub fn validate(&self, ds: &LabeledDataset) -> Result<()> {
        let bad = |m: String| Err(Error::Sampling(m));
        let classes = self.classes();
        if classes.len() != self.way {
            return bad(format!(
                "{} support classes, expected {}",
                classes.len(),
                self.way
            ));
        }
        if self.support.len() != self.way * self.shot {
            return bad(format!("support has {} entries", self.support.len()));
        }
        for c in &classes {
            if self.support_rows(*c).len() != self.shot {
                return bad(format!("class {c} does not have {} shots", self.shot));
            }
        }
        let support_rows: BTreeSet<usize> = self.support.iter().map(|&(r, _)| r).collect();
        if support_rows.len() != self.support.len() {
            return bad("duplicate support rows".into());
        }
        let mut query_rows = BTreeSet::new();
        for &(r, l) in self.support.iter().chain(&self.query) {
            if r >= ds.len() || ds.label(r) != l {
                return bad(format!("row {r} does not carry label {l}"));
            }
        }
        for &(r, l) in &self.query {
            if !classes.contains(&l) {
                return bad(format!("query label {l} is not in the support set"));
            }
            if support_rows.contains(&r) || !query_rows.insert(r) {
                return bad(format!("query row {r} is reused"));
            }
        }
        Ok(())
    }
}

/// Draws one episode. Classes are chosen without replacement among those with
/// at least `shot + n_query` samples; support and query rows within a class
/// are drawn without replacement.
pub fn sample_episode<R: Rng + ?Sized>(
    ds: &LabeledDataset,
    way: usize,
    shot: usize,
    n_query: usize,
    rng: &mut R,
) -> Result<Episode> {
    if way < 1 || shot < 1 {
        return Err(Error::Config("way and shot must be at least 1".into()));
    }
    let needed = shot + n_query;
    let eligible: Vec<Label> = ds
        .class_index()
        .iter()
        .filter(|(_, rows)| rows.len() >= needed)
        .map(|(&l, _)| l)
        .collect();
    if eligible.len() < way {
        return Err(Error::Sampling(format!(
            "{way}-way episodes need {way} classes with at least {needed} samples; only {} qualify",
            eligible.len()
        )));
    }
    let mut support = Vec::with_capacity(way * shot);
    let mut query = Vec::with_capacity(way * n_query);
    let picked: Vec<Label> = index::sample(rng, eligible.len(), way)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    for &label in &picked {
        let rows = ds.rows_of(label);
        let chosen = index::sample(rng, rows.len(), needed).into_vec();
        support.extend(chosen[..shot].iter().map(|&i| (rows[i], label)));
        query.extend(chosen[shot..].iter().map(|&i| (rows[i], label)));
    }
    Ok(Episode {
        way,
        shot,
        support,
        query,
    })
}

/// `count` independent episodes drawn in sequence from `rng`.
pub fn batch_episodes<R: Rng + ?Sized>(
    ds: &LabeledDataset,
    count: usize,
    way: usize,
    shot: usize,
    n_query: usize,
    rng: &mut R,
) -> Result<Vec<Episode>> {
    (0..count)
        .map(|_| sample_episode(ds, way, shot, n_query, rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_gaussian, SynthSpec};
    use crate::linalg::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blobs(classes: usize, per_class: usize) -> LabeledDataset {
        synth_gaussian(&SynthSpec {
            num_classes: classes,
            per_class,
            dim: 3,
            spread: 0.1,
            seed: 0,
        })
        .unwrap()
    }

    fn check_tuplet(ds: &LabeledDataset, t: &Tuplet) {
        assert_eq!(ds.label(t.anchor), ds.label(t.positive));
        assert_ne!(t.anchor, t.positive);
        for &n in &t.negatives {
            assert_ne!(ds.label(n), ds.label(t.anchor));
        }
    }

    #[test]
    fn nth_outside_skips_excluded() {
        let excluded = [1, 2, 5];
        let outside: Vec<usize> = (0..5).map(|k| nth_outside(&excluded, k)).collect();
        assert_eq!(outside, vec![0, 3, 4, 6, 7]);
    }

    #[test]
    fn two_class_negatives_come_from_other_class() {
        let ds = blobs(2, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = sample_tuplets(&ds, 50, 3, &mut rng).unwrap();
        assert_eq!(batch.len(), 50);
        for t in &batch {
            assert_eq!(t.negatives.len(), 3);
            check_tuplet(&ds, t);
        }
    }

    #[test]
    fn anchor_classes_are_uniform() {
        let ds = blobs(4, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 10_000;
        let batch = sample_tuplets(&ds, draws, 1, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for t in &batch {
            counts[ds.label(t.anchor) as usize] += 1;
        }
        let p = 0.25;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma, "{counts:?}");
        }
        // negatives for a fixed anchor class spread over the other rows
        let mut neg_counts = vec![0usize; ds.len()];
        for t in batch.iter().filter(|t| ds.label(t.anchor) == 0) {
            neg_counts[t.negatives[0]] += 1;
        }
        assert!(neg_counts[..10].iter().all(|&c| c == 0));
        assert!(neg_counts[10..].iter().all(|&c| c > 0));
    }

    #[test]
    fn singleton_anchor_class_is_an_error() {
        let features = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let ds = LabeledDataset::new(features, vec![0, 0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let err = (0..100)
            .map(|_| sample_tuplets(&ds, 1, 1, &mut rng))
            .find(|r| r.is_err())
            .expect("class 1 is eventually drawn as anchor");
        assert!(matches!(err, Err(Error::Sampling(_))));
    }

    #[test]
    fn tuplet_config_errors() {
        let ds = blobs(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            sample_tuplets(&ds, 4, 0, &mut rng),
            Err(Error::Config(_))
        ));
        let one_class = ds.subset(&[0].into_iter().collect());
        assert!(sample_tuplets(&one_class, 4, 1, &mut rng).is_err());
    }

    #[test]
    fn episode_cardinality() {
        let ds = blobs(6, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ep = sample_episode(&ds, 5, 1, 1, &mut rng).unwrap();
        assert_eq!(ep.support.len(), 5);
        assert_eq!(ep.query.len(), 5);
        ep.validate(&ds).unwrap();
    }

    #[test]
    fn episode_invariants_hold_over_many_draws() {
        let ds = blobs(8, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..1000 {
            let (way, shot, nq) = (2 + i % 5, 1 + i % 3, 1 + i % 4);
            let ep = sample_episode(&ds, way, shot, nq, &mut rng).unwrap();
            ep.validate(&ds).unwrap();
            assert_eq!(ep.query.len(), way * nq);
            let labels: BTreeSet<_> = ep.support.iter().map(|s| s.1).collect();
            assert!(ep.query.iter().all(|q| labels.contains(&q.1)));
        }
    }

    #[test]
    fn episode_errors() {
        let ds = blobs(4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(
            sample_episode(&ds, 5, 1, 1, &mut rng),
            Err(Error::Sampling(_))
        ));
        assert!(matches!(
            sample_episode(&ds, 2, 3, 3, &mut rng),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn batches_are_deterministic() {
        let ds = blobs(6, 10);
        let a = batch_episodes(&ds, 4, 5, 1, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = batch_episodes(&ds, 4, 5, 1, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, b);
        for ep in &a {
            ep.validate(&ds).unwrap();
        }
    }
}
