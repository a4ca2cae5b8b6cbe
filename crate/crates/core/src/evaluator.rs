//! Episodic few-shot evaluation.
//!
//! Each episode embeds its support and query rows with a frozen model, builds
//! one feature per class (the embedding itself for one shot, the element-wise
//! sum otherwise), and labels every query either by nearest class feature in
//! squared Euclidean distance or by highest comparator score. Both
//! classifiers break ties towards the lowest label.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparator::{class_feature, Comparator};
use crate::dataset::{Label, LabeledDataset};
use crate::embedding::EmbeddingModel;
use crate::error::{check_dim, Error, Result};
use crate::linalg::sq_dist_unchecked;
use crate::sampler::{batch_episodes, Episode};

pub const DEFAULT_EPISODES: usize = 600;
pub const DEFAULT_QUERIES: usize = 15;

/// Label of the support entry closest to `query`.
pub fn nn_classify<S: AsRef<[f64]>>(query: &[f64], support: &[(S, Label)]) -> Result<Label> {
    let mut best: Option<(f64, Label)> = None;
    for (v, label) in support {
        check_dim(query.len(), v.as_ref().len())?;
        let d = sq_dist_unchecked(query, v.as_ref());
        best = match best {
            Some((bd, bl)) if bd < d || (bd == d && bl <= *label) => Some((bd, bl)),
            _ => Some((d, *label)),
        };
    }
    best.map(|(_, l)| l).ok_or(Error::EmptySupport)
}

/// Label with the highest score.
pub fn argmax_label(scores: &[(f64, Label)]) -> Result<Label> {
    let mut best: Option<(f64, Label)> = None;
    for &(s, label) in scores {
        best = match best {
            Some((bs, bl)) if bs > s || (bs == s && bl <= label) => Some((bs, bl)),
            _ => Some((s, label)),
        };
    }
    best.map(|(_, l)| l).ok_or(Error::EmptySupport)
}

/// Label of the class feature the comparator scores highest against `query`.
pub fn similarity_classify<S: AsRef<[f64]>>(
    comparator: &Comparator,
    query: &[f64],
    class_features: &[(S, Label)],
) -> Result<Label> {
    let scores = class_features
        .iter()
        .map(|(f, l)| Ok((comparator.score(query, f.as_ref())?, *l)))
        .collect::<Result<Vec<_>>>()?;
    argmax_label(&scores)
}

/// `1.96 · s / √n` with the unbiased sample standard deviation. Zero for a
/// single value or a constant array (exactly, regardless of mean rounding).
pub fn ci95(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 || values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    1.96 * var.sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Euclid,
    Similarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub way: usize,
    pub shot: usize,
    pub queries: usize,
    pub episodes: usize,
    pub renormalize_class_feature: bool,
    /// Score episodes on the rayon pool. Results do not depend on it.
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            way: 5,
            shot: 1,
            queries: DEFAULT_QUERIES,
            episodes: DEFAULT_EPISODES,
            renormalize_class_feature: false,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    #[serde(rename = "ci95")]
    pub ci95_halfwidth: f64,
    pub num_episodes: usize,
    #[serde(rename = "per_episode")]
    pub per_episode_accuracies: Vec<f64>,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl EvalReport {
    pub fn from_accuracies(per_episode: Vec<f64>, config: serde_json::Value, seed: u64) -> Self {
        let n = per_episode.len();
        let mean = if n == 0 {
            0.0
        } else {
            per_episode.iter().sum::<f64>() / n as f64
        };
        EvalReport {
            mean_accuracy: mean,
            ci95_halfwidth: ci95(&per_episode),
            num_episodes: n,
            per_episode_accuracies: per_episode,
            config,
            seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fraction of an episode's queries classified correctly.
pub fn episode_accuracy(
    embedding: &EmbeddingModel,
    comparator: Option<&Comparator>,
    ds: &LabeledDataset,
    episode: &Episode,
    renormalize_class_feature: bool,
) -> Result<f64> {
    let support_rows: Vec<usize> = episode.support.iter().map(|&(r, _)| r).collect();
    let query_rows: Vec<usize> = episode.query.iter().map(|&(r, _)| r).collect();
    let support_emb = embedding.forward(&ds.features().select_rows(&support_rows))?;
    let query_emb = embedding.forward(&ds.features().select_rows(&query_rows))?;

    let mut by_class: BTreeMap<Label, Vec<&[f64]>> = BTreeMap::new();
    for (i, &(_, l)) in episode.support.iter().enumerate() {
        by_class.entry(l).or_default().push(support_emb.row(i));
    }
    let features = by_class
        .iter()
        .map(|(&l, members)| {
            let f = if members.len() == 1 && !renormalize_class_feature {
                members[0].to_vec()
            } else {
                class_feature(members, renormalize_class_feature)?
            };
            Ok((f, l))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut correct = 0usize;
    for (i, &(_, truth)) in episode.query.iter().enumerate() {
        let q = query_emb.row(i);
        let predicted = match comparator {
            None => nn_classify(q, &features)?,
            Some(c) => similarity_classify(c, q, &features)?,
        };
        correct += (predicted == truth) as usize;
    }
    Ok(correct as f64 / episode.query.len().max(1) as f64)
}

/// Runs `cfg.episodes` episodes drawn from `ds` with a ChaCha8 stream seeded
/// by `seed`. Euclidean 1-NN is used when `comparator` is `None`.
///
/// Episodes are sampled sequentially before scoring, so the report is the
/// same with or without `cfg.parallel`.
pub fn evaluate(
    embedding: &EmbeddingModel,
    comparator: Option<&Comparator>,
    ds: &LabeledDataset,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<EvalReport> {
    if cfg.episodes < 1 {
        return Err(Error::Config("episodes must be at least 1".into()));
    }
    if cfg.queries < 1 {
        return Err(Error::Config("queries must be at least 1".into()));
    }
    check_dim(embedding.input_dim(), ds.dim())?;
    if let Some(c) = comparator {
        check_dim(embedding.embed_dim(), c.embed_dim())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let episodes = batch_episodes(ds, cfg.episodes, cfg.way, cfg.shot, cfg.queries, &mut rng)?;
    let score = |ep: &Episode| {
        episode_accuracy(embedding, comparator, ds, ep, cfg.renormalize_class_feature)
    };
    let accuracies = if cfg.parallel {
        episodes.par_iter().map(score).collect::<Result<Vec<_>>>()?
    } else {
        episodes.iter().map(score).collect::<Result<Vec<_>>>()?
    };

    let kind = if comparator.is_some() {
        ClassifierKind::Similarity
    } else {
        ClassifierKind::Euclid
    };
    let mut config = serde_json::to_value(cfg)?;
    config["classifier"] = serde_json::to_value(kind)?;
    Ok(EvalReport::from_accuracies(accuracies, config, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn nn_picks_exact_match() {
        let support = vec![(vec![1.0, 0.0], 4), (vec![0.0, 1.0], 9)];
        assert_eq!(nn_classify(&[0.0, 1.0], &support).unwrap(), 9);
    }

    #[test]
    fn nn_ties_go_to_lowest_label() {
        let support = vec![(vec![0.0, 1.0], 7), (vec![0.0, -1.0], 2)];
        assert_eq!(nn_classify(&[0.0, 0.0], &support).unwrap(), 2);
        let reversed = vec![(vec![0.0, -1.0], 2), (vec![0.0, 1.0], 7)];
        assert_eq!(nn_classify(&[0.0, 0.0], &reversed).unwrap(), 2);
    }

    #[test]
    fn nn_errors() {
        let empty: Vec<(Vec<f64>, Label)> = vec![];
        assert!(matches!(
            nn_classify(&[1.0], &empty),
            Err(Error::EmptySupport)
        ));
        assert!(nn_classify(&[1.0], &[(vec![1.0, 2.0], 0)]).is_err());
    }

    #[test]
    fn argmax_cases() {
        assert_eq!(argmax_label(&[(0.2, 3), (0.9, 1), (0.4, 5)]).unwrap(), 1);
        assert_eq!(argmax_label(&[(0.5, 8), (0.5, 6)]).unwrap(), 6);
        assert_eq!(argmax_label(&[(0.01, 42)]).unwrap(), 42);
        assert!(argmax_label(&[]).is_err());
    }

    #[test]
    fn similarity_singleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Comparator::new(3, 4, &mut rng).unwrap();
        let q = [0.0, 0.0, 1.0];
        assert_eq!(
            similarity_classify(&c, &q, &[(vec![1.0, 0.0, 0.0], 17)]).unwrap(),
            17
        );
        let empty: Vec<(Vec<f64>, Label)> = vec![];
        assert!(similarity_classify(&c, &q, &empty).is_err());
    }

    #[test]
    fn ci_cases() {
        assert_eq!(ci95(&[0.7; 10]), 0.0);
        assert_eq!(ci95(&[0.3]), 0.0);
        let two = ci95(&[1.0, 0.0]);
        assert!((two - 1.96 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
        assert!((two - 0.98).abs() < 1e-12);
        // mean 0.5, squared deviations 0.01 + 0.01 + 0 + 0, s² = 0.02 / 3
        let four = ci95(&[0.4, 0.6, 0.5, 0.5]);
        assert!((four - 1.96 * (0.02f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn report_mean_matches_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let acc: Vec<f64> = (0..37).map(|_| rng.random_range(0.0..1.0)).collect();
        let r = EvalReport::from_accuracies(acc.clone(), serde_json::Value::Null, 5);
        let mean = acc.iter().sum::<f64>() / 37.0;
        assert!((r.mean_accuracy - mean).abs() < 1e-12);
        assert_eq!(r.num_episodes, 37);
        let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in [
            "mean_accuracy",
            "ci95",
            "num_episodes",
            "per_episode",
            "config",
            "seed",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
