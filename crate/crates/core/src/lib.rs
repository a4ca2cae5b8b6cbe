//! Deep K-tuplet metric learning on feature vectors.
//!
//! The pipeline has three stages:
//!
//! 1. Train a unit-norm embedding with the K-tuplet hinge loss, switching to
//!    the semi-hard filtered loss late in training ([`train`]).
//! 2. Optionally train a comparator network that scores (query, class)
//!    embedding pairs ([`comparator`]).
//! 3. Evaluate C-way K-shot episodes with 1-NN Euclid or the comparator and
//!    report mean accuracy with a 95% interval ([`evaluator`]).
//!
//! All randomness flows through explicitly seeded ChaCha8 generators.

pub mod checkpoint;
pub mod cli;
pub mod comparator;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod evaluator;
pub mod linalg;
pub mod losses;
pub mod nn;
pub mod optim;
pub mod sampler;
pub mod train;

pub use comparator::{class_feature, train_comparator, Comparator, ComparatorTrainConfig};
pub use dataset::{split_by_class, synth_gaussian, Label, LabeledDataset, SplitSpec, SynthSpec};
pub use embedding::EmbeddingModel;
pub use error::{Error, Result};
pub use evaluator::{ci95, evaluate, nn_classify, similarity_classify, EvalConfig, EvalReport};
pub use linalg::{l2_normalize, pairwise_sq_dist, squared_euclidean, Matrix};
pub use losses::{
    k_tuplet_grad, k_tuplet_loss, semi_hard_filter, semi_hard_loss, EmbeddedTuplet, FilterMode,
    LossConfig, Objective,
};
pub use optim::{lr_schedule, AdamState};
pub use sampler::{batch_episodes, sample_episode, sample_tuplets, Episode, Tuplet, TupletBatch};
pub use train::{train_embedding, EmbedTrainConfig, TrainTrace};

/// Seeded generator used everywhere in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Convenience constructor for [`Rng`].
pub fn rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
