//! Dataset shared by the training examples: class means live in the first
//! `SIGNAL` coordinates, and the remaining coordinates carry shared,
//! class-independent noise. A learned metric that suppresses the noisy
//! coordinates transfers to unseen classes.

use ktuplet::linalg::Matrix;
use ktuplet::{Label, LabeledDataset};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const SIGNAL: usize = 4;
pub const DIM: usize = 16;

pub fn nuisance_blobs(
    num_classes: usize,
    per_class: usize,
    seed: u64,
) -> ktuplet::Result<LabeledDataset> {
    let mut rng = ktuplet::rng(seed);
    let within = Normal::new(0.0, 0.25).unwrap();
    let nuisance = Normal::new(0.0, 1.0).unwrap();
    let mut values = Vec::with_capacity(num_classes * per_class * DIM);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for class in 0..num_classes {
        let mean: Vec<f64> = (0..SIGNAL).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..per_class {
            values.extend(mean.iter().map(|m| m + within.sample(&mut rng)));
            values.extend((SIGNAL..DIM).map(|_| nuisance.sample(&mut rng)));
            labels.push(class as Label);
        }
    }
    LabeledDataset::new(Matrix::from_vec(labels.len(), DIM, values)?, labels)
}
