//! Number of negatives and the semi-hard phase, each varied on its own.
//!
//! `cargo run --release --example ablation`

mod common;

use ktuplet::{
    evaluate, split_by_class, train_embedding, EmbedTrainConfig, EmbeddingModel, EvalConfig,
    SplitSpec,
};

fn main() -> ktuplet::Result<()> {
    let ds = common::nuisance_blobs(20, 50, 3)?;
    let (train, test) = split_by_class(&ds, &SplitSpec::first_n(&ds, 14))?;
    let eval = EvalConfig {
        episodes: 300,
        ..EvalConfig::default()
    };

    let runs = [
        ("K=1", 1, 80),
        ("K=3", 3, 80),
        ("K=5", 5, 80),
        ("K=5, no mining", 5, 100),
    ];
    for (name, k_neg, switch_epoch) in runs {
        let mut model = EmbeddingModel::with_default_dims(ds.dim(), &mut ktuplet::rng(1))?;
        let cfg = EmbedTrainConfig {
            k_neg,
            switch_epoch,
            ..EmbedTrainConfig::default()
        };
        let trace = train_embedding(&mut model, &train, &cfg, &mut ktuplet::rng(2))?;
        let r = evaluate(&model, None, &test, &eval, 7)?;
        println!(
            "{name:<15} final loss {:.4}  accuracy {:.3} ± {:.3}",
            trace.epochs.last().map_or(0.0, |e| e.loss),
            r.mean_accuracy,
            r.ci95_halfwidth
        );
    }
    Ok(())
}
