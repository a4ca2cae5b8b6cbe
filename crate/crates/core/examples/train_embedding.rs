//! Train the embedding and compare 5-way 1-shot accuracy before and after.
//!
//! Episodes are drawn from the held-out classes, and from the training
//! classes for comparison.

mod common;

use ktuplet::{
    evaluate, split_by_class, train_embedding, EmbedTrainConfig, EmbeddingModel, EvalConfig,
    SplitSpec,
};

fn main() -> ktuplet::Result<()> {
    let ds = common::nuisance_blobs(20, 50, 3)?;
    let (train, test) = split_by_class(&ds, &SplitSpec::first_n(&ds, 14))?;

    let mut model = EmbeddingModel::with_default_dims(ds.dim(), &mut ktuplet::rng(1))?;
    let eval = EvalConfig {
        episodes: 300,
        ..EvalConfig::default()
    };
    let before = evaluate(&model, None, &test, &eval, 7)?;
    let seen_before = evaluate(&model, None, &train, &eval, 7)?;

    let cfg = EmbedTrainConfig::default();
    let trace = train_embedding(&mut model, &train, &cfg, &mut ktuplet::rng(2))?;
    for r in trace.epochs.iter().step_by(10) {
        println!(
            "epoch {:>3}  lr {:.5}  {:?}  loss {:.5}",
            r.epoch, r.lr, r.objective, r.loss
        );
    }
    println!(
        "max |norm - 1| during training: {:.1e}",
        trace.max_norm_deviation
    );

    let after = evaluate(&model, None, &test, &eval, 7)?;
    let seen_after = evaluate(&model, None, &train, &eval, 7)?;
    println!(
        "5-way 1-shot, unseen classes: untrained {:.3} ± {:.3}, trained {:.3} ± {:.3}",
        before.mean_accuracy, before.ci95_halfwidth, after.mean_accuracy, after.ci95_halfwidth
    );
    println!(
        "5-way 1-shot, training classes: untrained {:.3}, trained {:.3}",
        seen_before.mean_accuracy, seen_after.mean_accuracy
    );
    Ok(())
}
