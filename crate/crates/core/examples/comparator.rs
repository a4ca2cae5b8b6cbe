//! Train a comparator on a frozen embedding and classify with it.

mod common;

use ktuplet::comparator::train_comparator_joint;
use ktuplet::{
    evaluate, split_by_class, train_comparator, train_embedding, Comparator, ComparatorTrainConfig,
    EmbedTrainConfig, EmbeddingModel, EvalConfig, SplitSpec,
};

fn main() -> ktuplet::Result<()> {
    let ds = common::nuisance_blobs(20, 50, 3)?;
    let (train, test) = split_by_class(&ds, &SplitSpec::first_n(&ds, 14))?;

    let mut embedding = EmbeddingModel::with_default_dims(ds.dim(), &mut ktuplet::rng(1))?;
    let embed_cfg = EmbedTrainConfig {
        epochs: 40,
        switch_epoch: 30,
        ..EmbedTrainConfig::default()
    };
    train_embedding(&mut embedding, &train, &embed_cfg, &mut ktuplet::rng(2))?;

    let mut comparator = Comparator::new(embedding.embed_dim(), 64, &mut ktuplet::rng(3))?;
    let cfg = ComparatorTrainConfig::default();
    let trace = train_comparator(
        &mut comparator,
        &embedding,
        &train,
        &cfg,
        &mut ktuplet::rng(4),
    )?;
    for e in trace.iter().step_by(10) {
        println!("comparator epoch {:>2}  mse {:.4}", e.epoch, e.loss);
    }

    let eval = EvalConfig {
        episodes: 300,
        ..EvalConfig::default()
    };
    let euclid = evaluate(&embedding, None, &test, &eval, 7)?;
    let learned = evaluate(&embedding, Some(&comparator), &test, &eval, 7)?;
    println!(
        "1-NN euclid  {:.3} ± {:.3}",
        euclid.mean_accuracy, euclid.ci95_halfwidth
    );
    println!(
        "comparator   {:.3} ± {:.3}",
        learned.mean_accuracy, learned.ci95_halfwidth
    );

    // Continue from the trained pair, now updating the embedding as well.
    let mut joint_embedding = embedding.clone();
    let mut joint = comparator.clone();
    let short = ComparatorTrainConfig {
        epochs: 10,
        lr: 1e-4,
        ..cfg
    };
    train_comparator_joint(
        &mut joint,
        &mut joint_embedding,
        &train,
        &short,
        &mut ktuplet::rng(4),
    )?;
    let tuned = evaluate(&joint_embedding, Some(&joint), &test, &eval, 7)?;
    println!(
        "joint fine-tune  {:.3} ± {:.3}",
        tuned.mean_accuracy, tuned.ci95_halfwidth
    );
    Ok(())
}
