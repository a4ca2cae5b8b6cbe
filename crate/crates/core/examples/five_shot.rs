//! 5-way 5-shot evaluation with summed class features, with and without
//! renormalizing the sum.

use ktuplet::{class_feature, Comparator};
use ktuplet::{
    evaluate, split_by_class, synth_gaussian, EmbeddingModel, EvalConfig, SplitSpec, SynthSpec,
};

fn main() -> ktuplet::Result<()> {
    let ds = synth_gaussian(&SynthSpec {
        num_classes: 12,
        per_class: 30,
        dim: 16,
        spread: 0.8,
        seed: 5,
    })?;
    let (_, test) = split_by_class(&ds, &SplitSpec::first_n(&ds, 6))?;
    let embedding = EmbeddingModel::with_default_dims(ds.dim(), &mut ktuplet::rng(1))?;
    let comparator = Comparator::new(embedding.embed_dim(), 64, &mut ktuplet::rng(2))?;

    let a = [0.6, 0.8];
    let b = [1.0, 0.0];
    println!(
        "sum of two unit vectors {:?}",
        class_feature(&[&a[..], &b[..]], false)?
    );
    println!(
        "renormalized            {:?}",
        class_feature(&[&a[..], &b[..]], true)?
    );

    for shot in [1, 5] {
        for renormalize_class_feature in [false, true] {
            let cfg = EvalConfig {
                shot,
                episodes: 200,
                renormalize_class_feature,
                ..EvalConfig::default()
            };
            let euclid = evaluate(&embedding, None, &test, &cfg, 11)?;
            let cmp = evaluate(&embedding, Some(&comparator), &test, &cfg, 11)?;
            println!(
                "5-way {shot}-shot renorm={renormalize_class_feature:<5}  euclid {:.3}  untrained comparator {:.3}",
                euclid.mean_accuracy, cmp.mean_accuracy
            );
        }
    }
    Ok(())
}
