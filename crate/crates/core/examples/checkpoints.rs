//! Saving and loading models, and the JSON evaluation report.

use ktuplet::checkpoint::{load_comparator, load_embedding, save_comparator, save_embedding};
use ktuplet::{evaluate, synth_gaussian, Comparator, EmbeddingModel, EvalConfig, SynthSpec};

fn main() -> ktuplet::Result<()> {
    let dir = tempfile::tempdir()?;
    let embedding = EmbeddingModel::with_default_dims(8, &mut ktuplet::rng(1))?;
    let comparator = Comparator::new(embedding.embed_dim(), 16, &mut ktuplet::rng(2))?;

    let emb_path = dir.path().join("embedding.json");
    let cmp_path = dir.path().join("comparator.json");
    save_embedding(&embedding, &emb_path)?;
    save_comparator(&comparator, &cmp_path)?;
    println!(
        "embedding checkpoint: {} bytes",
        std::fs::metadata(&emb_path)?.len()
    );

    let emb_back = load_embedding(&emb_path)?;
    let cmp_back = load_comparator(&cmp_path)?;
    println!(
        "exact round trip: {}",
        emb_back == embedding && cmp_back == comparator
    );
    println!(
        "loading the wrong kind: {}",
        load_comparator(&emb_path).unwrap_err()
    );

    let ds = synth_gaussian(&SynthSpec {
        num_classes: 5,
        per_class: 20,
        dim: 8,
        spread: 0.3,
        seed: 9,
    })?;
    let cfg = EvalConfig {
        episodes: 3,
        queries: 2,
        ..EvalConfig::default()
    };
    let report = evaluate(&emb_back, Some(&cmp_back), &ds, &cfg, 4)?;
    println!("{}", report.to_json()?);
    Ok(())
}
