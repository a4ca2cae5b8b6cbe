//! Tuplet batches for training and C-way K-shot episodes for evaluation.

use ktuplet::{sample_episode, sample_tuplets, synth_gaussian, SynthSpec};

fn main() -> ktuplet::Result<()> {
    let ds = synth_gaussian(&SynthSpec {
        num_classes: 6,
        per_class: 10,
        dim: 4,
        spread: 0.2,
        seed: 1,
    })?;
    let mut rng = ktuplet::rng(7);

    for t in sample_tuplets(&ds, 3, 4, &mut rng)? {
        let negs: Vec<u32> = t.negatives.iter().map(|&r| ds.label(r)).collect();
        println!(
            "anchor row {:>2} (class {}), positive row {:>2}, negative classes {:?}",
            t.anchor,
            ds.label(t.anchor),
            t.positive,
            negs
        );
    }

    let ep = sample_episode(&ds, 3, 2, 2, &mut rng)?;
    ep.validate(&ds)?;
    println!("episode classes {:?}", ep.classes());
    println!("support {:?}", ep.support);
    println!("query   {:?}", ep.query);
    Ok(())
}
