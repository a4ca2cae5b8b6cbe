//! Generate a Gaussian-blob dataset, split it by class and write it as CSV.
//!
//! `cargo run --example synthetic_data -- out.csv` writes the full dataset.

use ktuplet::{split_by_class, synth_gaussian, SplitSpec, SynthSpec};

fn main() -> ktuplet::Result<()> {
    let spec = SynthSpec {
        num_classes: 20,
        per_class: 50,
        dim: 16,
        spread: 0.15,
        seed: 42,
    };
    let ds = synth_gaussian(&spec)?;
    println!(
        "{} rows, {} classes, d_in = {}",
        ds.len(),
        ds.num_classes(),
        ds.dim()
    );

    let (train, test) = split_by_class(&ds, &SplitSpec::first_n(&ds, 14))?;
    println!("train classes {:?}", train.classes());
    println!("test classes  {:?}", test.classes());

    let overlap = SplitSpec::new([0, 1, 2], [2, 3]);
    println!(
        "overlapping split: {}",
        split_by_class(&ds, &overlap).unwrap_err()
    );

    match std::env::args().nth(1) {
        Some(path) => {
            ktuplet::checkpoint::write_atomic(&path, |w| ds.write_csv(w))?;
            println!("wrote {path}");
        }
        None => {
            let mut head = Vec::new();
            ds.subset(&[0].into()).write_csv(&mut head)?;
            let text = String::from_utf8_lossy(&head);
            for line in text.lines().take(2) {
                println!("{line}");
            }
        }
    }
    Ok(())
}
