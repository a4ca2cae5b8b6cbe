//! K-tuplet loss, the semi-hard filter in both modes and their gradients.

use ktuplet::losses::{k_tuplet_grad, semi_hard_grad};
use ktuplet::{k_tuplet_loss, semi_hard_filter, semi_hard_loss, EmbeddedTuplet, FilterMode};

fn main() -> ktuplet::Result<()> {
    let anchor = [1.0, 0.0];
    let positive = [0.8, 0.6];
    let negatives = [[0.0, 1.0], [-1.0, 0.0], [0.6, 0.8]];
    let t = EmbeddedTuplet::new(
        &anchor,
        &positive,
        negatives.iter().map(|n| &n[..]).collect(),
    );
    let margin = 0.5;

    println!("hinge arguments {:?}", t.hinge_arguments(margin)?);
    println!("k-tuplet loss   {:.4}", k_tuplet_loss(&t, margin)?);
    println!("gradient        {:?}", k_tuplet_grad(&t, margin)?);

    for mode in [FilterMode::Violating, FilterMode::Verbatim] {
        println!(
            "{mode:?}: kept {:?}, loss {:.4}, zero gradient {}",
            semi_hard_filter(&t, margin, mode)?,
            semi_hard_loss(&t, margin, mode)?,
            semi_hard_grad(&t, margin, mode)?.is_zero()
        );
    }

    let easy = [[-1.0, 0.0]];
    let t = EmbeddedTuplet::new(&anchor, &positive, easy.iter().map(|n| &n[..]).collect());
    println!(
        "all terms satisfied: semi-hard loss {}",
        semi_hard_loss(&t, margin, FilterMode::Violating)?
    );
    Ok(())
}
