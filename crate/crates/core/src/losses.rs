//! K-tuplet hinge loss, its semi-hard filtered variant, and the MSE loss used
//! to fit comparator scores.
//!
//! For a tuplet with anchor `a`, positive `p` and negatives `n_1..n_K`, the
//! per-negative hinge argument is
//!
//! ```text
//! h_i = (‖a − p‖² − ‖a − n_i‖²) + α
//! ```
//!
//! evaluated in exactly that order. The K-tuplet loss is `(Σ_i max(0, h_i)) / K`
//! with the sum accumulated left to right from `0.0`. A term is *active* when
//! `h_i > 0`; at `h_i == 0` it is inactive and contributes no gradient.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::sq_dist_unchecked;

pub const DEFAULT_MARGIN: f64 = 0.5;
pub const DEFAULT_K_NEG: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin: f64,
    pub k_neg: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: DEFAULT_MARGIN,
            k_neg: DEFAULT_K_NEG,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        if self.k_neg < 1 {
            return Err(Error::Config("k_neg must be at least 1".into()));
        }
        Ok(())
    }
}

/// Embedded anchor, positive and negatives, borrowed from an embedding batch.
#[derive(Debug, Clone)]
pub struct EmbeddedTuplet<'a> {
    pub anchor: &'a [f64],
    pub positive: &'a [f64],
    pub negatives: Vec<&'a [f64]>,
}

impl<'a> EmbeddedTuplet<'a> {
    pub fn new(anchor: &'a [f64], positive: &'a [f64], negatives: Vec<&'a [f64]>) -> Self {
        EmbeddedTuplet {
            anchor,
            positive,
            negatives,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.anchor.len();
        check_dim(d, self.positive.len())?;
        for n in &self.negatives {
            check_dim(d, n.len())?;
        }
        if self.negatives.is_empty() {
            return Err(Error::Config("tuplet has no negatives".into()));
        }
        Ok(())
    }

    /// `h_i` for every negative.
    pub fn hinge_arguments(&self, margin: f64) -> Result<Vec<f64>> {
        self.validate()?;
        let d_ap = sq_dist_unchecked(self.anchor, self.positive);
        Ok(self
            .negatives
            .iter()
            .map(|n| (d_ap - sq_dist_unchecked(self.anchor, n)) + margin)
            .collect())
    }
}

/// Gradients with respect to each embedded vector of a tuplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TupletGrad {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

impl TupletGrad {
    fn zeros(dim: usize, k: usize) -> Self {
        TupletGrad {
            anchor: vec![0.0; dim],
            positive: vec![0.0; dim],
            negatives: vec![vec![0.0; dim]; k],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.anchor
            .iter()
            .chain(&self.positive)
            .chain(self.negatives.iter().flatten())
            .all(|&v| v == 0.0)
    }
}

/// How the semi-hard term set is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Keep terms that still violate the margin (`h_i > 0`).
    #[default]
    Violating,
    /// Keep terms with `‖a − n_i‖² − ‖a − p‖² ≥ α`, i.e. `h_i ≤ 0`: the
    /// exact complement of [`FilterMode::Violating`]. Every kept term has a
    /// zero hinge, so the loss is identically zero.
    Verbatim,
}

/// Which objective a training step optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    KTuplet,
    SemiHard(FilterMode),
}

fn hinge_sum(args: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    for h in args {
        sum += h.max(0.0);
    }
    sum
}

/// Mean hinge over all `K` negatives.
pub fn k_tuplet_loss(t: &EmbeddedTuplet<'_>, margin: f64) -> Result<f64> {
    let args = t.hinge_arguments(margin)?;
    Ok(hinge_sum(args.iter().copied()) / args.len() as f64)
}

/// Accumulates the gradient of `scale · max(0, h_i)` for each index in
/// `terms` that is active.
fn accumulate_terms(
    t: &EmbeddedTuplet<'_>,
    args: &[f64],
    terms: impl IntoIterator<Item = usize>,
    scale: f64,
) -> TupletGrad {
    let dim = t.anchor.len();
    let mut g = TupletGrad::zeros(dim, t.negatives.len());
    for i in terms {
        if args[i] <= 0.0 {
            continue;
        }
        let n = t.negatives[i];
        for j in 0..dim {
            let (a, p, nj) = (t.anchor[j], t.positive[j], n[j]);
            g.positive[j] -= 2.0 * (a - p) * scale;
            g.negatives[i][j] += 2.0 * (a - nj) * scale;
            g.anchor[j] += 2.0 * (nj - p) * scale;
        }
    }
    g
}

/// Gradient of [`k_tuplet_loss`] with respect to anchor, positive and every
/// negative.
pub fn k_tuplet_grad(t: &EmbeddedTuplet<'_>, margin: f64) -> Result<TupletGrad> {
    let args = t.hinge_arguments(margin)?;
    let k = args.len();
    Ok(accumulate_terms(t, &args, 0..k, 1.0 / k as f64))
}

/// Term selection from precomputed hinge arguments.
pub fn select_terms(hinge_args: &[f64], mode: FilterMode) -> Vec<usize> {
    hinge_args
        .iter()
        .enumerate()
        .filter(|(_, &h)| match mode {
            FilterMode::Violating => h > 0.0,
            FilterMode::Verbatim => !(h > 0.0),
        })
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the negatives kept for the semi-hard loss.
pub fn semi_hard_filter(
    t: &EmbeddedTuplet<'_>,
    margin: f64,
    mode: FilterMode,
) -> Result<Vec<usize>> {
    Ok(select_terms(&t.hinge_arguments(margin)?, mode))
}

/// Mean hinge over the selected terms; zero when none are selected.
pub fn semi_hard_loss(t: &EmbeddedTuplet<'_>, margin: f64, mode: FilterMode) -> Result<f64> {
    let args = t.hinge_arguments(margin)?;
    let selected = select_terms(&args, mode);
    if selected.is_empty() {
        return Ok(0.0);
    }
    Ok(hinge_sum(selected.iter().map(|&i| args[i])) / selected.len() as f64)
}

pub fn semi_hard_grad(t: &EmbeddedTuplet<'_>, margin: f64, mode: FilterMode) -> Result<TupletGrad> {
    let args = t.hinge_arguments(margin)?;
    let selected = select_terms(&args, mode);
    if selected.is_empty() {
        return Ok(TupletGrad::zeros(t.anchor.len(), t.negatives.len()));
    }
    let scale = 1.0 / selected.len() as f64;
    Ok(accumulate_terms(t, &args, selected, scale))
}

/// Loss and gradient for one tuplet under `objective`.
pub fn tuplet_objective(
    t: &EmbeddedTuplet<'_>,
    margin: f64,
    objective: Objective,
) -> Result<(f64, TupletGrad)> {
    match objective {
        Objective::KTuplet => Ok((k_tuplet_loss(t, margin)?, k_tuplet_grad(t, margin)?)),
        Objective::SemiHard(mode) => Ok((
            semi_hard_loss(t, margin, mode)?,
            semi_hard_grad(t, margin, mode)?,
        )),
    }
}

/// `mean((score − target)²)`.
pub fn mse_similarity_loss(scores: &[f64], targets: &[f64]) -> Result<f64> {
    check_dim(scores.len(), targets.len())?;
    if scores.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = scores
        .iter()
        .zip(targets)
        .map(|(s, t)| (s - t) * (s - t))
        .sum();
    Ok(sum / scores.len() as f64)
}

/// `2 (score − target) / n` per element.
pub fn mse_similarity_grad(scores: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
    check_dim(scores.len(), targets.len())?;
    let n = scores.len() as f64;
    Ok(scores
        .iter()
        .zip(targets)
        .map(|(s, t)| 2.0 * (s - t) / n)
        .collect())
}
