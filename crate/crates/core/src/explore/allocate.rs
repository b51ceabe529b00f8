//! Layer-wise sparsity from the global percentile of scaling factors.

use serde::{Deserialize, Serialize};

use super::ceil_tol;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityAllocation {
    pub global_target: f64,
    /// Pruning ratio `kappa` per layer, after the keep-one clamp.
    pub per_layer: Vec<f64>,
    /// Pruned channel count per layer, after the clamp.
    pub pruned_counts: Vec<usize>,
    /// `q`, the `ceil(S*N)`-th smallest magnitude (`-inf` when nothing is pruned).
    pub threshold: f64,
}

impl SparsityAllocation {
    pub fn retained_counts(&self, widths: &[usize]) -> Vec<usize> {
        widths
            .iter()
            .zip(&self.pruned_counts)
            .map(|(c, p)| c - p)
            .collect()
    }
}

/// Ranks every channel of every layer by `|gamma|` and marks the
/// `ceil(S * N)` smallest as pruned. Ties are broken by lower relative
/// channel position `j / C^l`, then lower layer index, so equal magnitudes
/// are pruned in proportion to layer width. Each layer keeps at least one
/// channel.
pub fn allocate_layer_sparsity(gammas: &[Vec<f64>], sparsity: f64) -> Result<SparsityAllocation> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument(format!(
            "sparsity must be in [0, 1), got {sparsity}"
        )));
    }
    if let Some(l) = gammas.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInput(format!("layer {l} has no channels")));
    }
    if gammas.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::InvalidInput("scaling factors must be finite".into()));
    }

    // (|gamma|, channel, layer)
    let mut ranked: Vec<(f64, usize, usize)> = gammas
        .iter()
        .enumerate()
        .flat_map(|(l, g)| g.iter().enumerate().map(move |(j, v)| (v.abs(), j, l)))
        .collect();
    let width = |l: usize| gammas[l].len();
    ranked.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then((a.1 * width(b.2)).cmp(&(b.1 * width(a.2))))
            .then(a.2.cmp(&b.2))
    });

    let total = ranked.len();
    let n_prune = (ceil_tol(sparsity * total as f64) as usize).min(total);
    let threshold = if n_prune == 0 {
        f64::NEG_INFINITY
    } else {
        ranked[n_prune - 1].0
    };

    let mut pruned_counts = vec![0usize; gammas.len()];
    for &(_, _, l) in &ranked[..n_prune] {
        pruned_counts[l] += 1;
    }
    for (count, g) in pruned_counts.iter_mut().zip(gammas) {
        *count = (*count).min(g.len() - 1);
    }
    let per_layer = pruned_counts
        .iter()
        .zip(gammas)
        .map(|(&p, g)| p as f64 / g.len() as f64)
        .collect();
    Ok(SparsityAllocation {
        global_target: sparsity,
        per_layer,
        pruned_counts,
        threshold,
    })
}
