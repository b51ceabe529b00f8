use super::ceil_tol;
use crate::error::{Error, Result};
use crate::linalg::{leverage_select, Matrix};

/// `ceil((1 - kappa) * channels)`, never below one.
pub fn retained_count(kappa: f64, channels: usize) -> usize {
    (ceil_tol((1.0 - kappa) * channels as f64) as usize).clamp(1, channels.max(1))
}

/// Leverage-score column subset selection on one layer's weight block.
///
/// Keeps the `ceil((1 - kappa) * C)` channels with the largest leverage
/// scores (computed from that many top right singular vectors). Returns
/// `(retained, pruned)`, both sorted.
pub fn prune_layer_css(w: &Matrix, kappa: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::InvalidArgument(format!(
            "pruning ratio must be in [0, 1), got {kappa}"
        )));
    }
    let c = w.cols();
    if c == 0 {
        return Err(Error::InvalidInput("layer has no channels".into()));
    }
    let keep = retained_count(kappa, c);
    let retained = leverage_select(w, keep)?;
    let pruned = complement(&retained, c);
    Ok((retained, pruned))
}

/// Like [`prune_layer_css`] but restricted to the currently active columns:
/// selects `target.min(active.len())` of them and returns the active channels
/// to drop. Columns outside `active` must already be zero in `w`, so the
/// leverage scores match those of the full block.
pub fn select_prunable(w: &Matrix, active: &[usize], target: usize) -> Result<Vec<usize>> {
    let keep = target.clamp(1, active.len().max(1));
    if active.is_empty() || keep >= active.len() {
        return Ok(Vec::new());
    }
    let sub = w.select_columns(active);
    let local = leverage_select(&sub, keep)?;
    let keep_set: Vec<usize> = local.iter().map(|&i| active[i]).collect();
    Ok(active
        .iter()
        .copied()
        .filter(|j| keep_set.binary_search(j).is_err())
        .collect())
}

fn complement(sorted: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|j| sorted.binary_search(j).is_err()).collect()
}
