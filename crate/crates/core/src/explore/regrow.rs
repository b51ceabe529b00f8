use rand::Rng;

use super::{ChannelMask, MruCache, SamplingMode};
use crate::error::{Error, Result};
use crate::linalg::{orthogonality_scores, softmax, Matrix};

/// One categorical draw from non-negative `weights` (need not be normalized).
pub fn categorical_draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = Some(i);
        if u < acc {
            return Some(i);
        }
    }
    last_positive
}

/// Draws `k` distinct indices by repeated categorical draws, renormalizing
/// over the remaining mass after each draw. Indices come back in draw order.
pub fn sample_without_replacement<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(k.min(w.len()));
    while out.len() < k {
        match categorical_draw(&w, rng) {
            Some(i) => {
                out.push(i);
                w[i] = 0.0;
            }
            None => {
                // all remaining mass underflowed to zero: fall back to index order
                match (0..w.len()).find(|i| !out.contains(i)) {
                    Some(i) => out.push(i),
                    None => break,
                }
            }
        }
    }
    out
}

/// Orthogonality of each pruned candidate's archived column against the
/// active columns of `w`. Archived rows belonging to inactive inputs are
/// zeroed so both sides live in the same subspace.
pub fn candidate_orthogonality(
    layer: usize,
    w: &Matrix,
    retained: &[usize],
    candidates: &[usize],
    cache: &MruCache,
    input_active: &[bool],
) -> Result<Vec<f64>> {
    let k = w.rows();
    if input_active.len() != k {
        return Err(Error::Shape(format!(
            "{} input flags for {k} rows",
            input_active.len()
        )));
    }
    let mut cand = Matrix::zeros(k, candidates.len());
    for (c, &j) in candidates.iter().enumerate() {
        let rec = cache.get(layer, j).ok_or_else(|| {
            Error::Integrity(format!("pruned channel ({layer}, {j}) missing from cache"))
        })?;
        if rec.out_weights.len() != k {
            return Err(Error::Integrity(format!(
                "archived column of ({layer}, {j}) has length {}, expected {k}",
                rec.out_weights.len()
            )));
        }
        for (i, &v) in rec.out_weights.iter().enumerate() {
            if input_active[i] {
                cand.set(i, c, v);
            }
        }
    }
    orthogonality_scores(&w.select_columns(retained), &cand)
}

/// Chooses up to `k` pruned channels of one layer and marks them retained.
///
/// `importance` samples without replacement from the softmax of the
/// candidates' orthogonality scores, `uniform` samples uniformly, and
/// `deterministic` takes the `k` most orthogonal (ties to the lower index).
/// The caller restores the weights of the returned channels.
pub fn regrow_layer<R: Rng + ?Sized>(
    mask: &mut ChannelMask,
    cache: &MruCache,
    w: &Matrix,
    input_active: &[bool],
    k: usize,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let candidates = mask.pruned();
    let k = k.min(candidates.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    let picked: Vec<usize> = match mode {
        SamplingMode::Uniform => {
            sample_without_replacement(&vec![1.0; candidates.len()], k, rng)
        }
        SamplingMode::Importance | SamplingMode::Deterministic => {
            let eps = candidate_orthogonality(
                mask.layer_id(),
                w,
                mask.retained(),
                &candidates,
                cache,
                input_active,
            )?;
            if mode == SamplingMode::Importance {
                let p = softmax(&eps)?;
                sample_without_replacement(&p, k, rng)
            } else {
                let mut order: Vec<usize> = (0..candidates.len()).collect();
                order.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]).then(a.cmp(&b)));
                order.truncate(k);
                order
            }
        }
    };
    let mut grown: Vec<usize> = picked.into_iter().map(|i| candidates[i]).collect();
    grown.sort_unstable();
    mask.insert(&grown)?;
    Ok(grown)
}
