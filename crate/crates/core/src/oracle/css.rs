use std::collections::BTreeMap;

use itertools::Itertools;

use super::eigen::{full_svd, pinv_via_gram};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, NormKind};

/// Exhaustive enumeration is refused above this many columns.
pub const MAX_ORACLE_COLUMNS: usize = 12;

#[derive(Debug, Clone)]
pub struct CssOracleResult {
    pub best_subset: Vec<usize>,
    pub best_error: f64,
    pub all_errors: BTreeMap<Vec<usize>, f64>,
}

/// `‖w - w_c (w_cᵀ w_c)† w_cᵀ w‖` via normal equations.
pub fn projection_error(w: &Matrix, selected: &[usize], norm: NormKind) -> f64 {
    let k = w.rows();
    let n = w.cols();
    let c = selected.len();
    let wc: Vec<Vec<f64>> = (0..k)
        .map(|r| selected.iter().map(|&j| w.get(r, j)).collect())
        .collect();
    let sub = w.select_columns(selected);
    let g_pinv = pinv_via_gram(&sub);
    // coeffs = G† (w_cᵀ w), c x n
    let mut wct_w = vec![vec![0.0; n]; c];
    for a in 0..c {
        for j in 0..n {
            wct_w[a][j] = (0..k).map(|r| wc[r][a] * w.get(r, j)).sum();
        }
    }
    let mut coeffs = vec![vec![0.0; n]; c];
    for a in 0..c {
        for j in 0..n {
            coeffs[a][j] = (0..c).map(|b| g_pinv[a][b] * wct_w[b][j]).sum();
        }
    }
    let mut resid = vec![0.0; k * n];
    for r in 0..k {
        for j in 0..n {
            let proj: f64 = (0..c).map(|a| wc[r][a] * coeffs[a][j]).sum();
            resid[r * n + j] = w.get(r, j) - proj;
        }
    }
    match norm {
        NormKind::Frobenius => resid.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormKind::Spectral => {
            let m = Matrix::from_fn(k, n, |r, j| resid[r * n + j]);
            full_svd(&m).sigma.first().copied().unwrap_or(0.0)
        }
    }
}

/// Optimal `c`-column subset by exhaustive search. Ties keep the
/// lexicographically first subset.
pub fn brute_force_css(w: &Matrix, c: usize, norm: NormKind) -> Result<CssOracleResult> {
    let n = w.cols();
    if n > MAX_ORACLE_COLUMNS {
        return Err(Error::SizeGuard(format!(
            "{n} columns exceeds the exhaustive-search limit of {MAX_ORACLE_COLUMNS}"
        )));
    }
    if c == 0 || c > n {
        return Err(Error::InvalidArgument(format!("cannot choose {c} of {n} columns")));
    }
    let mut all_errors = BTreeMap::new();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..n).combinations(c) {
        let err = projection_error(w, &subset, norm);
        if best.as_ref().is_none_or(|(_, b)| err < *b) {
            best = Some((subset.clone(), err));
        }
        all_errors.insert(subset, err);
    }
    let (best_subset, best_error) = best.expect("at least one subset");
    Ok(CssOracleResult {
        best_subset,
        best_error,
        all_errors,
    })
}
