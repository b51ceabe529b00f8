//! Dense linear algebra for the exploration engine.
//!
//! Everything here is a pure function of its inputs. All SVD-derived
//! quantities go through the one-sided Jacobi factorization in [`svd`].

mod matrix;
pub mod svd;

pub use matrix::Matrix;
pub use svd::{svd, Svd, RANK_TOL};

use crate::error::{Error, Result};

/// Top right singular vectors of a matrix.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub singular_values: Vec<f64>,
    /// `cols x c`, orthonormal columns.
    pub right_vectors: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    pub scores: Vec<f64>,
    /// Number of singular vectors actually used (requested `c` clamped to
    /// the numerical rank).
    pub c: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Frobenius,
    Spectral,
}

fn check_finite(w: &Matrix) -> Result<()> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Top-`c` right singular vectors of `w`. `c` is clamped to the numerical
/// rank, so the result may hold fewer than `c` vectors (zero for a zero
/// matrix).
pub fn top_right_singular_vectors(w: &Matrix, c: usize) -> Result<SvdFactors> {
    check_finite(w)?;
    if c == 0 {
        return Err(Error::InvalidArgument("c must be at least 1".into()));
    }
    let f = svd(w)?;
    let c_eff = c.min(f.rank());
    let idx: Vec<usize> = (0..c_eff).collect();
    Ok(SvdFactors {
        singular_values: f.sigma[..c_eff].to_vec(),
        right_vectors: f.v.select_columns(&idx),
    })
}

/// Moore-Penrose pseudo-inverse via SVD, dropping singular values below
/// `RANK_TOL * sigma_max`.
pub fn pseudo_inverse(w: &Matrix) -> Result<Matrix> {
    check_finite(w)?;
    let f = svd(w)?;
    let r = f.rank();
    let (m, n) = w.shape();
    let mut out = Matrix::zeros(n, m);
    for k in 0..r {
        let inv = 1.0 / f.sigma[k];
        for i in 0..n {
            let vik = f.v.get(i, k) * inv;
            if vik == 0.0 {
                continue;
            }
            for j in 0..m {
                *out.get_mut(i, j) += vik * f.u.get(j, k);
            }
        }
    }
    Ok(out)
}

/// Largest singular value.
pub fn spectral_norm(w: &Matrix) -> Result<f64> {
    Ok(svd(w)?.sigma.first().copied().unwrap_or(0.0))
}

fn validate_selection(w: &Matrix, selected: &[usize]) -> Result<()> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument("column selection is empty".into()));
    }
    if let Some(&bad) = selected.iter().find(|&&j| j >= w.cols()) {
        return Err(Error::InvalidArgument(format!(
            "column {bad} out of range for {} columns",
            w.cols()
        )));
    }
    Ok(())
}

/// Residual `w - w_c w_c† w` of projecting `w` onto the span of the selected
/// columns.
pub fn css_residual(w: &Matrix, selected: &[usize]) -> Result<Matrix> {
    check_finite(w)?;
    validate_selection(w, selected)?;
    let wc = w.select_columns(selected);
    let coeffs = pseudo_inverse(&wc)?.matmul(w)?;
    w.sub(&wc.matmul(&coeffs)?)
}

/// `‖w - w_c w_c† w‖` in the requested norm (not squared).
pub fn css_reconstruction_error(w: &Matrix, selected: &[usize], norm: NormKind) -> Result<f64> {
    let residual = css_residual(w, selected)?;
    Ok(match norm {
        NormKind::Frobenius => residual.frobenius_norm(),
        NormKind::Spectral => spectral_norm(&residual)?,
    })
}

/// Squared row norms of the top-`c` right singular vectors, one per column
/// of `w`.
pub fn leverage_scores(w: &Matrix, c: usize) -> Result<LeverageScores> {
    let f = top_right_singular_vectors(w, c)?;
    let v = &f.right_vectors;
    let scores = (0..v.rows())
        .map(|j| v.row(j).iter().map(|x| x * x).sum())
        .collect();
    Ok(LeverageScores {
        scores,
        c: v.cols(),
    })
}

/// Picks `count` columns of `w`: the top `min(count, rank)` by leverage score
/// computed with `c = count`, then the remainder by column norm. Ties go to
/// the lower index. Result is sorted ascending.
pub fn leverage_select(w: &Matrix, count: usize) -> Result<Vec<usize>> {
    check_finite(w)?;
    let n = w.cols();
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {count} of {n} columns"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let lev = leverage_scores(w, count)?;
    let mut by_score: Vec<usize> = (0..n).collect();
    by_score.sort_by(|&a, &b| lev.scores[b].total_cmp(&lev.scores[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = by_score[..lev.c].to_vec();
    if lev.c < count {
        let norms = w.column_norms();
        let mut rest: Vec<usize> = by_score[lev.c..].to_vec();
        rest.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
        chosen.extend_from_slice(&rest[..count - lev.c]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Squared residual of each candidate column after orthogonal projection onto
/// the span of the active columns. With no active columns the score is the
/// squared norm of the candidate.
pub fn orthogonality_scores(active: &Matrix, candidates: &Matrix) -> Result<Vec<f64>> {
    if active.rows() != candidates.rows() {
        return Err(Error::Shape(format!(
            "active has {} rows, candidates have {}",
            active.rows(),
            candidates.rows()
        )));
    }
    check_finite(active)?;
    check_finite(candidates)?;
    let k = candidates.rows();
    let basis: Vec<Vec<f64>> = if active.cols() == 0 {
        Vec::new()
    } else {
        let f = svd(active)?;
        (0..f.rank()).map(|i| f.u.col(i)).collect()
    };
    let scores = (0..candidates.cols())
        .map(|j| {
            let mut r = candidates.col(j);
            for u in &basis {
                let dot: f64 = u.iter().zip(&r).map(|(a, b)| a * b).sum();
                for i in 0..k {
                    r[i] -= dot * u[i];
                }
            }
            r.iter().map(|x| x * x).sum()
        })
        .collect();
    Ok(scores)
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty sequence".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("softmax input has non-finite values".into()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
