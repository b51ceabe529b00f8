//! One-sided (Hestenes) Jacobi SVD.
//!
//! Plane rotations are applied to column pairs of a working copy of `A`
//! until every pair is numerically orthogonal. The accumulated rotations form
//! `V`, the column norms of `A·V` are the singular values, and normalizing
//! the nonzero columns yields `U`. Works for any aspect ratio; a wide matrix
//! simply ends with `cols - rows` (or more) zero columns.

use super::Matrix;
use crate::error::{Error, Result};

/// Singular values below `RANK_TOL * sigma_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

const ORTHO_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// Thin factorization `A = U diag(sigma) Vᵀ` with all `cols` right vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Non-increasing, length `cols`.
    pub sigma: Vec<f64>,
    /// `rows x cols`; column `i` is unit length when `sigma[i] > 0`, zero otherwise.
    pub u: Matrix,
    /// `cols x cols`, orthogonal.
    pub v: Matrix,
}

impl Svd {
    /// Number of singular values above the relative rank tolerance.
    pub fn rank(&self) -> usize {
        let smax = self.sigma.first().copied().unwrap_or(0.0);
        if smax <= 0.0 {
            return 0;
        }
        self.sigma.iter().take_while(|&&s| s > RANK_TOL * smax).count()
    }
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let (m, n) = a.shape();
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..m {
                        alpha += cp[i] * cp[i];
                        beta += cq[i] * cq[i];
                        gamma += cp[i] * cq[i];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        v.set_col(k, &vcols[j]);
        let s = norms[j];
        if s > 0.0 && s > RANK_TOL * smax {
            let unit: Vec<f64> = cols[j].iter().map(|x| x / s).collect();
            u.set_col(k, &unit);
        }
    }
    Ok(Svd { sigma, u, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
