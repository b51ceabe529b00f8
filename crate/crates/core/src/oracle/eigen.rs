use crate::linalg::Matrix;

/// Full SVD assembled from the eigendecomposition of `AᵀA`.
#[derive(Debug, Clone)]
pub struct OracleSvd {
    /// Non-increasing, one per column of `A`.
    pub sigma: Vec<f64>,
    /// `v[k]` is the `k`-th right singular vector (length `cols`).
    pub v: Vec<Vec<f64>>,
}

/// Cyclic two-sided Jacobi eigensolver for a symmetric matrix given as
/// nested rows. Returns `(eigenvalues, eigenvectors)` sorted by decreasing
/// eigenvalue; `vectors[k]` pairs with `values[k]`.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Jᵀ A J
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i][k]).collect())
        .collect();
    (values, vectors)
}

fn gram(w: &Matrix) -> Vec<Vec<f64>> {
    let n = w.cols();
    let mut g = vec![vec![0.0; n]; n];
    for r in 0..w.rows() {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += w.get(r, i) * w.get(r, j);
            }
        }
    }
    g
}

pub fn full_svd(w: &Matrix) -> OracleSvd {
    let (values, vectors) = symmetric_eigen(&gram(w));
    OracleSvd {
        sigma: values.iter().map(|&l| l.max(0.0).sqrt()).collect(),
        v: vectors,
    }
}

/// `(AᵀA)†` through the eigendecomposition of the Gram matrix, dropping
/// eigenvalues below `1e-12 * lambda_max`.
pub fn pinv_via_gram(w: &Matrix) -> Vec<Vec<f64>> {
    let n = w.cols();
    let (values, vectors) = symmetric_eigen(&gram(w));
    let lmax = values.first().copied().unwrap_or(0.0);
    let mut out = vec![vec![0.0; n]; n];
    for (l, v) in values.iter().zip(&vectors) {
        if lmax <= 0.0 || *l <= 1e-12 * lmax {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[i][j] += v[i] * v[j] / l;
            }
        }
    }
    out
}
