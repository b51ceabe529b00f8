use crate::simnet::{BnMode, SimNetwork};
use crate::linalg::Matrix;

const EPS: f64 = 1e-5;

/// Logits of `net` on `x`, computed with plain loops over nested vectors.
/// Standardization (when enabled) uses the batch's own statistics.
pub fn reference_forward(net: &SimNetwork, x: &Matrix) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut act: Vec<Vec<f64>> = (0..n).map(|b| (0..x.cols()).map(|i| x.get(b, i)).collect()).collect();
    for layer in &net.layers {
        let fan_in = layer.w.rows();
        let width = layer.w.cols();
        let keep: Vec<bool> = (0..width).map(|j| layer.mask.is_retained(j)).collect();
        let mut z = vec![vec![0.0; width]; n];
        for b in 0..n {
            for j in 0..width {
                if !keep[j] {
                    continue;
                }
                let mut s = 0.0;
                for i in 0..fan_in {
                    s += act[b][i] * layer.w.get(i, j);
                }
                z[b][j] = s;
            }
        }
        if net.bn_mode == BnMode::Standardize {
            for j in 0..width {
                if !keep[j] {
                    continue;
                }
                let mean = (0..n).map(|b| z[b][j]).sum::<f64>() / n as f64;
                let var = (0..n).map(|b| (z[b][j] - mean).powi(2)).sum::<f64>() / n as f64;
                let sd = (var + EPS).sqrt();
                for row in z.iter_mut() {
                    row[j] = (row[j] - mean) / sd;
                }
            }
        }
        act = z
            .into_iter()
            .map(|row| {
                (0..width)
                    .map(|j| if keep[j] { (layer.gamma[j] * row[j] + layer.beta[j]).max(0.0) } else { 0.0 })
                    .collect()
            })
            .collect();
    }
    let classes = net.head.cols();
    act.iter()
        .map(|a| {
            (0..classes)
                .map(|k| net.head_bias[k] + (0..a.len()).map(|i| a[i] * net.head.get(i, k)).sum::<f64>())
                .collect()
        })
        .collect()
}
