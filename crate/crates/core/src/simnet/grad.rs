//! Forward pass, softmax cross-entropy and exact gradients.

use serde::{Deserialize, Serialize};

use super::{BnMode, SimNetwork};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const BN_EPS: f64 = 1e-5;

/// Per-channel batch statistics of one layer's pre-normalization output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input to each layer (`batch x fan_in`).
    pub inputs: Vec<Matrix>,
    /// Normalized pre-activation (equal to `z` in scale-only mode).
    pub normalized: Vec<Matrix>,
    pub inv_std: Vec<Vec<f64>>,
    /// `gamma * normalized + beta`, before the ReLU.
    pub affine: Vec<Matrix>,
    /// Output of the last layer, fed to the head.
    pub features: Matrix,
    pub logits: Matrix,
    pub stats: Vec<BnStats>,
}

impl ForwardPass {
    /// ReLU output of layer `l`.
    pub fn activation(&self, l: usize) -> &Matrix {
        if l + 1 < self.inputs.len() {
            &self.inputs[l + 1]
        } else {
            &self.features
        }
    }
}

/// Gradients (or any per-parameter quantity) shaped like the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub w: Vec<Matrix>,
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub head: Matrix,
    pub head_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &SimNetwork) -> Self {
        Gradients {
            w: net.layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            gamma: net.layers.iter().map(|l| vec![0.0; l.width()]).collect(),
            beta: net.layers.iter().map(|l| vec![0.0; l.width()]).collect(),
            head: Matrix::zeros(net.head.rows(), net.head.cols()),
            head_bias: vec![0.0; net.head_bias.len()],
        }
    }

    /// Same ordering as [`SimNetwork::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.w.len() {
            out.extend_from_slice(self.w[l].data());
            out.extend_from_slice(&self.gamma[l]);
            out.extend_from_slice(&self.beta[l]);
        }
        out.extend_from_slice(self.head.data());
        out.extend_from_slice(&self.head_bias);
        out
    }

    pub fn squared_norm(&self) -> f64 {
        self.flatten().iter().map(|g| g * g).sum()
    }

    /// Zeroes every coordinate whose mask entry is off.
    pub fn apply_mask(&mut self, net: &SimNetwork) {
        for l in 0..net.layers.len() {
            let rows = net.input_active(l);
            let cols = net.layers[l].mask.active_flags();
            let g = &mut self.w[l];
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in cols.iter().enumerate() {
                    if !(r && c) {
                        g.set(i, j, 0.0);
                    }
                }
            }
            for (j, &c) in cols.iter().enumerate() {
                if !c {
                    self.gamma[l][j] = 0.0;
                    self.beta[l][j] = 0.0;
                }
            }
        }
        let last = net.layers.last().expect("non-empty").mask.active_flags();
        for (i, &r) in last.iter().enumerate() {
            if !r {
                self.head.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

fn check_input(net: &SimNetwork, x: &Matrix) -> Result<()> {
    if x.cols() != net.input_dim {
        return Err(Error::Shape(format!(
            "batch has {} features, network expects {}",
            x.cols(),
            net.input_dim
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    Ok(())
}

/// Forward pass using the batch's own statistics for standardization.
pub fn forward(net: &SimNetwork, x: &Matrix) -> Result<ForwardPass> {
    forward_impl(net, x, None)
}

/// Forward pass with standardization statistics supplied externally
/// (inference). Ignored in scale-only mode.
pub fn forward_with_stats(net: &SimNetwork, x: &Matrix, stats: &[BnStats]) -> Result<ForwardPass> {
    if stats.len() != net.layers.len() {
        return Err(Error::Shape(format!(
            "{} stat blocks for {} layers",
            stats.len(),
            net.layers.len()
        )));
    }
    forward_impl(net, x, Some(stats))
}

fn forward_impl(net: &SimNetwork, x: &Matrix, frozen: Option<&[BnStats]>) -> Result<ForwardPass> {
    check_input(net, x)?;
    let batch = x.rows();
    if net.bn_mode == BnMode::Standardize && frozen.is_none() && batch < 2 {
        return Err(Error::InvalidInput(
            "batch standardization needs at least 2 samples".into(),
        ));
    }
    let nl = net.layers.len();
    let mut inputs = Vec::with_capacity(nl);
    let mut normalized = Vec::with_capacity(nl);
    let mut inv_stds = Vec::with_capacity(nl);
    let mut affine = Vec::with_capacity(nl);
    let mut stats = Vec::with_capacity(nl);
    let mut a = x.clone();

    for (l, layer) in net.layers.iter().enumerate() {
        let active = layer.mask.active_flags();
        let mut z = a.matmul(&layer.w)?;
        let c = layer.width();
        for b in 0..batch {
            for (j, &act) in active.iter().enumerate() {
                if !act {
                    z.set(b, j, 0.0);
                }
            }
        }
        let (zhat, inv_std, st) = match net.bn_mode {
            BnMode::ScaleOnly => (z, vec![1.0; c], BnStats { mean: vec![0.0; c], var: vec![1.0; c] }),
            BnMode::Standardize => {
                let st = match frozen {
                    Some(s) => s[l].clone(),
                    None => batch_stats(&z),
                };
                let inv_std: Vec<f64> = st.var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                let mut zhat = z;
                for b in 0..batch {
                    let row = zhat.row_mut(b);
                    for j in 0..c {
                        row[j] = if active[j] { (row[j] - st.mean[j]) * inv_std[j] } else { 0.0 };
                    }
                }
                (zhat, inv_std, st)
            }
        };
        let mut y = zhat.clone();
        let mut out = Matrix::zeros(batch, c);
        for b in 0..batch {
            let yr = y.row_mut(b);
            for j in 0..c {
                yr[j] = if active[j] { layer.gamma[j] * yr[j] + layer.beta[j] } else { 0.0 };
            }
            let or = out.row_mut(b);
            for j in 0..c {
                or[j] = yr[j].max(0.0);
            }
        }
        inputs.push(a);
        normalized.push(zhat);
        inv_stds.push(inv_std);
        affine.push(y);
        stats.push(st);
        a = out;
    }
    let mut logits = a.matmul(&net.head)?;
    for b in 0..batch {
        for (v, bias) in logits.row_mut(b).iter_mut().zip(&net.head_bias) {
            *v += bias;
        }
    }
    Ok(ForwardPass {
        inputs,
        normalized,
        inv_std: inv_stds,
        affine,
        features: a,
        logits,
        stats,
    })
}

fn batch_stats(z: &Matrix) -> BnStats {
    let (n, c) = z.shape();
    let mut mean = vec![0.0; c];
    for b in 0..n {
        for (m, v) in mean.iter_mut().zip(z.row(b)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; c];
    for b in 0..n {
        for j in 0..c {
            let d = z.get(b, j) - mean[j];
            var[j] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n as f64);
    BnStats { mean, var }
}

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {}",
            labels.len(),
            logits.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {} classes",
            logits.cols()
        )));
    }
    Ok(())
}

fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

fn smoothed_target(k: usize, label: usize, smoothing: f64) -> impl Iterator<Item = f64> {
    (0..k).map(move |c| {
        let one = if c == label { 1.0 } else { 0.0 };
        (1.0 - smoothing) * one + smoothing / k as f64
    })
}

/// Mean cross-entropy against (optionally smoothed) one-hot targets.
pub fn cross_entropy(logits: &Matrix, labels: &[usize], smoothing: f64) -> Result<f64> {
    check_labels(logits, labels)?;
    let k = logits.cols();
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(b, &y)| {
            let lp = log_softmax_row(logits.row(b));
            -smoothed_target(k, y, smoothing)
                .zip(&lp)
                .map(|(q, l)| q * l)
                .sum::<f64>()
        })
        .sum();
    Ok(total / labels.len() as f64)
}

pub fn loss(net: &SimNetwork, x: &Matrix, labels: &[usize], smoothing: f64) -> Result<f64> {
    cross_entropy(&forward(net, x)?.logits, labels, smoothing)
}

pub fn accuracy(logits: &Matrix, labels: &[usize]) -> f64 {
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(b, &y)| {
            let row = logits.row(b);
            let mut best = 0;
            for (c, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = c;
                }
            }
            best == y
        })
        .count();
    correct as f64 / labels.len().max(1) as f64
}

/// Loss and exact gradients of the mean cross-entropy. Gradients of masked
/// coordinates are zeroed.
pub fn backward(net: &SimNetwork, x: &Matrix, labels: &[usize], smoothing: f64) -> Result<(f64, Gradients)> {
    let fwd = forward(net, x)?;
    backward_from(net, &fwd, labels, smoothing)
}

pub fn backward_from(
    net: &SimNetwork,
    fwd: &ForwardPass,
    labels: &[usize],
    smoothing: f64,
) -> Result<(f64, Gradients)> {
    let logits = &fwd.logits;
    check_labels(logits, labels)?;
    let (batch, k) = logits.shape();
    let mut loss = 0.0;
    let mut dlogits = Matrix::zeros(batch, k);
    for (b, &y) in labels.iter().enumerate() {
        let lp = log_softmax_row(logits.row(b));
        let row = dlogits.row_mut(b);
        for (c, q) in smoothed_target(k, y, smoothing).enumerate() {
            loss -= q * lp[c];
            row[c] = (lp[c].exp() - q) / batch as f64;
        }
    }
    loss /= batch as f64;

    let mut grads = Gradients::zeros_like(net);
    grads.head = fwd.features.t_matmul(&dlogits)?;
    for b in 0..batch {
        for (g, d) in grads.head_bias.iter_mut().zip(dlogits.row(b)) {
            *g += d;
        }
    }
    let mut da = dlogits.matmul(&net.head.transpose())?;

    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let c = layer.width();
        let active = layer.mask.active_flags();
        let y = &fwd.affine[l];
        let zhat = &fwd.normalized[l];
        // through ReLU and the affine scale/shift
        let mut dzhat = Matrix::zeros(batch, c);
        for b in 0..batch {
            for j in 0..c {
                if !active[j] || y.get(b, j) <= 0.0 {
                    continue;
                }
                let dy = da.get(b, j);
                grads.gamma[l][j] += dy * zhat.get(b, j);
                grads.beta[l][j] += dy;
                dzhat.set(b, j, dy * layer.gamma[j]);
            }
        }
        let dz = match net.bn_mode {
            BnMode::ScaleOnly => dzhat,
            BnMode::Standardize => {
                let n = batch as f64;
                let mut dz = Matrix::zeros(batch, c);
                for j in 0..c {
                    if !active[j] {
                        continue;
                    }
                    let mut mean_d = 0.0;
                    let mut mean_dx = 0.0;
                    for b in 0..batch {
                        mean_d += dzhat.get(b, j);
                        mean_dx += dzhat.get(b, j) * zhat.get(b, j);
                    }
                    mean_d /= n;
                    mean_dx /= n;
                    let s = fwd.inv_std[l][j];
                    for b in 0..batch {
                        dz.set(b, j, s * (dzhat.get(b, j) - mean_d - zhat.get(b, j) * mean_dx));
                    }
                }
                dz
            }
        };
        grads.w[l] = fwd.inputs[l].t_matmul(&dz)?;
        if l > 0 {
            da = dz.matmul(&layer.w.transpose())?;
        }
    }
    grads.apply_mask(net);
    Ok((loss, grads))
}

/// Standardization statistics of every layer over a whole sample set.
pub fn population_stats(net: &SimNetwork, x: &Matrix) -> Result<Vec<BnStats>> {
    Ok(forward(net, x)?.stats)
}
