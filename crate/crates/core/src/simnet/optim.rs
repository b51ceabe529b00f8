use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Gradients, SimNetwork};
use crate::error::{Error, Result};
use crate::explore::{ema_update, EMA_DECAY};
use crate::linalg::Matrix;

/// Optimizer state of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub iteration: u64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub velocity: Gradients,
}

impl TrainState {
    pub fn new(net: &SimNetwork, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(TrainState {
            iteration: 0,
            learning_rate,
            momentum,
            velocity: Gradients::zeros_like(net),
        })
    }
}

/// Linear warmup to `base` over the first `warmup_fraction` of `total`
/// iterations, then cosine decay to zero. `t` is 1-based.
pub fn learning_rate_at(base: f64, t: u64, total: u64, warmup_fraction: f64) -> f64 {
    let warm = (warmup_fraction * total as f64).round() as u64;
    if t <= warm && warm > 0 {
        return base * t as f64 / warm as f64;
    }
    let span = total.saturating_sub(warm).max(1) as f64;
    let progress = ((t - warm) as f64 / span).min(1.0);
    0.5 * base * (1.0 + (PI * progress).cos())
}

fn step_block(w: &mut Matrix, v: &mut Matrix, g: &Matrix, rows: &[bool], cols: &[bool], lr: f64, mu: f64) {
    for (i, &r) in rows.iter().enumerate() {
        let wr = w.row_mut(i);
        let vr = v.row_mut(i);
        let gr = g.row(i);
        for (j, &c) in cols.iter().enumerate() {
            if r && c {
                vr[j] = mu * vr[j] + gr[j];
                wr[j] -= lr * vr[j];
            } else {
                vr[j] = 0.0;
            }
        }
    }
}

fn step_vec(p: &mut [f64], v: &mut [f64], g: &[f64], act: &[bool], lr: f64, mu: f64) {
    for j in 0..p.len() {
        if act[j] {
            v[j] = mu * v[j] + g[j];
            p[j] -= lr * v[j];
        } else {
            v[j] = 0.0;
        }
    }
}

/// Momentum SGD on retained coordinates: `v <- mu*v + g`, `w <- w - lr*v`.
/// Masked coordinates keep their value and have their velocity cleared.
pub fn sgd_step_masked(state: &mut TrainState, net: &mut SimNetwork, grads: &Gradients) {
    let lr = state.learning_rate;
    let mu = state.momentum;
    let vel = &mut state.velocity;
    for l in 0..net.layers.len() {
        let rows = net.input_active(l);
        let layer = &mut net.layers[l];
        let cols = layer.mask.active_flags();
        step_block(&mut layer.w, &mut vel.w[l], &grads.w[l], &rows, &cols, lr, mu);
        step_vec(&mut layer.gamma, &mut vel.gamma[l], &grads.gamma[l], &cols, lr, mu);
        step_vec(&mut layer.beta, &mut vel.beta[l], &grads.beta[l], &cols, lr, mu);
    }
    let rows = net.layers.last().expect("non-empty").mask.active_flags();
    let cols = vec![true; net.head.cols()];
    step_block(&mut net.head, &mut vel.head, &grads.head, &rows, &cols, lr, mu);
    let all = vec![true; net.head_bias.len()];
    step_vec(&mut net.head_bias, &mut vel.head_bias, &grads.head_bias, &all, lr, mu);
    state.iteration += 1;
}

/// Advances the per-weight moving averages on live coordinates.
pub fn update_ema(net: &mut SimNetwork) {
    for l in 0..net.layers.len() {
        let rows = net.input_active(l);
        let layer = &mut net.layers[l];
        let cols = layer.mask.active_flags();
        for (i, &r) in rows.iter().enumerate() {
            if !r {
                continue;
            }
            let w = layer.w.row(i).to_vec();
            let e = layer.ema.row_mut(i);
            for j in 0..cols.len() {
                if cols[j] {
                    ema_update(&mut e[j..j + 1], &w[j..j + 1], EMA_DECAY);
                }
            }
        }
    }
}
