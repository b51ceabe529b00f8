//! Convergence probe for the masked update rule: fixed masks, full-batch
//! gradients, plain SGD with a step size shrinking as `1/sqrt(T)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::backward;
use super::optim::{sgd_step_masked, TrainState};
use super::{BnMode, Dataset, SimNetwork};
use crate::error::{Error, Result};
use crate::explore::{select_prunable, MruCache};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub widths: Vec<usize>,
    /// Fraction of each layer's channels masked for the whole run.
    pub masked_fraction: f64,
    /// Step size is `base_lr / sqrt(iterations)`.
    pub base_lr: f64,
    pub iterations: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub iterations: u64,
    pub learning_rate: f64,
    /// Mean of the squared masked-gradient norm over the last 10% of iterations.
    pub trailing_grad_sq: f64,
    pub final_loss: f64,
}

pub fn convergence_probe(data: &Dataset, cfg: &ProbeConfig) -> Result<ProbeReport> {
    if cfg.iterations < 10 {
        return Err(Error::InvalidArgument("probe needs at least 10 iterations".into()));
    }
    if !(0.0..1.0).contains(&cfg.masked_fraction) {
        return Err(Error::InvalidArgument("masked_fraction must be in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = SimNetwork::new_random(data.features(), &cfg.widths, data.classes, BnMode::ScaleOnly, &mut rng)?;
    let mut cache = MruCache::new();
    for l in 0..net.layers.len() {
        let c = net.layers[l].width();
        let keep = c - ((cfg.masked_fraction * c as f64).floor() as usize).min(c - 1);
        let drop = select_prunable(&net.layers[l].w, net.layers[l].mask.retained(), keep)?;
        for j in drop {
            net.archive_channel(l, j, &mut cache, 0)?;
        }
    }

    let lr = cfg.base_lr / (cfg.iterations as f64).sqrt();
    let mut state = TrainState::new(&net, lr, 0.0)?;
    let tail_start = cfg.iterations - cfg.iterations / 10;
    let (mut tail_sum, mut tail_n) = (0.0, 0u64);
    let mut last_loss = f64::NAN;
    for t in 0..cfg.iterations {
        let (loss, grads) = backward(&net, &data.train_x, &data.train_y, 0.0)?;
        if t >= tail_start {
            tail_sum += grads.squared_norm();
            tail_n += 1;
        }
        last_loss = loss;
        sgd_step_masked(&mut state, &mut net, &grads);
    }
    Ok(ProbeReport {
        iterations: cfg.iterations,
        learning_rate: lr,
        trailing_grad_sq: tail_sum / tail_n as f64,
        final_loss: last_loss,
    })
}
