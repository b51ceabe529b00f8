use serde::{Deserialize, Serialize};

use super::SimNetwork;

/// Multiply-add counts (one multiply plus one add = one operation) per
/// sample at the current masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    /// One entry per channelized layer: `retained_in * retained_out`.
    pub per_layer: Vec<u64>,
    /// `retained_last * classes`.
    pub head: u64,
    pub total: u64,
    pub dense_total: u64,
    /// `1 - total / dense_total`.
    pub reduction_vs_dense: f64,
}

pub fn count_flops(net: &SimNetwork) -> FlopsReport {
    let mut per_layer = Vec::with_capacity(net.layers.len());
    let mut dense = 0u64;
    let mut fan_in = net.input_dim as u64;
    let mut dense_in = net.input_dim as u64;
    for layer in &net.layers {
        let out = layer.mask.num_retained() as u64;
        per_layer.push(fan_in * out);
        dense += dense_in * layer.width() as u64;
        fan_in = out;
        dense_in = layer.width() as u64;
    }
    let classes = net.classes() as u64;
    let head = fan_in * classes;
    dense += dense_in * classes;
    let total = per_layer.iter().sum::<u64>() + head;
    FlopsReport {
        per_layer,
        head,
        total,
        dense_total: dense,
        reduction_vs_dense: 1.0 - total as f64 / dense as f64,
    }
}
