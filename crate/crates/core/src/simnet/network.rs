use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explore::{he_normal, ArchivedChannel, ChannelMask, ChannelShape, MruCache};
use crate::linalg::Matrix;

/// Per-channel normalization applied before the learnable scale and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnMode {
    /// Batch standardization (mean 0, variance 1) then `gamma * x + beta`.
    Standardize,
    /// `gamma * x + beta` only.
    ScaleOnly,
}

impl fmt::Display for BnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BnMode::Standardize => "standardize",
            BnMode::ScaleOnly => "scale_only",
        })
    }
}

impl FromStr for BnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standardize" => Ok(BnMode::Standardize),
            "scale_only" => Ok(BnMode::ScaleOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown bn mode `{other}`, expected standardize or scale_only"
            ))),
        }
    }
}

/// One channelized layer. `w` is `fan_in x width`; column `j` is channel `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mask: ChannelMask,
    /// Moving average of `w`, updated on live coordinates only.
    pub ema: Matrix,
}

impl Layer {
    pub fn width(&self) -> usize {
        self.w.cols()
    }
}

/// Stack of channelized dense layers followed by a linear classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimNetwork {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
    /// `width_last x classes`.
    pub head: Matrix,
    pub head_bias: Vec<f64>,
    pub bn_mode: BnMode,
}

impl SimNetwork {
    /// He-normal weights, unit scale, zero shift, all channels retained.
    pub fn new_random<R: Rng + ?Sized>(
        input_dim: usize,
        widths: &[usize],
        classes: usize,
        bn_mode: BnMode,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || classes == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "bad architecture: input {input_dim}, widths {widths:?}, classes {classes}"
            )));
        }
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input_dim;
        for (l, &c) in widths.iter().enumerate() {
            let dist = he_normal(fan_in);
            let w = Matrix::from_fn(fan_in, c, |_, _| dist.sample(rng));
            layers.push(Layer {
                ema: w.clone(),
                w,
                gamma: vec![1.0; c],
                beta: vec![0.0; c],
                mask: ChannelMask::full(l, c),
            });
            fan_in = c;
        }
        let dist = rand_distr::Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("finite std");
        let head = Matrix::from_fn(fan_in, classes, |_, _| dist.sample(rng));
        Ok(SimNetwork {
            input_dim,
            layers,
            head,
            head_bias: vec![0.0; classes],
            bn_mode,
        })
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::width).collect()
    }

    pub fn classes(&self) -> usize {
        self.head.cols()
    }

    pub fn retained_counts(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.mask.num_retained()).collect()
    }

    pub fn masks(&self) -> Vec<&ChannelMask> {
        self.layers.iter().map(|l| &l.mask).collect()
    }

    /// Activity flags of the inputs feeding layer `l`.
    pub fn input_active(&self, l: usize) -> Vec<bool> {
        if l == 0 {
            vec![true; self.input_dim]
        } else {
            self.layers[l - 1].mask.active_flags()
        }
    }

    pub fn channel_shape(&self, l: usize) -> ChannelShape {
        let layer = &self.layers[l];
        ChannelShape {
            fan_in: layer.w.rows(),
            fan_out: self.next_block(l).cols(),
            width: layer.width(),
        }
    }

    fn next_block(&self, l: usize) -> &Matrix {
        if l + 1 < self.layers.len() {
            &self.layers[l + 1].w
        } else {
            &self.head
        }
    }

    /// Moves channel `(l, j)` from the live network into `cache` and zeroes
    /// its live coordinates. Coordinates shared with a pruned channel of an
    /// adjacent layer are read from that channel's archive.
    pub fn archive_channel(&mut self, l: usize, j: usize, cache: &mut MruCache, step: u64) -> Result<()> {
        if !self.layers[l].mask.is_retained(j) {
            return Err(Error::InvalidArgument(format!("channel ({l}, {j}) is already pruned")));
        }
        let in_act = self.input_active(l);
        let out_act = self.output_active(l);

        let mut out_weights = Vec::with_capacity(in_act.len());
        for (i, &act) in in_act.iter().enumerate() {
            let v = if act {
                self.layers[l].w.get(i, j)
            } else {
                shared(cache, l - 1, i, |r| r.in_weights[j])?
            };
            out_weights.push(v);
        }
        let mut in_weights = Vec::with_capacity(out_act.len());
        for (m, &act) in out_act.iter().enumerate() {
            let v = if act {
                self.next_block(l).get(j, m)
            } else {
                shared(cache, l + 1, m, |r| r.out_weights[j])?
            };
            in_weights.push(v);
        }
        let layer = &self.layers[l];
        let record = ArchivedChannel {
            out_weights,
            in_weights,
            gamma: layer.gamma[j],
            beta: layer.beta[j],
            ema_out_weights: Some(layer.ema.col(j)),
            step_archived: step,
        };
        self.layers[l].mask.remove(&[j])?;
        cache.insert(l, j, record)?;

        let layer = &mut self.layers[l];
        layer.w.set_col(j, &vec![0.0; layer.w.rows()]);
        layer.gamma[j] = 0.0;
        layer.beta[j] = 0.0;
        let next = self.next_block_mut(l);
        next.row_mut(j).iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }

    /// Writes `record` into pruned channel `(l, j)`, marks it retained and
    /// drops its cache entry. Coordinates whose other end is still pruned are
    /// written into that channel's archive instead of the live network.
    pub fn splice_channel(&mut self, l: usize, j: usize, record: &ArchivedChannel, cache: &mut MruCache) -> Result<()> {
        let shape = self.channel_shape(l);
        if record.out_weights.len() != shape.fan_in || record.in_weights.len() != shape.fan_out {
            return Err(Error::Shape(format!(
                "record for ({l}, {j}) does not match shape {shape:?}"
            )));
        }
        if self.layers[l].mask.is_retained(j) {
            return Err(Error::InvalidArgument(format!("channel ({l}, {j}) is already retained")));
        }
        let in_act = self.input_active(l);
        let out_act = self.output_active(l);
        for (i, &act) in in_act.iter().enumerate() {
            let v = record.out_weights[i];
            if act {
                self.layers[l].w.set(i, j, v);
            } else {
                shared_mut(cache, l - 1, i)?.in_weights[j] = v;
            }
        }
        for (m, &act) in out_act.iter().enumerate() {
            let v = record.in_weights[m];
            if act {
                self.next_block_mut(l).set(j, m, v);
            } else {
                shared_mut(cache, l + 1, m)?.out_weights[j] = v;
            }
        }
        let layer = &mut self.layers[l];
        layer.gamma[j] = record.gamma;
        layer.beta[j] = record.beta;
        let ema = record.ema_out_weights.as_ref().unwrap_or(&record.out_weights);
        layer.ema.set_col(j, ema);
        layer.mask.insert(&[j])?;
        cache.remove(l, j);
        Ok(())
    }

    fn output_active(&self, l: usize) -> Vec<bool> {
        if l + 1 < self.layers.len() {
            self.layers[l + 1].mask.active_flags()
        } else {
            vec![true; self.head.cols()]
        }
    }

    fn next_block_mut(&mut self, l: usize) -> &mut Matrix {
        if l + 1 < self.layers.len() {
            &mut self.layers[l + 1].w
        } else {
            &mut self.head
        }
    }

    /// Elementwise 0/1 mask over every parameter, in [`flatten`](Self::flatten) order.
    pub fn parameter_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.layers.len() {
            let rows = self.input_active(l);
            let cols = self.layers[l].mask.active_flags();
            for &r in &rows {
                out.extend(cols.iter().map(|&c| r && c));
            }
            out.extend_from_slice(&cols);
            out.extend_from_slice(&cols);
        }
        let last = self.layers.last().expect("non-empty").mask.active_flags();
        for &r in &last {
            out.extend(std::iter::repeat_n(r, self.head.cols()));
        }
        out.extend(std::iter::repeat_n(true, self.head_bias.len()));
        out
    }

    /// True when every masked parameter coordinate is exactly zero.
    pub fn masked_coordinates_are_zero(&self) -> bool {
        self.flatten()
            .iter()
            .zip(self.parameter_mask())
            .all(|(v, m)| m || *v == 0.0)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + 2 * l.width())
            .sum::<usize>()
            + self.head.rows() * self.head.cols()
            + self.head_bias.len()
    }

    /// All parameters: per layer `w` (row-major), `gamma`, `beta`; then head
    /// and head bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.w.data());
            out.extend_from_slice(&l.gamma);
            out.extend_from_slice(&l.beta);
        }
        out.extend_from_slice(self.head.data());
        out.extend_from_slice(&self.head_bias);
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.param_count()
            )));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.w.data_mut().iter_mut().for_each(|v| *v = it.next().unwrap());
            l.gamma.iter_mut().for_each(|v| *v = it.next().unwrap());
            l.beta.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        self.head.data_mut().iter_mut().for_each(|v| *v = it.next().unwrap());
        self.head_bias.iter_mut().for_each(|v| *v = it.next().unwrap());
        Ok(())
    }
}

fn shared(cache: &MruCache, l: usize, j: usize, f: impl Fn(&ArchivedChannel) -> f64) -> Result<f64> {
    cache
        .get(l, j)
        .map(f)
        .ok_or_else(|| Error::Integrity(format!("pruned channel ({l}, {j}) missing from cache")))
}

fn shared_mut(cache: &mut MruCache, l: usize, j: usize) -> Result<&mut ArchivedChannel> {
    cache
        .get_mut(l, j)
        .ok_or_else(|| Error::Integrity(format!("pruned channel ({l}, {j}) missing from cache")))
}
