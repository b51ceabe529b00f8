//! Archive of pruned channels and the weight-restoration schemes used when a
//! channel is regrown.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ChannelMask, InitScheme};
use crate::error::{Error, Result};

/// Decay of the per-weight exponential moving average.
pub const EMA_DECAY: f64 = 0.99;

/// `ema <- decay * ema + (1 - decay) * value`, elementwise.
pub fn ema_update(ema: &mut [f64], value: &[f64], decay: f64) {
    for (e, v) in ema.iter_mut().zip(value) {
        *e = decay * *e + (1.0 - decay) * v;
    }
}

/// Everything a pruned channel owned in the live network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedChannel {
    /// Column of this layer's weight block (length = fan-in).
    pub out_weights: Vec<f64>,
    /// Row of the next layer's weight block, or of the head.
    pub in_weights: Vec<f64>,
    pub gamma: f64,
    pub beta: f64,
    pub ema_out_weights: Option<Vec<f64>>,
    pub step_archived: u64,
}

/// Dimensions needed to validate or synthesize an [`ArchivedChannel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelShape {
    /// Rows of the layer's weight block.
    pub fan_in: usize,
    /// Columns of the next block (next layer width, or class count).
    pub fan_out: usize,
    /// Width of this layer, i.e. the fan-in of the next block.
    pub width: usize,
}

impl ArchivedChannel {
    fn check(&self, key: (usize, usize), shape: ChannelShape) -> Result<()> {
        let bad_len = self.out_weights.len() != shape.fan_in
            || self.in_weights.len() != shape.fan_out
            || self
                .ema_out_weights
                .as_ref()
                .is_some_and(|e| e.len() != shape.fan_in);
        if bad_len {
            return Err(Error::Integrity(format!(
                "entry {key:?} does not match shape {shape:?}"
            )));
        }
        let finite = self.out_weights.iter().all(|v| v.is_finite())
            && self.in_weights.iter().all(|v| v.is_finite())
            && self.gamma.is_finite()
            && self.beta.is_finite()
            && self
                .ema_out_weights
                .as_ref()
                .is_none_or(|e| e.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Integrity(format!("entry {key:?} holds non-finite values")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    layer: usize,
    channel: usize,
    record: ArchivedChannel,
}

/// Archived parameters of every currently pruned channel, keyed by
/// `(layer, channel)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<CacheEntry>", into = "Vec<CacheEntry>")]
pub struct MruCache {
    entries: BTreeMap<(usize, usize), ArchivedChannel>,
}

impl From<Vec<CacheEntry>> for MruCache {
    fn from(v: Vec<CacheEntry>) -> Self {
        MruCache {
            entries: v.into_iter().map(|e| ((e.layer, e.channel), e.record)).collect(),
        }
    }
}

impl From<MruCache> for Vec<CacheEntry> {
    fn from(c: MruCache) -> Self {
        c.entries
            .into_iter()
            .map(|((layer, channel), record)| CacheEntry { layer, channel, record })
            .collect()
    }
}

impl MruCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, layer: usize, channel: usize) -> bool {
        self.entries.contains_key(&(layer, channel))
    }

    pub fn get(&self, layer: usize, channel: usize) -> Option<&ArchivedChannel> {
        self.entries.get(&(layer, channel))
    }

    pub fn get_mut(&mut self, layer: usize, channel: usize) -> Option<&mut ArchivedChannel> {
        self.entries.get_mut(&(layer, channel))
    }

    pub fn insert(&mut self, layer: usize, channel: usize, record: ArchivedChannel) -> Result<()> {
        if self.entries.contains_key(&(layer, channel)) {
            return Err(Error::Integrity(format!(
                "channel ({layer}, {channel}) archived twice"
            )));
        }
        self.entries.insert((layer, channel), record);
        Ok(())
    }

    pub fn remove(&mut self, layer: usize, channel: usize) -> Option<ArchivedChannel> {
        self.entries.remove(&(layer, channel))
    }

    pub fn keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.keys().copied()
    }

    pub fn channels_in_layer(&self, layer: usize) -> Vec<usize> {
        self.entries
            .range((layer, 0)..(layer + 1, 0))
            .map(|(&(_, j), _)| j)
            .collect()
    }

    /// Checks that the cache keys are exactly the pruned channels of `masks`.
    pub fn check_complementarity(&self, masks: &[&ChannelMask]) -> Result<()> {
        let mut expected = Vec::new();
        for m in masks {
            expected.extend(m.pruned().into_iter().map(|j| (m.layer_id(), j)));
        }
        expected.sort_unstable();
        let actual: Vec<(usize, usize)> = self.keys().collect();
        if actual != expected {
            return Err(Error::Integrity(format!(
                "cache keys {actual:?} differ from pruned set {expected:?}"
            )));
        }
        Ok(())
    }
}

/// Weights to splice into a regrown channel.
///
/// `mru` returns the archived record unchanged; `ema` swaps in the archived
/// moving average for the outgoing column and keeps the rest; `zero` returns
/// all zeros (including the scale); `random` draws He-normal weights with
/// unit scale and zero shift.
pub fn restore_weights<R: Rng + ?Sized>(
    cache: &MruCache,
    layer: usize,
    channel: usize,
    scheme: InitScheme,
    rng: &mut R,
    shape: ChannelShape,
) -> Result<ArchivedChannel> {
    let archived = cache.get(layer, channel);
    if let Some(rec) = archived {
        rec.check((layer, channel), shape)?;
    }
    let step_archived = archived.map_or(0, |r| r.step_archived);
    match scheme {
        InitScheme::Mru => archived.cloned().ok_or_else(|| {
            Error::Integrity(format!("no archived weights for ({layer}, {channel})"))
        }),
        InitScheme::Ema => {
            let rec = archived.ok_or_else(|| {
                Error::Integrity(format!("no archived weights for ({layer}, {channel})"))
            })?;
            let ema = rec.ema_out_weights.clone().ok_or_else(|| {
                Error::Integrity(format!("no moving average archived for ({layer}, {channel})"))
            })?;
            Ok(ArchivedChannel {
                out_weights: ema,
                ..rec.clone()
            })
        }
        InitScheme::Zero => Ok(ArchivedChannel {
            out_weights: vec![0.0; shape.fan_in],
            in_weights: vec![0.0; shape.fan_out],
            gamma: 0.0,
            beta: 0.0,
            ema_out_weights: archived.and_then(|r| r.ema_out_weights.clone()),
            step_archived,
        }),
        InitScheme::Random => {
            let out_dist = he_normal(shape.fan_in);
            let in_dist = he_normal(shape.width);
            let out_weights = (0..shape.fan_in).map(|_| out_dist.sample(rng)).collect();
            let in_weights = (0..shape.fan_out).map(|_| in_dist.sample(rng)).collect();
            Ok(ArchivedChannel {
                out_weights,
                in_weights,
                gamma: 1.0,
                beta: 0.0,
                ema_out_weights: archived.and_then(|r| r.ema_out_weights.clone()),
                step_archived,
            })
        }
    }
}

pub(crate) fn he_normal(fan_in: usize) -> Normal<f64> {
    Normal::new(0.0, (2.0 / fan_in.max(1) as f64).sqrt()).expect("finite std")
}
