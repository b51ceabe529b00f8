use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Retained channel set of one layer. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMask")]
pub struct ChannelMask {
    layer_id: usize,
    total_channels: usize,
    retained: Vec<usize>,
}

#[derive(Deserialize)]
struct RawMask {
    layer_id: usize,
    total_channels: usize,
    retained: Vec<usize>,
}

impl TryFrom<RawMask> for ChannelMask {
    type Error = Error;

    fn try_from(raw: RawMask) -> Result<Self> {
        ChannelMask::from_retained(raw.layer_id, raw.total_channels, raw.retained)
    }
}

impl ChannelMask {
    pub fn full(layer_id: usize, total_channels: usize) -> Self {
        ChannelMask {
            layer_id,
            total_channels,
            retained: (0..total_channels).collect(),
        }
    }

    pub fn from_retained(layer_id: usize, total_channels: usize, mut retained: Vec<usize>) -> Result<Self> {
        retained.sort_unstable();
        if retained.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("layer {layer_id}: duplicate retained channel")));
        }
        if retained.last().is_some_and(|&j| j >= total_channels) {
            return Err(Error::InvalidInput(format!(
                "layer {layer_id}: retained channel out of range for {total_channels} channels"
            )));
        }
        if retained.is_empty() {
            return Err(Error::InvalidInput(format!("layer {layer_id}: a layer cannot be fully pruned")));
        }
        Ok(ChannelMask {
            layer_id,
            total_channels,
            retained,
        })
    }

    pub fn layer_id(&self) -> usize {
        self.layer_id
    }

    pub fn total_channels(&self) -> usize {
        self.total_channels
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn num_retained(&self) -> usize {
        self.retained.len()
    }

    pub fn pruned(&self) -> Vec<usize> {
        let flags = self.active_flags();
        (0..self.total_channels).filter(|&j| !flags[j]).collect()
    }

    pub fn is_retained(&self, j: usize) -> bool {
        self.retained.binary_search(&j).is_ok()
    }

    pub fn is_full(&self) -> bool {
        self.retained.len() == self.total_channels
    }

    pub fn active_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.total_channels];
        for &j in &self.retained {
            flags[j] = true;
        }
        flags
    }

    /// Removes channels from the retained set. Fails without modifying the
    /// mask if a channel is not retained or the layer would become empty.
    pub fn remove(&mut self, channels: &[usize]) -> Result<()> {
        if let Some(&j) = channels.iter().find(|&&j| !self.is_retained(j)) {
            return Err(Error::InvalidArgument(format!(
                "layer {}: channel {j} is not retained",
                self.layer_id
            )));
        }
        let keep: Vec<usize> = self
            .retained
            .iter()
            .copied()
            .filter(|j| !channels.contains(j))
            .collect();
        if keep.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "layer {}: pruning would remove every channel",
                self.layer_id
            )));
        }
        self.retained = keep;
        Ok(())
    }

    /// Adds pruned channels back to the retained set.
    pub fn insert(&mut self, channels: &[usize]) -> Result<()> {
        for &j in channels {
            if j >= self.total_channels {
                return Err(Error::InvalidArgument(format!(
                    "layer {}: channel {j} out of range",
                    self.layer_id
                )));
            }
            if self.is_retained(j) {
                return Err(Error::InvalidArgument(format!(
                    "layer {}: channel {j} is already retained",
                    self.layer_id
                )));
            }
        }
        self.retained.extend_from_slice(channels);
        self.retained.sort_unstable();
        if self.retained.windows(2).any(|w| w[0] == w[1]) {
            self.retained.dedup();
            return Err(Error::InvalidArgument(format!(
                "layer {}: duplicate channel in insert",
                self.layer_id
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remove_and_insert() {
        let mut m = ChannelMask::full(0, 4);
        m.remove(&[1, 3]).unwrap();
        assert_eq!(m.retained(), &[0, 2]);
        assert_eq!(m.pruned(), vec![1, 3]);
        m.insert(&[3]).unwrap();
        assert_eq!(m.retained(), &[0, 2, 3]);
        assert!(m.insert(&[0]).is_err());
        assert!(m.remove(&[1]).is_err());
    }

    #[test]
    fn never_empty() {
        let mut m = ChannelMask::full(2, 2);
        assert!(m.remove(&[0, 1]).is_err());
        assert_eq!(m.num_retained(), 2);
        assert!(ChannelMask::from_retained(0, 3, vec![]).is_err());
        assert!(ChannelMask::from_retained(0, 3, vec![1, 1]).is_err());
        assert!(ChannelMask::from_retained(0, 3, vec![3]).is_err());
    }
}
