use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DecayKind;
use crate::error::{Error, Result};

/// Decay of the regrowing factor across exploration steps.
///
/// With `n = t_max / dt` steps, the cosine schedule is
/// `delta0 * (1 + cos(step * pi / n)) / 2`, the linear schedule is
/// `delta0 * (1 - step / n)` and the constant schedule stays at `delta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegrowSchedule {
    pub delta0: f64,
    pub t_max: u64,
    pub dt: u64,
    pub kind: DecayKind,
}

impl RegrowSchedule {
    pub fn new(delta0: f64, t_max: u64, dt: u64, kind: DecayKind) -> Result<Self> {
        if !(delta0 > 0.0 && delta0 <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta0 must be in (0, 1], got {delta0}")));
        }
        if dt == 0 {
            return Err(Error::InvalidArgument("dt must be at least 1".into()));
        }
        if dt > t_max {
            return Err(Error::InvalidArgument(format!(
                "dt ({dt}) exceeds t_max ({t_max})"
            )));
        }
        Ok(RegrowSchedule {
            delta0,
            t_max,
            dt,
            kind,
        })
    }

    /// `t_max / dt` as a real number.
    pub fn horizon(&self) -> f64 {
        self.t_max as f64 / self.dt as f64
    }

    /// Index of the last exploration step.
    pub fn final_step(&self) -> u64 {
        self.t_max / self.dt
    }

    pub fn delta_at(&self, step: u64) -> f64 {
        let n = self.horizon();
        let s = step as f64;
        if s > n {
            return 0.0;
        }
        match self.kind {
            DecayKind::Cosine => 0.5 * (1.0 + (s * PI / n).cos()) * self.delta0,
            DecayKind::Linear => self.delta0 * (1.0 - s / n),
            DecayKind::Constant => self.delta0,
        }
    }
}
