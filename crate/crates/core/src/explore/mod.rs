//! The channel exploration engine: masks, the archive of pruned channels,
//! regrowing-factor schedules, layer sparsity allocation, CSS pruning and
//! sampling-based regrowing.

mod allocate;
mod cache;
mod mask;
mod prune;
mod regrow;
mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use allocate::{allocate_layer_sparsity, SparsityAllocation};
pub use cache::{ema_update, restore_weights, ArchivedChannel, ChannelShape, MruCache, EMA_DECAY};
pub use mask::ChannelMask;
pub use prune::{prune_layer_css, retained_count, select_prunable};
pub use regrow::{
    candidate_orthogonality, categorical_draw, regrow_layer, sample_without_replacement,
};
pub use schedule::RegrowSchedule;

pub(crate) use cache::he_normal;

use crate::error::{Error, Result};

/// Ceiling that ignores floating-point noise just above an integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    (x - 1e-9).ceil().max(0.0)
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        "unknown {} `{other}`, expected one of: {}",
                        stringify!($name),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

string_enum!(
    /// Shape of the regrowing-factor decay.
    DecayKind { Constant => "constant", Linear => "linear", Cosine => "cosine" }
);

string_enum!(
    /// How a regrown channel's weights are initialized.
    InitScheme { Zero => "zero", Random => "random", Ema => "ema", Mru => "mru" }
);

string_enum!(
    /// How regrown channels are chosen among the pruned candidates.
    SamplingMode { Importance => "importance", Uniform => "uniform", Deterministic => "deterministic" }
);

/// Hyper-parameters of the prune-and-regrow loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    /// Target global channel sparsity `S`.
    pub sparsity: f64,
    pub delta0: f64,
    /// Iterations between exploration steps.
    pub dt: u64,
    /// Last iteration at which an exploration step may run.
    pub t_max: u64,
    pub scheduler: DecayKind,
    pub init: InitScheme,
    pub sampling: SamplingMode,
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::InvalidArgument(format!(
                "sparsity must be in [0, 1), got {}",
                self.sparsity
            )));
        }
        self.schedule().map(|_| ())
    }

    pub fn schedule(&self) -> Result<RegrowSchedule> {
        RegrowSchedule::new(self.delta0, self.t_max, self.dt, self.scheduler)
    }
}
