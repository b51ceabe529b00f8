//! Channel exploration for structured pruning.
//!
//! The crate trains a small channelized feed-forward network while
//! repeatedly pruning channels with leverage-score column subset selection
//! and regrowing a decaying fraction of them by orthogonality-weighted
//! importance sampling. Layer widths are re-allocated at every step from the
//! global percentile of the per-channel scaling factors.
//!
//! Modules:
//! - [`linalg`]: dense SVD, pseudo-inverse, CSS residuals, leverage scores.
//! - [`explore`]: masks, MRU cache, schedulers, allocation, prune and regrow.
//! - [`simnet`]: the network, exact gradients, masked SGD, training loops.
//! - [`oracle`]: independent reference implementations used for verification.
//! - [`harness`]: configuration, datasets, checkpoints, metrics and the CLI.

pub mod error;
pub mod explore;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod simnet;

pub use error::{Error, Result};
