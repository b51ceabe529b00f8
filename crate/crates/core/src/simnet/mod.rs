//! Desk-scale channelized network: forward and backward passes, the masked
//! optimizer, FLOPs accounting and the training loops.

mod data;
mod flops;
mod grad;
mod network;
mod optim;
mod probe;
mod train;

pub use data::Dataset;
pub use flops::{count_flops, FlopsReport};
pub use grad::{
    accuracy, backward, backward_from, cross_entropy, forward, forward_with_stats, loss, population_stats,
    BnStats, ForwardPass, Gradients, BN_EPS,
};
pub use network::{BnMode, Layer, SimNetwork};
pub use optim::{learning_rate_at, sgd_step_masked, update_ema, TrainState};
pub use probe::{convergence_probe, ProbeConfig, ProbeReport};
pub use train::{
    evaluate, run_baseline, run_chex, AuditReport, MetricsRow, RngStreams, RunConfig, RunMode, RunOutcome,
    StepRecord, TrainConfig, Trainer, TrainerState, ONE_SHOT_FRACTION,
};
