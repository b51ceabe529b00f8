//! Training loops: plain training, the prune-and-regrow exploration loop and
//! the one-shot and gradual pruning baselines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::{accuracy, backward_from, forward, forward_with_stats, population_stats};
use super::optim::{learning_rate_at, sgd_step_masked, update_ema, TrainState};
use super::{count_flops, BnMode, Dataset, SimNetwork};
use crate::error::{Error, Result};
use crate::explore::{
    allocate_layer_sparsity, ceil_tol, regrow_layer, restore_weights, select_prunable,
    ExplorationConfig, InitScheme, MruCache, RegrowSchedule,
};

/// Fraction of training after which the one-shot baseline prunes.
pub const ONE_SHOT_FRACTION: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Chex,
    OneShotEarly,
    Gradual,
    Plain,
}

impl RunMode {
    pub const ALL: &'static [RunMode] = &[RunMode::Chex, RunMode::OneShotEarly, RunMode::Gradual, RunMode::Plain];

    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Chex => "chex",
            RunMode::OneShotEarly => "one_shot_early",
            RunMode::Gradual => "gradual",
            RunMode::Plain => "plain",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RunMode::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown mode `{s}`, expected chex, one_shot_early, gradual or plain"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub widths: Vec<usize>,
    pub bn_mode: BnMode,
    pub lr: f64,
    pub momentum: f64,
    pub warmup_fraction: f64,
    pub label_smoothing: f64,
    pub batch_size: usize,
    /// Total training iterations.
    pub iterations: u64,
    pub eval_every: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: RunMode,
    pub train: TrainConfig,
    pub explore: ExplorationConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        if t.widths.is_empty() || t.widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {:?}", t.widths)));
        }
        if t.batch_size == 0 || t.iterations == 0 || t.eval_every == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, iterations and eval_every must be positive".into(),
            ));
        }
        if t.bn_mode == BnMode::Standardize && t.batch_size < 2 {
            return Err(Error::InvalidArgument("standardization needs batch_size >= 2".into()));
        }
        if !(0.0..1.0).contains(&t.label_smoothing) {
            return Err(Error::InvalidArgument("label_smoothing must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&t.warmup_fraction) {
            return Err(Error::InvalidArgument("warmup fraction must be in [0, 1]".into()));
        }
        self.explore.validate()?;
        if self.explore.t_max > t.iterations {
            return Err(Error::InvalidArgument(format!(
                "t_max ({}) exceeds total iterations ({})",
                self.explore.t_max, t.iterations
            )));
        }
        Ok(())
    }
}

/// One row of the metrics stream. Equality ignores the wall time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: u64,
    /// Mean training loss since the previous row.
    pub loss: f64,
    pub acc: f64,
    pub flops: u64,
    pub delta: f64,
    pub retained_per_layer: Vec<usize>,
    /// Reported on the console only; excluded from files so reruns are
    /// byte-identical.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

impl PartialEq for MetricsRow {
    fn eq(&self, other: &Self) -> bool {
        self.iteration == other.iteration
            && self.loss.to_bits() == other.loss.to_bits()
            && self.acc.to_bits() == other.acc.to_bits()
            && self.flops == other.flops
            && self.delta.to_bits() == other.delta.to_bits()
            && self.retained_per_layer == other.retained_per_layer
    }
}

/// What one pruning (and possibly regrowing) event did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: u64,
    pub step: u64,
    pub target_sparsity: f64,
    pub kappa: Vec<f64>,
    pub target_retained: Vec<usize>,
    pub retained_after_prune: Vec<usize>,
    pub delta: f64,
    pub regrown: Vec<Vec<usize>>,
    pub retained_after_regrow: Vec<usize>,
    pub flops_after_prune: u64,
    pub flops_after_regrow: u64,
}

/// Named random streams; each is consumed by exactly one concern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngStreams {
    pub init: ChaCha8Rng,
    pub data: ChaCha8Rng,
    pub explore: ChaCha8Rng,
    pub restore: ChaCha8Rng,
}

impl RngStreams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        RngStreams {
            init: stream(1),
            data: stream(2),
            explore: stream(3),
            restore: stream(4),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub iterations_checked: u64,
    pub regrows_verified: u64,
}

/// All mutable state of a run; enough to resume it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub net: SimNetwork,
    pub optimizer: TrainState,
    pub cache: MruCache,
    pub rngs: RngStreams,
    pub order: Vec<usize>,
    pub cursor: usize,
    pub metrics: Vec<MetricsRow>,
    pub steps: Vec<StepRecord>,
    pub loss_sum: f64,
    pub loss_count: u64,
    pub last_delta: f64,
    pub audit: AuditReport,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub network: SimNetwork,
    pub metrics: Vec<MetricsRow>,
    pub steps: Vec<StepRecord>,
    pub audit: AuditReport,
}

impl RunOutcome {
    pub fn final_accuracy(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.acc)
    }
}

pub struct Trainer<'a> {
    data: &'a Dataset,
    config: RunConfig,
    schedule: RegrowSchedule,
    state: TrainerState,
    audit: bool,
    started: Instant,
}

impl<'a> Trainer<'a> {
    /// Fresh run from a randomly initialized network.
    pub fn new(data: &'a Dataset, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut rngs = RngStreams::from_seed(config.train.seed);
        let net = SimNetwork::new_random(
            data.features(),
            &config.train.widths,
            data.classes,
            config.train.bn_mode,
            &mut rngs.init,
        )?;
        Self::with_network(data, config, net, rngs)
    }

    /// Fresh run from a given network.
    pub fn with_network(data: &'a Dataset, config: RunConfig, net: SimNetwork, rngs: RngStreams) -> Result<Self> {
        config.validate()?;
        let optimizer = TrainState::new(&net, config.train.lr, config.train.momentum)?;
        let state = TrainerState {
            net,
            optimizer,
            cache: MruCache::new(),
            rngs,
            order: Vec::new(),
            cursor: 0,
            metrics: Vec::new(),
            steps: Vec::new(),
            loss_sum: 0.0,
            loss_count: 0,
            last_delta: 0.0,
            audit: AuditReport::default(),
        };
        Self::from_state(data, config, state)
    }

    /// Resumes from saved state.
    pub fn from_state(data: &'a Dataset, config: RunConfig, state: TrainerState) -> Result<Self> {
        config.validate()?;
        if state.net.input_dim != data.features() || state.net.classes() != data.classes {
            return Err(Error::Shape("network does not match the dataset".into()));
        }
        if state.net.widths() != config.train.widths {
            return Err(Error::Shape("network widths do not match the config".into()));
        }
        state.cache.check_complementarity(&state.net.masks())?;
        let schedule = config.explore.schedule()?;
        Ok(Trainer {
            data,
            config,
            schedule,
            state,
            audit: false,
            started: Instant::now(),
        })
    }

    /// Checks the masked-update and cache invariants after every iteration.
    pub fn set_audit(&mut self, on: bool) {
        self.audit = on;
    }

    pub fn iteration(&self) -> u64 {
        self.state.optimizer.iteration
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn network(&self) -> &SimNetwork {
        &self.state.net
    }

    pub fn is_finished(&self) -> bool {
        self.iteration() >= self.config.train.iterations
    }

    pub fn run(mut self) -> Result<RunOutcome> {
        self.run_until(self.config.train.iterations)?;
        Ok(self.into_outcome())
    }

    pub fn run_until(&mut self, t: u64) -> Result<()> {
        let end = t.min(self.config.train.iterations);
        while self.iteration() < end {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_outcome(self) -> RunOutcome {
        RunOutcome {
            network: self.state.net,
            metrics: self.state.metrics,
            steps: self.state.steps,
            audit: self.state.audit,
        }
    }

    pub fn into_state(self) -> TrainerState {
        self.state
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let n = self.data.train_len();
        let b = self.config.train.batch_size.min(n);
        if self.state.order.len() != n || self.state.cursor + b > n {
            self.state.order = (0..n).collect();
            self.state.order.shuffle(&mut self.state.rngs.data);
            self.state.cursor = 0;
        }
        let idx = self.state.order[self.state.cursor..self.state.cursor + b].to_vec();
        self.state.cursor += b;
        idx
    }

    /// One training iteration followed by any scheduled exploration event.
    pub fn step(&mut self) -> Result<()> {
        let t = self.iteration() + 1;
        let tc = &self.config.train;
        let (lr, smoothing, total) = (tc.lr, tc.label_smoothing, tc.iterations);
        let warm = tc.warmup_fraction;

        let idx = self.next_batch();
        let (x, y) = self.data.train_batch(&idx);
        let fwd = forward(&self.state.net, &x)?;
        let (loss, grads) = backward_from(&self.state.net, &fwd, &y, smoothing)?;
        self.state.optimizer.learning_rate = learning_rate_at(lr, t, total, warm);
        sgd_step_masked(&mut self.state.optimizer, &mut self.state.net, &grads);
        update_ema(&mut self.state.net);
        self.state.loss_sum += loss;
        self.state.loss_count += 1;

        self.explore_hook(t)?;

        if self.audit {
            self.check_invariants()?;
            self.state.audit.iterations_checked += 1;
        }
        if t.is_multiple_of(self.config.train.eval_every) || t == total {
            self.record_metrics(t)?;
        }
        Ok(())
    }

    fn explore_hook(&mut self, t: u64) -> Result<()> {
        let ex = self.config.explore;
        let on_grid = t.is_multiple_of(ex.dt) && t <= ex.t_max;
        let final_step = self.schedule.final_step();
        match self.config.mode {
            RunMode::Plain => {}
            RunMode::Chex if on_grid => {
                let step = t / ex.dt;
                self.prune_step(t, step, ex.sparsity)?;
                // the last step only prunes so the run ends at the target sparsity
                let delta = if step < final_step { self.schedule.delta_at(step) } else { 0.0 };
                self.regrow_step(delta)?;
            }
            RunMode::Gradual if on_grid => {
                let step = t / ex.dt;
                let target = ex.sparsity * step as f64 / final_step as f64;
                self.prune_step(t, step, target.min(ex.sparsity))?;
                self.finish_step_without_regrow();
            }
            RunMode::OneShotEarly => {
                let at = (ceil_tol(ONE_SHOT_FRACTION * self.config.train.iterations as f64) as u64).max(1);
                if t == at {
                    self.prune_step(t, 1, ex.sparsity)?;
                    self.finish_step_without_regrow();
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Re-allocates layer widths from the scaling factors and prunes every
    /// layer down to its allocation with leverage-score CSS.
    fn prune_step(&mut self, t: u64, step: u64, sparsity: f64) -> Result<()> {
        let net = &mut self.state.net;
        let gammas: Vec<Vec<f64>> = net.layers.iter().map(|l| l.gamma.clone()).collect();
        let alloc = allocate_layer_sparsity(&gammas, sparsity)?;
        let targets = alloc.retained_counts(&net.widths());
        let drops = net
            .layers
            .iter()
            .zip(&targets)
            .map(|(layer, &target)| select_prunable(&layer.w, layer.mask.retained(), target))
            .collect::<Result<Vec<_>>>()?;
        for (l, js) in drops.iter().enumerate() {
            for &j in js {
                net.archive_channel(l, j, &mut self.state.cache, t)?;
            }
        }
        if self.audit {
            self.state.cache.check_complementarity(&net.masks())?;
        }
        let retained = net.retained_counts();
        let flops = count_flops(net).total;
        self.state.steps.push(StepRecord {
            iteration: t,
            step,
            target_sparsity: sparsity,
            kappa: alloc.per_layer,
            target_retained: targets,
            retained_after_prune: retained.clone(),
            delta: 0.0,
            regrown: vec![Vec::new(); retained.len()],
            retained_after_regrow: retained,
            flops_after_prune: flops,
            flops_after_regrow: flops,
        });
        Ok(())
    }

    fn finish_step_without_regrow(&mut self) {
        self.state.last_delta = 0.0;
    }

    /// Regrows `ceil(delta * C)` channels per layer and restores their weights.
    fn regrow_step(&mut self, delta: f64) -> Result<()> {
        let ex = self.config.explore;
        let net = &mut self.state.net;
        let mut selections = Vec::with_capacity(net.layers.len());
        for l in 0..net.layers.len() {
            let layer = &net.layers[l];
            let k = ceil_tol(delta * layer.width() as f64) as usize;
            let mut scratch = layer.mask.clone();
            let grown = regrow_layer(
                &mut scratch,
                &self.state.cache,
                &layer.w,
                &net.input_active(l),
                k,
                ex.sampling,
                &mut self.state.rngs.explore,
            )?;
            selections.push(grown);
        }
        for (l, grown) in selections.iter().enumerate() {
            for &j in grown {
                let shape = net.channel_shape(l);
                let record = restore_weights(
                    &self.state.cache,
                    l,
                    j,
                    ex.init,
                    &mut self.state.rngs.restore,
                    shape,
                )?;
                net.splice_channel(l, j, &record, &mut self.state.cache)?;
                if self.audit && ex.init == InitScheme::Mru {
                    verify_restored(net, l, j, &record)?;
                    self.state.audit.regrows_verified += 1;
                }
            }
        }
        if self.audit {
            self.state.cache.check_complementarity(&net.masks())?;
        }
        let retained = net.retained_counts();
        let flops = count_flops(net).total;
        if let Some(rec) = self.state.steps.last_mut() {
            rec.delta = delta;
            rec.regrown = selections;
            rec.retained_after_regrow = retained;
            rec.flops_after_regrow = flops;
        }
        self.state.last_delta = delta;
        Ok(())
    }

    fn check_invariants(&self) -> Result<()> {
        if !self.state.net.masked_coordinates_are_zero() {
            return Err(Error::Integrity(format!(
                "masked coordinate is non-zero at iteration {}",
                self.iteration()
            )));
        }
        self.state.cache.check_complementarity(&self.state.net.masks())
    }

    /// Accuracy on the eval split, standardizing with statistics of the full
    /// training split.
    pub fn evaluate(&self) -> Result<f64> {
        evaluate(&self.state.net, self.data)
    }

    fn record_metrics(&mut self, t: u64) -> Result<()> {
        let acc = self.evaluate()?;
        let loss = if self.state.loss_count > 0 {
            self.state.loss_sum / self.state.loss_count as f64
        } else {
            f64::NAN
        };
        self.state.metrics.push(MetricsRow {
            iteration: t,
            loss,
            acc,
            flops: count_flops(&self.state.net).total,
            delta: self.state.last_delta,
            retained_per_layer: self.state.net.retained_counts(),
            wall_time_ms: self.started.elapsed().as_secs_f64() * 1e3,
        });
        self.state.loss_sum = 0.0;
        self.state.loss_count = 0;
        Ok(())
    }
}

/// Eval-split accuracy of `net`; standardization uses statistics of the
/// whole training split.
pub fn evaluate(net: &SimNetwork, data: &Dataset) -> Result<f64> {
    if data.eval_y.is_empty() {
        return Ok(f64::NAN);
    }
    let logits = match net.bn_mode {
        BnMode::ScaleOnly => forward(net, &data.eval_x)?.logits,
        BnMode::Standardize => {
            let stats = population_stats(net, &data.train_x)?;
            forward_with_stats(net, &data.eval_x, &stats)?.logits
        }
    };
    Ok(accuracy(&logits, &data.eval_y))
}

fn verify_restored(net: &SimNetwork, l: usize, j: usize, record: &crate::explore::ArchivedChannel) -> Result<()> {
    let in_act = net.input_active(l);
    let layer = &net.layers[l];
    let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
    let mut ok = same(layer.gamma[j], record.gamma) && same(layer.beta[j], record.beta);
    for (i, &act) in in_act.iter().enumerate() {
        ok &= !act || same(layer.w.get(i, j), record.out_weights[i]);
    }
    let (next, out_act) = if l + 1 < net.layers.len() {
        (&net.layers[l + 1].w, net.layers[l + 1].mask.active_flags())
    } else {
        (&net.head, vec![true; net.head.cols()])
    };
    for (m, &act) in out_act.iter().enumerate() {
        ok &= !act || same(next.get(j, m), record.in_weights[m]);
    }
    if ok {
        Ok(())
    } else {
        Err(Error::Integrity(format!("restored channel ({l}, {j}) differs from its archive")))
    }
}

pub fn run_chex(data: &Dataset, config: &RunConfig) -> Result<RunOutcome> {
    let mut cfg = config.clone();
    cfg.mode = RunMode::Chex;
    Trainer::new(data, cfg)?.run()
}

/// Runs a pruning baseline (`one_shot_early`, `gradual`) or plain training.
pub fn run_baseline(data: &Dataset, config: &RunConfig, mode: RunMode) -> Result<RunOutcome> {
    if mode == RunMode::Chex {
        return Err(Error::InvalidArgument("chex is not a baseline mode".into()));
    }
    let mut cfg = config.clone();
    cfg.mode = mode;
    Trainer::new(data, cfg)?.run()
}
