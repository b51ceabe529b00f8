use chex::explore::{DecayKind, ExplorationConfig, InitScheme, MruCache, SamplingMode};
use chex::harness::config::DatasetKind;
use chex::harness::dataset::generate_synthetic_dataset;
use chex::harness::suite::{gradient_audit, random_matrix};
use chex::linalg::Matrix;
use chex::oracle::reference_forward;
use chex::simnet::{
    backward, count_flops, forward, run_baseline, run_chex, BnMode, Dataset, RunConfig, RunMode, SimNetwork,
    TrainConfig, Trainer,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(mode: RunMode, sparsity: f64, seed: u64) -> RunConfig {
    RunConfig {
        mode,
        train: TrainConfig {
            widths: vec![12, 12],
            bn_mode: BnMode::Standardize,
            lr: 0.1,
            momentum: 0.9,
            warmup_fraction: 0.05,
            label_smoothing: 0.0,
            batch_size: 32,
            iterations: 300,
            eval_every: 15,
            seed,
        },
        explore: ExplorationConfig {
            sparsity,
            delta0: 0.3,
            dt: 30,
            t_max: 240,
            scheduler: DecayKind::Cosine,
            init: InitScheme::Mru,
            sampling: SamplingMode::Importance,
        },
    }
}

fn spirals() -> Dataset {
    generate_synthetic_dataset(DatasetKind::Spirals, 600, 3, 0.1, 2).unwrap()
}

#[test]
fn forward_matches_reference_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for mode in [BnMode::ScaleOnly, BnMode::Standardize] {
        let mut net = SimNetwork::new_random(4, &[4, 3], 3, mode, &mut rng).unwrap();
        let mut cache = MruCache::new();
        net.archive_channel(0, 2, &mut cache, 0).unwrap();
        let x = random_matrix(7, 4, &mut rng);
        let ours = forward(&net, &x).unwrap();
        let reference = reference_forward(&net, &x);
        for (b, row) in reference.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert!((ours.logits.get(b, k) - v).abs() < 1e-10);
            }
            assert_eq!(ours.activation(0).get(b, 2), 0.0);
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    assert!(gradient_audit(5, BnMode::ScaleOnly, 1).unwrap() <= 1e-4);
    assert!(gradient_audit(5, BnMode::Standardize, 2).unwrap() <= 1e-4);
}

#[test]
fn zero_scale_blocks_gradient_to_upstream_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut net = SimNetwork::new_random(3, &[4, 3], 2, BnMode::ScaleOnly, &mut rng).unwrap();
    net.layers[0].gamma = vec![0.0; 4];
    let x = random_matrix(5, 3, &mut rng);
    let (_, g) = backward(&net, &x, &[0, 1, 0, 1, 1], 0.0).unwrap();
    assert!(g.w[0].data().iter().all(|&v| v == 0.0));
}

#[test]
fn flops_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut net = SimNetwork::new_random(4, &[8], 3, BnMode::ScaleOnly, &mut rng).unwrap();
    let dense = count_flops(&net);
    assert_eq!(dense.total, 56);
    assert_eq!(dense.reduction_vs_dense, 0.0);
    let mut cache = MruCache::new();
    for j in 4..8 {
        net.archive_channel(0, j, &mut cache, 0).unwrap();
    }
    let f = count_flops(&net);
    assert_eq!(f.total, 28);
    assert!((f.reduction_vs_dense - 0.5).abs() < 1e-15);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = spirals();
    let a = run_chex(&data, &config(RunMode::Chex, 0.5, 4)).unwrap();
    let b = run_chex(&data, &config(RunMode::Chex, 0.5, 4)).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.network, b.network);
}

#[test]
fn no_sparsity_is_plain_training() {
    let data = spirals();
    let chex = run_chex(&data, &config(RunMode::Chex, 0.0, 5)).unwrap();
    let plain = run_baseline(&data, &config(RunMode::Plain, 0.0, 5), RunMode::Plain).unwrap();
    assert!(chex.network.layers.iter().all(|l| l.mask.is_full()));
    for (a, b) in chex.metrics.iter().zip(&plain.metrics) {
        assert!((a.acc - b.acc).abs() <= 1e-12);
    }
}

#[test]
fn exploration_steps_follow_the_cosine_schedule() {
    let data = spirals();
    let out = run_chex(&data, &config(RunMode::Chex, 0.5, 6)).unwrap();
    assert_eq!(out.steps.len(), 8);
    let sched = config(RunMode::Chex, 0.5, 6).explore.schedule().unwrap();
    for s in &out.steps[..7] {
        assert_eq!(s.delta, sched.delta_at(s.step));
        let expected: usize = s
            .retained_after_prune
            .iter()
            .zip(&[12usize, 12])
            .map(|(&kept, &c)| (((s.delta * c as f64) - 1e-9).ceil() as usize).min(c - kept))
            .sum();
        assert_eq!(s.regrown.iter().map(Vec::len).sum::<usize>(), expected);
    }
    for pair in out.steps.windows(2) {
        assert!(pair[1].flops_after_prune <= pair[0].flops_after_regrow);
    }
}

#[test]
fn final_structure_meets_the_target() {
    let data = spirals();
    for mode in [RunMode::Chex, RunMode::Gradual, RunMode::OneShotEarly] {
        let cfg = config(mode, 0.5, 7);
        let out = Trainer::new(&data, cfg).unwrap().run().unwrap();
        let last = out.steps.last().unwrap();
        assert_eq!(out.network.retained_counts(), last.target_retained);
        for (l, &kept) in last.target_retained.iter().enumerate() {
            let c = 12.0;
            assert_eq!(kept, (((1.0 - last.kappa[l]) * c) - 1e-9).ceil() as usize);
        }
        let kept: usize = out.network.retained_counts().iter().sum();
        assert!((12..=12 + 2).contains(&kept), "{mode}: {kept}");
    }
}

#[test]
fn final_flops_respect_two_sided_bound() {
    // two equal hidden layers: the hidden product is bounded by AM-GM, the
    // input layer and head are linear in their one prunable side
    let data = spirals();
    let s = 0.5;
    for seed in 0..3 {
        let out = run_chex(&data, &config(RunMode::Chex, s, seed)).unwrap();
        let f = count_flops(&out.network);
        let r = out.network.retained_counts();
        let hidden_dense = 12.0 * 12.0;
        let slack = 1.0;
        let bound = ((1.0 - s) * 12.0 + slack).powi(2) * (hidden_dense / 144.0)
            + (data.features() * r[0]) as f64
            + f.head as f64;
        assert!(f.total as f64 <= bound, "{} > {bound}", f.total);
    }
}

#[test]
fn blobs_without_noise_are_learned_perfectly() {
    let data = generate_synthetic_dataset(DatasetKind::Blobs, 200, 2, 0.0, 3).unwrap();
    let mut cfg = config(RunMode::Plain, 0.0, 1);
    cfg.train.iterations = 100;
    cfg.explore.t_max = 80;
    let out = run_baseline(&data, &cfg, RunMode::Plain).unwrap();
    assert_eq!(out.final_accuracy(), 1.0);
}

#[test]
fn every_metrics_row_matches_its_network() {
    let data = spirals();
    let mut tr = Trainer::new(&data, config(RunMode::Chex, 0.5, 8)).unwrap();
    while !tr.is_finished() {
        let next = tr.iteration() + 15;
        tr.run_until(next).unwrap();
        let row = tr.state().metrics.last().unwrap();
        assert_eq!(row.iteration, tr.iteration());
        assert_eq!(row.flops, count_flops(tr.network()).total);
        assert_eq!(row.retained_per_layer, tr.network().retained_counts());
    }
}

#[test]
fn standardize_rejects_single_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let net = SimNetwork::new_random(2, &[3], 2, BnMode::Standardize, &mut rng).unwrap();
    assert!(forward(&net, &Matrix::zeros(1, 2)).is_err());
    assert!(forward(&net, &Matrix::zeros(2, 3)).is_err());
}
