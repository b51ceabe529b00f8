use chex::explore::{
    allocate_layer_sparsity, categorical_draw, ema_update, prune_layer_css, regrow_layer, restore_weights,
    sample_without_replacement, ArchivedChannel, ChannelMask, ChannelShape, DecayKind, InitScheme, MruCache,
    RegrowSchedule, SamplingMode, EMA_DECAY,
};
use chex::harness::suite::random_matrix;
use chex::linalg::{softmax, Matrix};
use chex::oracle::{frequency_test, full_svd};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn css_pruning_keeps_oracle_top_leverage_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let w = random_matrix(6, 8, &mut rng);
    let (kept, pruned) = prune_layer_css(&w, 0.75).unwrap();
    assert_eq!(kept.len(), 2);
    assert_eq!(pruned.len(), 6);
    let oracle = full_svd(&w);
    let scores: Vec<f64> = (0..8).map(|j| (0..2).map(|k| oracle.v[k][j].powi(2)).sum()).collect();
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut want = order[..2].to_vec();
    want.sort_unstable();
    assert_eq!(kept, want);
}

#[test]
fn css_pruning_examples() {
    let w = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(prune_layer_css(&w, 0.5).unwrap().0, vec![0]);
    assert_eq!(prune_layer_css(&w, 0.0).unwrap(), (vec![0, 1], vec![]));
    assert!(prune_layer_css(&w, 1.0).is_err());
}

#[test]
fn allocation_examples() {
    let a = allocate_layer_sparsity(&[vec![0.5, 0.1], vec![0.3, 0.2]], 0.5).unwrap();
    assert_eq!(a.threshold, 0.2);
    assert_eq!(a.per_layer, vec![0.5, 0.5]);
    let b = allocate_layer_sparsity(&[vec![1.0; 3], vec![0.01; 3]], 0.5).unwrap();
    assert_eq!(b.pruned_counts, vec![0, 2]);
    assert!((b.per_layer[1] - 2.0 / 3.0).abs() < 1e-15);
    let c = allocate_layer_sparsity(&[vec![1.0, 2.0]], 0.0).unwrap();
    assert_eq!(c.per_layer, vec![0.0]);
    assert_eq!(c.threshold, f64::NEG_INFINITY);
    assert!(allocate_layer_sparsity(&[vec![1.0]], 1.0).is_err());
    assert!(allocate_layer_sparsity(&[vec![]], 0.5).is_err());
}

#[test]
fn importance_sampler_matches_softmax_frequencies() {
    let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let report = frequency_test(|| sample_without_replacement(&p, 1, &mut rng)[0], &p, 100_000).unwrap();
    assert!(report.tv_distance <= 0.01, "{}", report.tv_distance);
}

#[test]
fn frequency_test_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let fair = frequency_test(|| categorical_draw(&[1.0, 1.0], &mut rng).unwrap(), &[0.5, 0.5], 100_000).unwrap();
    assert!(fair.tv_distance <= 0.01);
    let sure = frequency_test(|| 0, &[1.0], 10_000).unwrap();
    assert_eq!(sure.tv_distance, 0.0);
    assert!(frequency_test(|| 0, &[1.0], 9_999).is_err());
}

fn layer_with_cache(pruned: &[usize]) -> (ChannelMask, MruCache, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let mut w = random_matrix(4, 5, &mut rng);
    let mut cache = MruCache::new();
    let mut mask = ChannelMask::full(0, 5);
    for &j in pruned {
        let rec = ArchivedChannel {
            out_weights: w.col(j),
            in_weights: vec![0.5, -0.5],
            gamma: 1.0,
            beta: 0.0,
            ema_out_weights: None,
            step_archived: 1,
        };
        cache.insert(0, j, rec).unwrap();
        w.set_col(j, &[0.0; 4]);
    }
    mask.remove(pruned).unwrap();
    (mask, cache, w)
}

#[test]
fn regrow_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for mode in SamplingMode::ALL {
        let (mut mask, cache, w) = layer_with_cache(&[3]);
        let g = regrow_layer(&mut mask, &cache, &w, &[true; 4], 1, *mode, &mut rng).unwrap();
        assert_eq!(g, vec![3]);
        assert!(mask.is_full());
        let (mut mask, cache, w) = layer_with_cache(&[1, 3]);
        let before = mask.clone();
        assert!(regrow_layer(&mut mask, &cache, &w, &[true; 4], 0, *mode, &mut rng).unwrap().is_empty());
        assert_eq!(mask, before);
        let g = regrow_layer(&mut mask, &cache, &w, &[true; 4], 9, *mode, &mut rng).unwrap();
        assert_eq!(g, vec![1, 3]);
    }
}

#[test]
fn restore_scheme_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let shape = ChannelShape { fan_in: 2, fan_out: 3, width: 4 };
    let mut cache = MruCache::new();
    let mut ema = vec![1.0, 1.0];
    ema_update(&mut ema, &[2.0, 2.0], EMA_DECAY);
    assert!((ema[0] - 1.01).abs() < 1e-15);
    let rec = ArchivedChannel {
        out_weights: vec![0.25, -1.5],
        in_weights: vec![1.0, 2.0, 3.0],
        gamma: 0.7,
        beta: -0.1,
        ema_out_weights: Some(ema.clone()),
        step_archived: 4,
    };
    cache.insert(1, 2, rec.clone()).unwrap();
    assert_eq!(restore_weights(&cache, 1, 2, InitScheme::Mru, &mut rng, shape).unwrap(), rec);
    let e = restore_weights(&cache, 1, 2, InitScheme::Ema, &mut rng, shape).unwrap();
    assert_eq!(e.out_weights, ema);
    let z = restore_weights(&cache, 1, 2, InitScheme::Zero, &mut rng, shape).unwrap();
    assert!(z.out_weights.iter().chain(&z.in_weights).all(|&v| v == 0.0));
    let r = restore_weights(&cache, 0, 0, InitScheme::Random, &mut rng, shape).unwrap();
    assert_eq!(r.out_weights.len(), 2);
    assert_eq!(r.gamma, 1.0);
    assert!(restore_weights(&cache, 0, 0, InitScheme::Mru, &mut rng, shape).is_err());
}

#[test]
fn cosine_schedule_defaults() {
    let s = RegrowSchedule::new(0.3, 160, 10, DecayKind::Cosine).unwrap();
    assert_eq!(s.delta_at(0), 0.3);
    assert!((s.delta_at(8) - 0.15).abs() < 1e-12);
    assert!(s.delta_at(16).abs() < 1e-12);
    assert!(RegrowSchedule::new(0.0, 160, 10, DecayKind::Cosine).is_err());
    assert!(RegrowSchedule::new(0.3, 5, 10, DecayKind::Cosine).is_err());
}
