use chex::explore::{
    allocate_layer_sparsity, prune_layer_css, regrow_layer, restore_weights, retained_count, ChannelMask, DecayKind,
    InitScheme, MruCache, RegrowSchedule, SamplingMode,
};
use chex::linalg::{
    css_reconstruction_error, leverage_scores, orthogonality_scores, pseudo_inverse, softmax, Matrix, NormKind,
};
use chex::simnet::{BnMode, SimNetwork};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-2.0f64..2.0, r * c).prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
    })
}

/// Random matrix of bounded rank: product of two random factors.
fn low_rank(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c, k)| {
        (
            prop::collection::vec(-2.0f64..2.0, r * k),
            prop::collection::vec(-2.0f64..2.0, k * c),
        )
            .prop_map(move |(a, b)| {
                Matrix::from_vec(r, k, a)
                    .unwrap()
                    .matmul(&Matrix::from_vec(k, c, b).unwrap())
                    .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn leverage_scores_sum_to_c(w in matrix(7, 7), c in 1usize..8) {
        let s = leverage_scores(&w, c).unwrap();
        prop_assert!(s.c <= c);
        prop_assert!((s.scores.iter().sum::<f64>() - s.c as f64).abs() < 1e-6);
        for &v in &s.scores {
            prop_assert!((-1e-12..=1.0 + 1e-8).contains(&v));
        }
    }

    #[test]
    fn css_error_shrinks_under_supersets(w in matrix(6, 7), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..w.cols()).collect();
        order.shuffle(&mut rng);
        let mut prev = f64::INFINITY;
        for k in 1..=order.len() {
            let mut sel = order[..k].to_vec();
            sel.sort_unstable();
            let e = css_reconstruction_error(&w, &sel, NormKind::Frobenius).unwrap();
            prop_assert!(e >= 0.0);
            prop_assert!(e <= prev + 1e-9);
            prev = e;
        }
        prop_assert!(prev < 1e-9);
    }

    #[test]
    fn orthogonality_ignores_active_column_order(
        active in matrix(6, 4),
        extra in prop::collection::vec(-2.0f64..2.0, 6 * 3),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let k = active.rows();
        let cand = Matrix::from_vec(k, 3, extra[..k * 3].to_vec()).unwrap();
        let base = orthogonality_scores(&active, &cand).unwrap();
        let mut perm: Vec<usize> = (0..active.cols()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = orthogonality_scores(&active.select_columns(&perm), &cand).unwrap();
        for (a, b) in base.iter().zip(&shuffled) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn penrose_identities(w in low_rank(6)) {
        let p = pseudo_inverse(&w).unwrap();
        let wp = w.matmul(&p).unwrap();
        let pw = p.matmul(&w).unwrap();
        prop_assert!(wp.matmul(&w).unwrap().sub(&w).unwrap().frobenius_norm() < 1e-6);
        prop_assert!(pw.matmul(&p).unwrap().sub(&p).unwrap().frobenius_norm() < 1e-6);
        prop_assert!(wp.sub(&wp.transpose()).unwrap().frobenius_norm() < 1e-6);
        prop_assert!(pw.sub(&pw.transpose()).unwrap().frobenius_norm() < 1e-6);
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(
        v in prop::collection::vec(-50.0f64..50.0, 1..10),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&v).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted).unwrap()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prune_keeps_exact_ceiling(w in matrix(6, 9), kappa in 0.0f64..0.99) {
        let (kept, pruned) = prune_layer_css(&w, kappa).unwrap();
        prop_assert_eq!(kept.len(), retained_count(kappa, w.cols()));
        let mut all = [kept.clone(), pruned].concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..w.cols()).collect::<Vec<_>>());
    }

    #[test]
    fn allocation_counts_are_consistent(
        gammas in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..8), 1..5),
        s in 0.0f64..0.95,
    ) {
        let a = allocate_layer_sparsity(&gammas, s).unwrap();
        let n: usize = gammas.iter().map(Vec::len).sum();
        let target = ((s * n as f64) - 1e-9).ceil().max(0.0) as usize;
        let pruned: usize = a.pruned_counts.iter().sum();
        let clamp_loss: usize = gammas.len();
        prop_assert!(pruned <= target);
        prop_assert!(pruned + clamp_loss >= target);
        for (l, g) in gammas.iter().enumerate() {
            prop_assert!(a.pruned_counts[l] < g.len());
            prop_assert!((a.per_layer[l] - a.pruned_counts[l] as f64 / g.len() as f64).abs() < 1e-12);
            prop_assert!(a.pruned_counts[l] <= g.iter().filter(|x| x.abs() <= a.threshold).count());
        }
        if s == 0.0 {
            prop_assert!(a.per_layer.iter().all(|&k| k == 0.0));
        }
    }

    #[test]
    fn schedules_are_monotone_with_fixed_endpoints(
        delta0 in 0.01f64..=1.0,
        dt in 1u64..20,
        steps in 1u64..30,
    ) {
        let t_max = dt * steps;
        for kind in [DecayKind::Cosine, DecayKind::Linear] {
            let s = RegrowSchedule::new(delta0, t_max, dt, kind).unwrap();
            prop_assert_eq!(s.delta_at(0), delta0);
            prop_assert!(s.delta_at(steps).abs() < 1e-12);
            for k in 0..steps {
                prop_assert!(s.delta_at(k + 1) <= s.delta_at(k));
                prop_assert!((0.0..=delta0).contains(&s.delta_at(k)));
            }
            prop_assert_eq!(s.delta_at(steps + 1), 0.0);
        }
        let c = RegrowSchedule::new(delta0, t_max, dt, DecayKind::Constant).unwrap();
        prop_assert!((0..=steps).all(|k| c.delta_at(k) == delta0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Random prune/regrow sequences on a live network keep the cache equal
    /// to the pruned set, never touch the wrong side, and restore MRU
    /// channels bit-exactly.
    #[test]
    fn mask_and_cache_stay_complementary(seed in any::<u64>(), ops in prop::collection::vec((0usize..3, 0usize..6, any::<bool>()), 1..40)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = SimNetwork::new_random(3, &[5, 6, 4], 2, BnMode::Standardize, &mut rng).unwrap();
        let mut cache = MruCache::new();
        for (l, j, prune) in ops {
            let width = net.layers[l].width();
            let j = j % width;
            let before = net.clone();
            if prune {
                let ok = net.layers[l].mask.is_retained(j) && net.layers[l].mask.num_retained() > 1;
                let res = net.archive_channel(l, j, &mut cache, 1);
                prop_assert_eq!(res.is_ok(), ok);
                if !ok {
                    prop_assert_eq!(&net, &before);
                }
            } else {
                let mut scratch = net.layers[l].mask.clone();
                let grown = regrow_layer(
                    &mut scratch, &cache, &net.layers[l].w, &net.input_active(l), 1,
                    SamplingMode::Importance, &mut rng,
                ).unwrap();
                for &g in &grown {
                    prop_assert!(!net.layers[l].mask.is_retained(g));
                    let rec = restore_weights(&cache, l, g, InitScheme::Mru, &mut rng, net.channel_shape(l)).unwrap();
                    prop_assert_eq!(Some(&rec), cache.get(l, g));
                    net.splice_channel(l, g, &rec, &mut cache).unwrap();
                    prop_assert_eq!(net.layers[l].gamma[g].to_bits(), rec.gamma.to_bits());
                }
            }
            cache.check_complementarity(&net.masks()).unwrap();
            prop_assert!(net.masked_coordinates_are_zero());
        }
    }

    #[test]
    fn prune_then_regrow_restores_the_network(seed in any::<u64>(), l in 0usize..3, j in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = SimNetwork::new_random(3, &[5, 6, 4], 2, BnMode::Standardize, &mut rng).unwrap();
        let j = j % net.layers[l].width();
        let before = net.clone();
        let mut cache = MruCache::new();
        net.archive_channel(l, j, &mut cache, 3).unwrap();
        let rec = restore_weights(&cache, l, j, InitScheme::Mru, &mut rng, net.channel_shape(l)).unwrap();
        net.splice_channel(l, j, &rec, &mut cache).unwrap();
        prop_assert!(cache.is_empty());
        let a: Vec<u64> = net.flatten().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = before.flatten().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(net.masks(), before.masks());
    }
}

#[test]
fn equal_scales_split_each_layer_in_half() {
    let gammas = vec![vec![1.0; 4], vec![1.0; 6], vec![1.0; 8]];
    let a = allocate_layer_sparsity(&gammas, 0.5).unwrap();
    assert_eq!(a.pruned_counts, vec![2, 3, 4]);
}

#[test]
fn mask_rejects_emptying_a_layer() {
    let mut m = ChannelMask::full(0, 2);
    m.remove(&[0]).unwrap();
    assert!(m.remove(&[1]).is_err());
    assert_eq!(m.retained(), &[1]);
}
