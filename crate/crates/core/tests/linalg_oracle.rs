use chex::harness::suite::{random_low_rank, random_matrix};
use chex::linalg::{
    css_reconstruction_error, leverage_scores, orthogonality_scores, pseudo_inverse, softmax,
    top_right_singular_vectors, Matrix, NormKind,
};
use chex::oracle::{full_svd, pinv_via_gram, projection_error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn singular_values_of_random_5x7_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = random_matrix(5, 7, &mut rng);
    let f = top_right_singular_vectors(&w, 3).unwrap();
    let oracle = full_svd(&w);
    assert_eq!(f.singular_values.len(), 3);
    for k in 0..3 {
        assert!((f.singular_values[k] - oracle.sigma[k]).abs() < 1e-8);
        // w v_k has norm sigma_k
        let v = f.right_vectors.col(k);
        let wv: f64 = (0..5)
            .map(|r| (0..7).map(|c| w.get(r, c) * v[c]).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((wv - f.singular_values[k]).abs() <= 1e-6 * f.singular_values[k]);
    }
    let gram = f.right_vectors.t_matmul(&f.right_vectors).unwrap();
    assert!(gram.sub(&Matrix::identity(3)).unwrap().frobenius_norm() < 1e-8);
}

#[test]
fn pseudo_inverse_of_rank_deficient_4x3() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let w = random_low_rank(4, 3, 2, &mut rng);
    let p = pseudo_inverse(&w).unwrap();
    let wp = w.matmul(&p).unwrap();
    let pw = p.matmul(&w).unwrap();
    assert!(wp.matmul(&w).unwrap().sub(&w).unwrap().frobenius_norm() < 1e-6);
    assert!(pw.matmul(&p).unwrap().sub(&p).unwrap().frobenius_norm() < 1e-6);
    assert!(wp.sub(&wp.transpose()).unwrap().frobenius_norm() < 1e-6);
    assert!(pw.sub(&pw.transpose()).unwrap().frobenius_norm() < 1e-6);
    let g = pinv_via_gram(&w);
    for a in 0..3 {
        for b in 0..4 {
            let want: f64 = (0..3).map(|k| g[a][k] * w.get(b, k)).sum();
            assert!((p.get(a, b) - want).abs() < 1e-6);
        }
    }
}

#[test]
fn css_error_of_random_4x6_matches_projection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let w = random_matrix(4, 6, &mut rng);
    for norm in [NormKind::Frobenius, NormKind::Spectral] {
        let ours = css_reconstruction_error(&w, &[1, 3], norm).unwrap();
        let oracle = projection_error(&w, &[1, 3], norm);
        assert!((ours - oracle).abs() < 1e-8, "{norm:?}: {ours} vs {oracle}");
    }
}

#[test]
fn leverage_scores_of_random_6x8_match_oracle_row_norms() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let w = random_matrix(6, 8, &mut rng);
    let ours = leverage_scores(&w, 3).unwrap();
    let oracle = full_svd(&w);
    for j in 0..8 {
        let want: f64 = (0..3).map(|k| oracle.v[k][j].powi(2)).sum();
        assert!((ours.scores[j] - want).abs() < 1e-8);
    }
    assert!((ours.scores.iter().sum::<f64>() - 3.0).abs() < 1e-6);
}

#[test]
fn orthogonality_of_random_candidate_matches_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let active = random_matrix(5, 2, &mut rng);
    let cand = random_matrix(5, 1, &mut rng);
    let eps = orthogonality_scores(&active, &cand).unwrap()[0];
    let joined = Matrix::from_fn(5, 3, |r, c| if c < 2 { active.get(r, c) } else { cand.get(r, 0) });
    let resid = projection_error(&joined, &[0, 1], NormKind::Frobenius);
    assert!((eps - resid * resid).abs() < 1e-8);
}

#[test]
fn softmax_golden_values() {
    let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
    for (a, b) in p.iter().zip([0.09003057, 0.24472847, 0.66524096]) {
        assert!((a - b).abs() < 1e-8);
    }
}
