//! The oracle suite behind `chex oracle-check`: every closed-form component
//! is compared against its independent reference implementation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::explore::{categorical_draw, DecayKind, MruCache, RegrowSchedule};
use crate::linalg::{
    css_reconstruction_error, leverage_scores, leverage_select, orthogonality_scores, pseudo_inverse, softmax, svd,
    Matrix, NormKind,
};
use crate::oracle::{brute_force_css, finite_diff_grad, frequency_test, full_svd, pinv_via_gram, projection_error, reference_forward};
use crate::simnet::{backward, loss, BnMode, SimNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// A `rows x cols` matrix of rank at most `rank`.
pub fn random_low_rank<R: Rng>(rows: usize, cols: usize, rank: usize, rng: &mut R) -> Matrix {
    let a = random_matrix(rows, rank, rng);
    let b = random_matrix(rank, cols, rng);
    a.matmul(&b).expect("conforming shapes")
}

/// Median over instances of leverage-selection error divided by the optimal
/// error, together with the smallest individual ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct CssRatioReport {
    pub median: f64,
    pub min: f64,
    pub ratios: Vec<f64>,
}

pub fn css_ratio_study(trials: usize, rows: usize, cols: usize, c: usize, seed: u64) -> Result<CssRatioReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let w = random_matrix(rows, cols, &mut rng);
        let picked = leverage_select(&w, c)?;
        let ours = css_reconstruction_error(&w, &picked, NormKind::Frobenius)?;
        let best = brute_force_css(&w, c, NormKind::Frobenius)?.best_error;
        ratios.push(if best > 0.0 { ours / best } else if ours <= 1e-12 { 1.0 } else { f64::INFINITY });
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
    Ok(CssRatioReport { median, min: sorted[0], ratios })
}

/// Largest deviation between linalg leverage scores and oracle row norms,
/// and between the score sum and `c`.
pub fn leverage_study(trials: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_score, mut worst_sum) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let rows = rng.random_range(2..9);
        let cols = rng.random_range(2..9);
        let w = random_matrix(rows, cols, &mut rng);
        let c = rng.random_range(1..=rows.min(cols));
        let ours = leverage_scores(&w, c)?;
        let oracle = full_svd(&w);
        for j in 0..cols {
            let want: f64 = (0..c).map(|k| oracle.v[k][j] * oracle.v[k][j]).sum();
            worst_score = worst_score.max((ours.scores[j] - want).abs());
        }
        worst_sum = worst_sum.max((ours.scores.iter().sum::<f64>() - c as f64).abs());
    }
    Ok((worst_score, worst_sum))
}

/// Worst relative error between analytic and central-difference gradients
/// over `trials` random three-layer networks.
pub fn gradient_audit(trials: usize, bn_mode: BnMode, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let input = rng.random_range(2..5);
        let widths: Vec<usize> = (0..3).map(|_| rng.random_range(2..6)).collect();
        let classes = rng.random_range(2..4);
        let mut net = SimNetwork::new_random(input, &widths, classes, bn_mode, &mut rng)?;
        for l in &mut net.layers {
            l.gamma.iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
            l.beta.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let mut cache = MruCache::new();
        if widths[1] > 2 {
            net.archive_channel(1, 0, &mut cache, 0)?;
        }
        let batch = 6;
        let x = random_matrix(batch, input, &mut rng);
        let y: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
        let smoothing = if rng.random_bool(0.5) { 0.1 } else { 0.0 };
        let analytic = backward(&net, &x, &y, smoothing)?.1.flatten();
        let mut probe = net.clone();
        let numeric = finite_diff_grad(
            |p| {
                probe.set_flat(p).expect("same length");
                loss(&probe, &x, &y, smoothing).expect("valid batch")
            },
            &net.flatten(),
            1e-5,
        )?;
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-5);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

pub fn run_oracle_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..9), rng.random_range(1..9));
        let w = random_matrix(r, c, &mut rng);
        let ours = svd(&w)?.sigma;
        let oracle = full_svd(&w).sigma;
        for k in 0..r.min(c) {
            worst = worst.max((ours[k] - oracle[k]).abs());
        }
    }
    out.push(check("svd singular values", worst <= 1e-8, format!("max abs deviation {worst:.2e}")));

    let (score_err, sum_err) = leverage_study(100, seed ^ 1)?;
    out.push(check(
        "leverage scores",
        score_err <= 1e-8 && sum_err <= 1e-6,
        format!("max score deviation {score_err:.2e}, max sum deviation {sum_err:.2e}"),
    ));

    let mut penrose = 0.0f64;
    let mut vs_gram = 0.0f64;
    for i in 0..100 {
        let (r, c) = (rng.random_range(1..7), rng.random_range(1..7));
        let w = if i % 2 == 0 {
            random_matrix(r, c, &mut rng)
        } else {
            random_low_rank(r, c, rng.random_range(1..=r.min(c)), &mut rng)
        };
        let p = pseudo_inverse(&w)?;
        let wp = w.matmul(&p)?;
        let pw = p.matmul(&w)?;
        penrose = penrose
            .max(wp.matmul(&w)?.sub(&w)?.frobenius_norm())
            .max(pw.matmul(&p)?.sub(&p)?.frobenius_norm())
            .max(wp.sub(&wp.transpose())?.frobenius_norm())
            .max(pw.sub(&pw.transpose())?.frobenius_norm());
        let g = pinv_via_gram(&w);
        for a in 0..c {
            for b in 0..r {
                let want: f64 = (0..c).map(|k| g[a][k] * w.get(b, k)).sum();
                vs_gram = vs_gram.max((p.get(a, b) - want).abs());
            }
        }
    }
    out.push(check(
        "pseudo-inverse",
        penrose <= 1e-6 && vs_gram <= 1e-6,
        format!("max Penrose residual {penrose:.2e}, max deviation from Gram route {vs_gram:.2e}"),
    ));

    let mut css_dev = 0.0f64;
    for _ in 0..20 {
        let w = random_matrix(4, 6, &mut rng);
        for c in 1..=6 {
            for (subset, err) in brute_force_css(&w, c, NormKind::Frobenius)?.all_errors {
                css_dev = css_dev.max((css_reconstruction_error(&w, &subset, NormKind::Frobenius)? - err).abs());
            }
        }
        let sel = [1, 3];
        let spec = css_reconstruction_error(&w, &sel, NormKind::Spectral)?;
        css_dev = css_dev.max((spec - projection_error(&w, &sel, NormKind::Spectral)).abs());
    }
    out.push(check("css error vs projection oracle", css_dev <= 1e-8, format!("max deviation {css_dev:.2e}")));

    let ratio = css_ratio_study(200, 4, 8, 2, seed ^ 2)?;
    out.push(check(
        "leverage css optimality ratio",
        ratio.median <= 1.5 && ratio.min >= 1.0 - 1e-9,
        format!("median {:.4}, min {:.6}", ratio.median, ratio.min),
    ));

    let mut ortho = 0.0f64;
    for _ in 0..50 {
        let active = random_matrix(5, 2, &mut rng);
        let cand = random_matrix(5, 1, &mut rng);
        let ours = orthogonality_scores(&active, &cand)?[0];
        let mut joined = Matrix::zeros(5, 3);
        for r in 0..5 {
            joined.set(r, 0, active.get(r, 0));
            joined.set(r, 1, active.get(r, 1));
            joined.set(r, 2, cand.get(r, 0));
        }
        // the active columns reproduce exactly, so only the candidate contributes
        let full = projection_error(&joined, &[0, 1], NormKind::Frobenius);
        ortho = ortho.max((ours - full * full).abs());
    }
    out.push(check("orthogonality vs least squares", ortho <= 1e-8, format!("max deviation {ortho:.2e}")));

    let p = softmax(&[1.0, 2.0, 3.0])?;
    let mut srng = ChaCha8Rng::seed_from_u64(seed ^ 3);
    let freq = frequency_test(|| categorical_draw(&p, &mut srng).expect("non-empty"), &p, 100_000)?;
    out.push(check("importance sampler frequencies", freq.tv_distance <= 0.01, format!("TV {:.4}", freq.tv_distance)));

    let sched = RegrowSchedule::new(0.3, 100, 10, DecayKind::Cosine)?;
    let golden = [(0, 0.3), (5, 0.15), (10, 0.0)];
    let sched_dev = golden.iter().map(|&(s, v)| (sched.delta_at(s) - v).abs()).fold(0.0, f64::max);
    out.push(check("cosine schedule golden values", sched_dev <= 1e-12, format!("max deviation {sched_dev:.2e}")));

    let mut grad_worst = 0.0f64;
    for (i, mode) in [BnMode::ScaleOnly, BnMode::Standardize].into_iter().enumerate() {
        grad_worst = grad_worst.max(gradient_audit(20, mode, seed ^ (10 + i as u64))?);
    }
    out.push(check("gradients vs finite differences", grad_worst <= 1e-4, format!("max relative error {grad_worst:.2e}")));

    let mut fwd = 0.0f64;
    for mode in [BnMode::ScaleOnly, BnMode::Standardize] {
        let net = SimNetwork::new_random(3, &[4, 3], 2, mode, &mut rng)?;
        let x = random_matrix(5, 3, &mut rng);
        let ours = crate::simnet::forward(&net, &x)?.logits;
        for (b, row) in reference_forward(&net, &x).iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                fwd = fwd.max((ours.get(b, k) - v).abs());
            }
        }
    }
    out.push(check("forward vs reference loop", fwd <= 1e-10, format!("max deviation {fwd:.2e}")));
    Ok(out)
}
