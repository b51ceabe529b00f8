//! Acceptance report: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use chex::explore::{sample_without_replacement, DecayKind, RegrowSchedule};
use chex::harness::checkpoint::Checkpoint;
use chex::harness::config::{DatasetKind, ExperimentConfig};
use chex::harness::dataset::{build_dataset, generate_synthetic_dataset};
use chex::harness::metrics::metrics_to_csv;
use chex::harness::suite::{css_ratio_study, gradient_audit, leverage_study};
use chex::linalg::softmax;
use chex::oracle::frequency_test;
use chex::simnet::{convergence_probe, BnMode, ProbeConfig, RunMode, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<String, String> {
    let took = start.elapsed();
    ensure(took < limit, format!("{:.1}s (limit {}s)", took.as_secs_f64(), limit.as_secs()))
}

fn css_ratio() -> Check {
    let start = Instant::now();
    let r = css_ratio_study(200, 4, 8, 2, 2024).map_err(|e| e.to_string())?;
    let time = within(Duration::from_secs(10), start)?;
    ensure(
        r.median <= 1.5 && r.min >= 1.0 - 1e-9,
        format!("median {:.4} <= 1.5, min {:.6} >= 1-1e-9, {time}", r.median, r.min),
    )
}

fn leverage() -> Check {
    let (score, sum) = leverage_study(100, 2025).map_err(|e| e.to_string())?;
    ensure(score <= 1e-8 && sum <= 1e-6, format!("max score error {score:.2e} <= 1e-8, max sum error {sum:.2e} <= 1e-6"))
}

fn sampler() -> Check {
    let p = softmax(&[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    let target = [0.09003057, 0.24472847, 0.66524096];
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let report =
        frequency_test(|| sample_without_replacement(&p, 1, &mut rng)[0], &target, 100_000).map_err(|e| e.to_string())?;
    ensure(report.tv_distance <= 0.01, format!("TV {:.5} <= 0.01 over 100000 draws", report.tv_distance))
}

fn scheduler() -> Check {
    let exp = ExperimentConfig::default();
    let data = build_dataset(&exp.dataset).map_err(|e| e.to_string())?;
    let run = exp.resolve(data.train_len()).map_err(|e| e.to_string())?;
    let ex = run.explore;
    let sched = RegrowSchedule::new(ex.delta0, ex.t_max, ex.dt, DecayKind::Cosine).map_err(|e| e.to_string())?;
    let last = sched.final_step();
    let got = [sched.delta_at(0), sched.delta_at(last / 2), sched.delta_at(last)];
    let want = [0.3, 0.15, 0.0];
    let err = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    ensure(
        last % 2 == 0 && err <= 1e-12,
        format!("steps 0/{}/{last}: {:?}, max error {err:.1e} <= 1e-12", last / 2, got),
    )
}

fn gradients() -> Check {
    let start = Instant::now();
    let scale = gradient_audit(20, BnMode::ScaleOnly, 11).map_err(|e| e.to_string())?;
    let stand = gradient_audit(20, BnMode::Standardize, 12).map_err(|e| e.to_string())?;
    let time = within(Duration::from_secs(30), start)?;
    ensure(
        scale <= 1e-4 && stand <= 1e-4,
        format!("worst relative error scale_only {scale:.2e}, standardize {stand:.2e} <= 1e-4, {time}"),
    )
}

/// Audited default CHEX run, checkpointed through JSON halfway. Also checks
/// the final structure (criterion 7) on the same run.
fn masked_invariant_and_structure() -> (Check, Check) {
    let inner = || -> Result<(String, chex::simnet::RunOutcome, ExperimentConfig), String> {
        let exp = ExperimentConfig::default();
        let data = build_dataset(&exp.dataset).map_err(|e| e.to_string())?;
        let run = exp.resolve(data.train_len()).map_err(|e| e.to_string())?;
        let half = run.explore.t_max / 2;
        let mut tr = Trainer::new(&data, run.clone()).map_err(|e| e.to_string())?;
        tr.set_audit(true);
        tr.run_until(half).map_err(|e| e.to_string())?;
        let state = tr.into_state();
        for key in state.cache.keys().collect::<Vec<_>>() {
            let rec = state.cache.get(key.0, key.1).expect("listed key");
            for v in rec.out_weights.iter().chain(&rec.in_weights) {
                let back: f64 = format!("{v:.16e}").parse().map_err(|e| format!("{e}"))?;
                if back.to_bits() != v.to_bits() {
                    return Err(format!("archived value {v:e} does not survive 17 digits"));
                }
            }
        }
        let json = Checkpoint::new(exp.clone(), run.clone(), state).to_json().map_err(|e| e.to_string())?;
        let ck = Checkpoint::from_json(&json).map_err(|e| e.to_string())?;
        let mut tr = Trainer::from_state(&data, ck.run, ck.state).map_err(|e| e.to_string())?;
        tr.set_audit(true);
        let out = tr.run().map_err(|e| e.to_string())?;
        let detail = format!(
            "{} iterations audited, {} MRU restores bit-exact, resumed from 17-digit JSON at t={half}",
            out.audit.iterations_checked, out.audit.regrows_verified
        );
        Ok((detail, out, exp))
    };
    match inner() {
        Err(e) => (Err(e.clone()), Err(format!("run failed: {e}"))),
        Ok((detail, out, exp)) => {
            let c6 = ensure(
                out.audit.iterations_checked == exp.epochs * 37 && out.audit.regrows_verified > 0,
                detail,
            );
            let last = out.steps.last().expect("exploration ran");
            let widths = &exp.widths;
            let per_layer_ok = widths.iter().enumerate().all(|(l, &c)| {
                let want = ((1.0 - last.kappa[l]) * c as f64 - 1e-9).ceil() as usize;
                out.network.retained_counts()[l] == want
            });
            let total: usize = widths.iter().sum();
            let kept: usize = out.network.retained_counts().iter().sum();
            let ideal = (1.0 - exp.sparsity) * total as f64;
            let slack = (kept as f64 - ideal).abs();
            let c7 = ensure(
                per_layer_ok && slack <= widths.len() as f64 && last.delta == 0.0,
                format!(
                    "retained {:?} = ceil((1-kappa)C) per layer, total {kept} vs {ideal} (slack {slack} <= {})",
                    out.network.retained_counts(),
                    widths.len()
                ),
            );
            (c6, c7)
        }
    }
}

fn ablation_orderings() -> Check {
    let start = Instant::now();
    let base = ExperimentConfig::default();
    let data = build_dataset(&base.dataset).map_err(|e| e.to_string())?;
    let mean_acc = |mode: RunMode, scheduler: DecayKind| -> Result<f64, String> {
        let mut sum = 0.0;
        for seed in 0..10 {
            let mut exp = base.clone();
            exp.mode = mode;
            exp.scheduler = scheduler;
            exp.seed = seed;
            let run = exp.resolve(data.train_len()).map_err(|e| e.to_string())?;
            sum += Trainer::new(&data, run).and_then(|t| t.run()).map_err(|e| e.to_string())?.final_accuracy();
        }
        Ok(sum / 10.0)
    };
    let chex = mean_acc(RunMode::Chex, DecayKind::Cosine)?;
    let one_shot = mean_acc(RunMode::OneShotEarly, DecayKind::Cosine)?;
    let gradual = mean_acc(RunMode::Gradual, DecayKind::Cosine)?;
    let constant = mean_acc(RunMode::Chex, DecayKind::Constant)?;
    let time = within(Duration::from_secs(15 * 60), start)?;
    let tie = 0.002;
    ensure(
        chex >= one_shot - tie && chex >= gradual - tie && chex >= constant - tie,
        format!(
            "mean acc chex {chex:.4}, one-shot {one_shot:.4}, gradual {gradual:.4}, constant {constant:.4} (tie 0.002), {time}"
        ),
    )
}

fn convergence() -> Check {
    let data = generate_synthetic_dataset(DatasetKind::Blobs, 600, 3, 1.0, 5).map_err(|e| e.to_string())?;
    let probe = |iterations| {
        let cfg = ProbeConfig { widths: vec![16, 16], masked_fraction: 0.5, base_lr: 1.0, iterations, seed: 3 };
        convergence_probe(&data, &cfg).map_err(|e| e.to_string())
    };
    let short = probe(1_000)?;
    let long = probe(10_000)?;
    ensure(
        long.trailing_grad_sq <= short.trailing_grad_sq,
        format!("trailing ||g||^2 T=10000 {:.3e} <= T=1000 {:.3e}", long.trailing_grad_sq, short.trailing_grad_sq),
    )
}

fn determinism() -> Check {
    let exp = ExperimentConfig::default();
    let data = build_dataset(&exp.dataset).map_err(|e| e.to_string())?;
    let run = exp.resolve(data.train_len()).map_err(|e| e.to_string())?;
    let full = || Trainer::new(&data, run.clone()).and_then(|t| t.run()).map_err(|e| e.to_string());
    let a = full()?;
    let b = full()?;
    let csv_a = metrics_to_csv(&a.metrics).map_err(|e| e.to_string())?;
    let csv_b = metrics_to_csv(&b.metrics).map_err(|e| e.to_string())?;
    let stop = run.train.iterations * 3 / 7;
    let mut tr = Trainer::new(&data, run.clone()).map_err(|e| e.to_string())?;
    tr.run_until(stop).map_err(|e| e.to_string())?;
    let json = Checkpoint::new(exp, run, tr.into_state()).to_json().map_err(|e| e.to_string())?;
    let ck = Checkpoint::from_json(&json).map_err(|e| e.to_string())?;
    let resumed = Trainer::from_state(&data, ck.run, ck.state).and_then(|t| t.run()).map_err(|e| e.to_string())?;
    let csv_r = metrics_to_csv(&resumed.metrics).map_err(|e| e.to_string())?;
    ensure(
        csv_a == csv_b && csv_a == csv_r && resumed.network == a.network && resumed.steps == a.steps,
        format!("{} metrics bytes identical across reruns and a resume at t={stop}", csv_a.len()),
    )
}

fn main() {
    let (c6, c7) = masked_invariant_and_structure();
    let results: Vec<(u32, &str, Check)> = vec![
        (1, "CSS optimality ratio", css_ratio()),
        (2, "leverage scores", leverage()),
        (3, "importance sampler", sampler()),
        (4, "cosine scheduler golden values", scheduler()),
        (5, "gradient audit", gradients()),
        (6, "masked-update invariant", c6),
        (7, "sparsity convergence", c7),
        (8, "directional ablation", ablation_orderings()),
        (9, "convergence probe", convergence()),
        (10, "determinism and resume", determinism()),
    ];
    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {n}: {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n}: {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
