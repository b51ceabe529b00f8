use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `params`.
pub fn finite_diff_grad(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "step {h} outside [1e-7, 1e-3]"
        )));
    }
    let mut x = params.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(&x);
        x[i] = orig - h;
        let minus = f(&x);
        x[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

#[derive(Debug, Clone)]
pub struct FrequencyReport {
    pub empirical: Vec<f64>,
    pub tv_distance: f64,
    pub chi_square: f64,
}

/// Draws `trials` outcomes and compares their histogram with `expected`.
pub fn frequency_test(
    mut draw: impl FnMut() -> usize,
    expected: &[f64],
    trials: usize,
) -> Result<FrequencyReport> {
    if trials < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "frequency test needs at least 10000 trials, got {trials}"
        )));
    }
    let mut counts = vec![0usize; expected.len()];
    for _ in 0..trials {
        let k = draw();
        if k >= counts.len() {
            return Err(Error::InvalidInput(format!(
                "draw returned category {k} of {}",
                counts.len()
            )));
        }
        counts[k] += 1;
    }
    let n = trials as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let tv_distance = 0.5
        * empirical
            .iter()
            .zip(expected)
            .map(|(e, p)| (e - p).abs())
            .sum::<f64>();
    let chi_square = counts
        .iter()
        .zip(expected)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&c, &p)| {
            let want = p * n;
            (c as f64 - want).powi(2) / want
        })
        .sum();
    Ok(FrequencyReport {
        empirical,
        tv_distance,
        chi_square,
    })
}
