//! Built-in synthetic datasets and the stratified train/eval split.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{DatasetKind, DatasetSpec};
use super::idx::load_idx;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::simnet::Dataset;

/// Fraction of each class assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Two-dimensional blobs or interleaved spirals, split 80/20 per class.
///
/// Blobs are Gaussian clouds of standard deviation `noise` around class
/// centers spaced evenly on a circle of radius 2. Spiral arms start at the
/// origin and wind 1.5 turns outward to radius 1; each point's angle is
/// jittered by Gaussian noise of standard deviation `noise` radians.
pub fn generate_synthetic_dataset(kind: DatasetKind, n: usize, classes: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || n < classes * 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes and 10 samples per class, got n = {n}, classes = {classes}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise must be non-negative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..classes {
        let count = n / classes + usize::from(k < n % classes);
        let phase = 2.0 * PI * k as f64 / classes as f64;
        for i in 0..count {
            let point = match kind {
                DatasetKind::Blobs => {
                    vec![2.0 * phase.cos() + noise * gauss(), 2.0 * phase.sin() + noise * gauss()]
                }
                DatasetKind::Spirals => {
                    let t = (i as f64 + 0.5) / count as f64;
                    let angle = phase + 3.0 * PI * t + noise * gauss();
                    vec![t * angle.cos(), t * angle.sin()]
                }
                DatasetKind::Idx => {
                    return Err(Error::InvalidArgument("idx data is loaded from files, not generated".into()))
                }
            };
            rows.push(point);
            labels.push(k);
        }
    }
    let x = Matrix::from_rows(&rows)?;
    stratified_split(&x, &labels, classes, seed)
}

/// Shuffles each class with `seed` and puts the first 80% of it in the
/// training split (at least one sample on each side when the class has two
/// or more samples).
pub fn stratified_split(x: &Matrix, labels: &[usize], classes: usize, seed: u64) -> Result<Dataset> {
    if x.rows() != labels.len() {
        return Err(Error::Shape("feature rows and labels differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for k in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
        members.shuffle(&mut rng);
        let m = members.len();
        let mut cut = (TRAIN_FRACTION * m as f64).round() as usize;
        if m >= 2 {
            cut = cut.clamp(1, m - 1);
        }
        train.extend_from_slice(&members[..cut]);
        eval.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    Dataset::new(
        x.select_rows(&train),
        train.iter().map(|&i| labels[i]).collect(),
        x.select_rows(&eval),
        eval.iter().map(|&i| labels[i]).collect(),
        classes,
    )
}


const SPLIT_SALT: u64 = 0x5eed_5117;

/// Builds the dataset described by a config block.
pub fn build_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    match spec.kind {
        DatasetKind::Idx => {
            let (images, labels) = match (&spec.idx_images, &spec.idx_labels) {
                (Some(i), Some(l)) => (i, l),
                _ => return Err(Error::config("idx_images", "idx dataset needs image and label paths")),
            };
            let (x, y) = load_idx(images, labels)?;
            let classes = y.iter().max().map_or(0, |m| m + 1).max(2);
            stratified_split(&x, &y, classes, spec.seed)
        }
        kind => generate_synthetic_dataset(kind, spec.n, spec.classes, spec.noise, spec.seed),
    }
}
