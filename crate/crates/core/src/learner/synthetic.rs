//! Class-conditional Gaussian blobs: a fast stand-in for MNIST.

use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::{rng_for, Stream};

/// Standard deviation of each class-mean coordinate. Within-class noise is
/// unit variance.
pub const MEAN_SPREAD: f64 = 1.0;

fn class_means(input_dim: usize, num_classes: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, Stream::Synthetic, &[0]);
    (0..input_dim * num_classes)
        .map(|_| MEAN_SPREAD * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn draw(
    means: &[f64],
    num_samples: usize,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
    part: u64,
) -> Result<Dataset> {
    let mut rng = rng_for(seed, Stream::Synthetic, &[part]);
    let mut features = Vec::with_capacity(num_samples * input_dim);
    let mut labels = Vec::with_capacity(num_samples);
    for i in 0..num_samples {
        let y = i % num_classes;
        let mu = &means[y * input_dim..(y + 1) * input_dim];
        features.extend(
            mu.iter()
                .map(|&m| (m + rng.sample::<f64, _>(StandardNormal)) as f32),
        );
        labels.push(y);
    }
    Dataset::new(features, labels, input_dim, num_classes)
}

fn check_args(num_samples: usize, input_dim: usize, num_classes: usize) -> Result<()> {
    if num_samples == 0 || input_dim == 0 {
        return Err(Error::arg("num_samples and input_dim must be positive"));
    }
    if num_classes < 2 {
        return Err(Error::arg("num_classes must be at least 2"));
    }
    if num_classes > num_samples {
        return Err(Error::arg(format!(
            "{num_classes} classes cannot be populated by {num_samples} samples"
        )));
    }
    Ok(())
}

/// Balanced blobs: sample `i` has label `i mod num_classes`.
pub fn make_synthetic_dataset(
    num_samples: usize,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Dataset> {
    check_args(num_samples, input_dim, num_classes)?;
    let means = class_means(input_dim, num_classes, seed);
    draw(&means, num_samples, input_dim, num_classes, seed, 1)
}

/// A training set identical to [`make_synthetic_dataset`] plus a held-out
/// test set drawn from the same class means.
pub fn make_synthetic_split(
    train_samples: usize,
    test_samples: usize,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    check_args(train_samples, input_dim, num_classes)?;
    check_args(test_samples, input_dim, num_classes)?;
    let means = class_means(input_dim, num_classes, seed);
    let train = draw(&means, train_samples, input_dim, num_classes, seed, 1)?;
    let test = draw(&means, test_samples, input_dim, num_classes, seed, 2)?;
    Ok((train, test))
}
