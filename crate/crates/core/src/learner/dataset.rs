use crate::error::{Error, Result};

/// Row-major feature matrix with one class label per row.
///
/// Features are stored as `f32` to keep MNIST-sized sets small; all
/// arithmetic on them is done in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<usize>,
    input_dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f32>,
        labels: Vec<usize>,
        input_dim: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 {
            return Err(Error::arg("input_dim and num_classes must be positive"));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::Consistency(format!(
                "{} feature values do not form {} rows of width {}",
                features.len(),
                labels.len(),
                input_dim
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Consistency(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            input_dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Copies the given rows into a new dataset, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            input_dim: self.input_dim,
            num_classes: self.num_classes,
        }
    }

    /// First `n` rows.
    pub fn truncate(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        self.subset(&idx)
    }
}

/// The slice of the training set held by one device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetShard {
    /// Zero-based device index.
    pub owner: usize,
    pub sample_indices: Vec<usize>,
}

impl DatasetShard {
    pub fn len(&self) -> usize {
        self.sample_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_indices.is_empty()
    }
}
