//! Data, the local classifier, mini-batch gradients, sign quantization and
//! the global model update.

mod dataset;
mod idx;
mod model;
mod partition;
mod sign;
mod synthetic;

pub use dataset::{Dataset, DatasetShard};
pub use idx::{load_idx_dataset, parse_idx_pair, IMAGES_MAGIC, LABELS_MAGIC};
pub use model::{
    apply_global_update, apply_gradient_step, compute_local_gradient, evaluate, full_gradient,
    Architecture, Evaluation, GradientVector, ModelKind, ModelState, DEFAULT_HIDDEN,
};
pub use partition::{partition, PartitionMode};
pub use sign::{sign, sign_quantize, SignReport};
pub use synthetic::{make_synthetic_dataset, make_synthetic_split, MEAN_SPREAD};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rounds: u64,
    pub num_devices: usize,
    pub partition_mode: PartitionMode,
    pub seed: u64,
}

impl TrainingConfig {
    /// Checks the scalar fields, and the batch size against the shards the
    /// run will actually use.
    pub fn validate(&self, shards: &[DatasetShard]) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.rounds == 0 || self.num_devices == 0 {
            return Err(Error::Config(
                "batch_size, rounds and devices must be positive".into(),
            ));
        }
        if let Some(smallest) = shards.iter().map(DatasetShard::len).min() {
            if self.batch_size > smallest {
                return Err(Error::Config(format!(
                    "batch_size {} exceeds the smallest shard ({smallest} samples)",
                    self.batch_size
                )));
            }
        }
        Ok(())
    }
}
