//! Federated learning with one-bit gradient votes aggregated over the air.
//!
//! Devices quantize their mini-batch gradients to signs and transmit each
//! sign as energy on one of two paired OFDM bins. The server never estimates
//! the channel: it compares the energy accumulated on each pair and takes
//! the larger as the majority vote. Transmit powers adapt each round to how
//! well a device agreed with the previous vote.
//!
//! Modules, bottom up:
//! - [`learner`]: data, classifier, gradients, sign quantization, model update.
//! - [`otaphy`]: bin mapping, symbol encoding, power control.
//! - [`channel`]: fading, timing offsets, noise, superposition.
//! - [`detector`]: energy detection and the exact majority vote.
//! - [`aircomp`]: the three above chained into one uplink.
//! - [`analysis`]: closed-form bounds and Monte Carlo checks.
//! - [`harness`]: configuration, round loop, metrics files.

pub mod aircomp;
pub mod analysis;
pub mod channel;
pub mod detector;
pub mod error;
pub mod harness;
pub mod learner;
pub mod otaphy;
pub mod seed;

pub use aircomp::{AirInterface, AirVote};
pub use channel::{ChannelConfig, ChannelRealization, Fading};
pub use detector::DetectionResult;
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, RoundMetrics, Scheme};
pub use learner::{Dataset, DatasetShard, GradientVector, ModelState, SignReport, TrainingConfig};
pub use otaphy::{OfdmFrame, PowerState, SubcarrierMap, E0};
