//! Experiment configuration and its TOML file form.
//!
//! ```toml
//! scheme = "fsk_mv_dpc"        # ideal_signsgd_mv | fedavg_ideal | fsk_mv | fsk_mv_dpc
//! rounds = 200
//! devices = 31
//! batch_size = 128
//! learning_rate = 0.004
//! partition = "iid"            # iid | non-iid
//! seed = 1
//! model = "logistic"           # logistic | mlp
//! eval_every = 10
//! output = "runs/dpc.jsonl"
//!
//! [dataset]
//! kind = "synthetic"           # or "mnist" with `path`, optional `limit`, `test_limit`
//! samples = 10000
//! test_samples = 2000
//! dim = 16
//! classes = 10
//!
//! [channel]
//! beta = 2.0                   # or noise_var = 1.0
//! sync_error_max = 0.25
//! fading = "per_bin"           # per_bin | per_frame
//!
//! [phy]
//! subcarriers = 64
//! # symbols = 3                # default: fewest that fit q in four frames
//! # power_cap = 10.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::{ChannelConfig, Fading};
use crate::error::{Error, Result};
use crate::learner::{ModelKind, PartitionMode, TrainingConfig};
use crate::otaphy::E0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact majority vote over a perfect channel.
    IdealSignsgdMv,
    /// Float gradient averaging over a perfect channel.
    FedavgIdeal,
    /// Energy-detected vote, all powers fixed at 1.
    FskMv,
    /// Energy-detected vote with dynamic power control.
    FskMvDpc,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::IdealSignsgdMv,
        Scheme::FedavgIdeal,
        Scheme::FskMv,
        Scheme::FskMvDpc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::IdealSignsgdMv => "ideal_signsgd_mv",
            Scheme::FedavgIdeal => "fedavg_ideal",
            Scheme::FskMv => "fsk_mv",
            Scheme::FskMvDpc => "fsk_mv_dpc",
        }
    }

    pub fn uses_air(&self) -> bool {
        matches!(self, Scheme::FskMv | Scheme::FskMvDpc)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// Directory holding the four standard MNIST IDX files.
    Mnist {
        path: PathBuf,
        limit: Option<usize>,
        test_limit: Option<usize>,
    },
    Synthetic {
        samples: usize,
        test_samples: usize,
        dim: usize,
        classes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyConfig {
    pub subcarriers: usize,
    /// OFDM symbols per frame; `None` picks the fewest that fit the model
    /// in [`MAX_DEFAULT_FRAMES`] frames.
    pub symbols: Option<usize>,
    pub power_cap: Option<f64>,
}

pub const MAX_DEFAULT_FRAMES: usize = 4;

impl PhyConfig {
    pub fn symbols_for(&self, q: usize) -> usize {
        self.symbols
            .unwrap_or_else(|| (2 * q).div_ceil(self.subcarriers * MAX_DEFAULT_FRAMES).max(1))
    }
}

/// Switches for the ideal-channel equivalence checks. Not reachable from
/// config files.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TestHooks {
    pub unit_channel: bool,
    pub pin_randomization: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    /// `training.seed` is the master seed of the run.
    pub training: TrainingConfig,
    pub model: ModelKind,
    pub channel: ChannelConfig,
    pub phy: PhyConfig,
    pub dataset: DatasetSpec,
    pub eval_every: u64,
    pub output: PathBuf,
    /// Fill `wall_time_ms`. Off by default so metrics files are
    /// reproducible byte for byte.
    pub record_wall_time: bool,
    #[doc(hidden)]
    pub hooks: TestHooks,
}

/// Target SNR ratio used when the config gives neither `beta` nor `noise_var`.
pub const DEFAULT_BETA: f64 = 2.0;

impl ExperimentConfig {
    /// The desk-scale default: 31 devices, batch 128, step 0.004, synthetic
    /// data, 64 subcarriers, noise set from [`DEFAULT_BETA`].
    pub fn desk_default(scheme: Scheme, seed: u64, output: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            scheme,
            training: TrainingConfig {
                learning_rate: 0.004,
                batch_size: 128,
                rounds: 200,
                num_devices: 31,
                partition_mode: PartitionMode::Iid,
                seed,
            },
            model: ModelKind::Logistic,
            channel: ChannelConfig {
                noise_var: E0 / DEFAULT_BETA,
                sync_error_max: 0.0,
                fft_size: 64,
                fading: Fading::PerBin,
            },
            phy: PhyConfig {
                subcarriers: 64,
                symbols: None,
                power_cap: None,
            },
            dataset: DatasetSpec::Synthetic {
                samples: 10_000,
                test_samples: 2_000,
                dim: 16,
                classes: 10,
            },
            eval_every: 10,
            output: output.into(),
            record_wall_time: false,
            hooks: TestHooks::default(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.training.seed
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if self.scheme.uses_air() {
            self.channel
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            if self.phy.subcarriers == 0 || !self.phy.subcarriers.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "phy.subcarriers must be positive and even, got {}",
                    self.phy.subcarriers
                )));
            }
            if let Some(cap) = self.phy.power_cap {
                if !(cap >= 1.0) {
                    return Err(Error::Config(format!("phy.power_cap must be >= 1, got {cap}")));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_config()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scheme: String,
    rounds: Option<u64>,
    devices: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    partition: Option<String>,
    seed: Option<u64>,
    model: Option<String>,
    eval_every: Option<u64>,
    output: PathBuf,
    record_wall_time: Option<bool>,
    dataset: Option<FileDataset>,
    channel: Option<FileChannel>,
    phy: Option<FilePhy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDataset {
    kind: String,
    path: Option<PathBuf>,
    limit: Option<usize>,
    test_limit: Option<usize>,
    samples: Option<usize>,
    test_samples: Option<usize>,
    dim: Option<usize>,
    classes: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileChannel {
    noise_var: Option<f64>,
    beta: Option<f64>,
    sync_error_max: Option<f64>,
    fading: Option<String>,
    fft_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePhy {
    subcarriers: Option<usize>,
    symbols: Option<usize>,
    power_cap: Option<f64>,
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::Argument(m) => Error::Config(m),
        other => other,
    }
}

impl FileConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        let scheme: Scheme = self.scheme.parse()?;
        let seed = self.seed.unwrap_or(0);
        let mut cfg = ExperimentConfig::desk_default(scheme, seed, self.output);
        let t = &mut cfg.training;
        if let Some(v) = self.rounds {
            t.rounds = v;
        }
        if let Some(v) = self.devices {
            t.num_devices = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            t.learning_rate = v;
        }
        if let Some(p) = self.partition {
            t.partition_mode = p.parse().map_err(cfg_err)?;
        }
        if let Some(m) = self.model {
            cfg.model = m.parse().map_err(cfg_err)?;
        }
        if let Some(v) = self.eval_every {
            cfg.eval_every = v;
        }
        cfg.record_wall_time = self.record_wall_time.unwrap_or(false);

        if let Some(d) = self.dataset {
            cfg.dataset = match d.kind.as_str() {
                "mnist" => DatasetSpec::Mnist {
                    path: d
                        .path
                        .ok_or_else(|| Error::Config("dataset.path is required for mnist".into()))?,
                    limit: d.limit,
                    test_limit: d.test_limit,
                },
                "synthetic" => {
                    let DatasetSpec::Synthetic {
                        samples,
                        test_samples,
                        dim,
                        classes,
                    } = cfg.dataset
                    else {
                        unreachable!("default dataset is synthetic")
                    };
                    DatasetSpec::Synthetic {
                        samples: d.samples.unwrap_or(samples),
                        test_samples: d.test_samples.unwrap_or(test_samples),
                        dim: d.dim.unwrap_or(dim),
                        classes: d.classes.unwrap_or(classes),
                    }
                }
                other => return Err(Error::Config(format!("unknown dataset.kind `{other}`"))),
            };
        }

        let mut fft_given = false;
        if let Some(c) = self.channel {
            match (c.noise_var, c.beta) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(
                        "give channel.noise_var or channel.beta, not both".into(),
                    ))
                }
                (Some(nv), None) => cfg.channel.noise_var = nv,
                (None, Some(beta)) => {
                    if !(beta > 0.0) {
                        return Err(Error::Config(format!("channel.beta must be positive, got {beta}")));
                    }
                    cfg.channel.noise_var = if beta.is_infinite() { 0.0 } else { E0 / beta };
                }
                (None, None) => {}
            }
            if let Some(v) = c.sync_error_max {
                cfg.channel.sync_error_max = v;
            }
            if let Some(f) = c.fading {
                cfg.channel.fading = f.parse().map_err(cfg_err)?;
            }
            if let Some(n) = c.fft_size {
                cfg.channel.fft_size = n;
                fft_given = true;
            }
        }
        if let Some(p) = self.phy {
            if let Some(a) = p.subcarriers {
                cfg.phy.subcarriers = a;
                if !fft_given {
                    cfg.channel.fft_size = a;
                }
            }
            cfg.phy.symbols = p.symbols;
            cfg.phy.power_cap = p.power_cap;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_desk_defaults() {
        let cfg = ExperimentConfig::from_toml_str("scheme = \"fsk_mv\"\noutput = \"x.jsonl\"\n").unwrap();
        assert_eq!(cfg.scheme, Scheme::FskMv);
        assert_eq!(cfg.training.num_devices, 31);
        assert_eq!(cfg.training.batch_size, 128);
        assert_eq!(cfg.training.learning_rate, 0.004);
        assert_eq!(cfg.channel.noise_var, E0 / DEFAULT_BETA);
    }

    #[test]
    fn full_file() {
        let text = r#"
            scheme = "fsk_mv_dpc"
            rounds = 50
            devices = 8
            batch_size = 16
            learning_rate = 0.01
            partition = "non-iid"
            seed = 9
            model = "mlp"
            eval_every = 5
            output = "out/m.jsonl"

            [dataset]
            kind = "synthetic"
            samples = 400
            dim = 6
            classes = 3

            [channel]
            beta = 4.0
            sync_error_max = 0.25
            fading = "per_frame"

            [phy]
            subcarriers = 32
            symbols = 2
            power_cap = 5.0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.training.partition_mode, PartitionMode::NonIid);
        assert_eq!(cfg.model, ModelKind::Mlp);
        assert_eq!(cfg.channel.noise_var, 0.5);
        assert_eq!(cfg.channel.fading, Fading::PerFrame);
        assert_eq!(cfg.channel.fft_size, 32);
        assert_eq!(cfg.phy.symbols, Some(2));
        assert_eq!(cfg.phy.power_cap, Some(5.0));
        assert_eq!(
            cfg.dataset,
            DatasetSpec::Synthetic {
                samples: 400,
                test_samples: 2000,
                dim: 6,
                classes: 3
            }
        );
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "scheme = \"nope\"\noutput = \"x\"",
            "scheme = \"fsk_mv\"\noutput = \"x\"\ntypo_key = 1",
            "scheme = \"fsk_mv\"\noutput = \"x\"\n[channel]\nbeta = 1.0\nnoise_var = 1.0",
            "scheme = \"fsk_mv\"\noutput = \"x\"\n[channel]\nsync_error_max = 1.5",
            "scheme = \"fsk_mv\"\noutput = \"x\"\n[phy]\nsubcarriers = 7",
            "scheme = \"fsk_mv\"\noutput = \"x\"\neval_every = 0",
            "scheme = \"fsk_mv\"\noutput = \"x\"\n[dataset]\nkind = \"mnist\"",
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert!(err.is_validation(), "{text}: {err}");
        }
    }

    #[test]
    fn default_symbols_fit_in_four_frames() {
        let phy = PhyConfig {
            subcarriers: 64,
            symbols: None,
            power_cap: None,
        };
        assert_eq!(phy.symbols_for(330), 3);
        assert_eq!(phy.symbols_for(1), 1);
    }
}
