//! The federated training loop for all four schemes.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{DatasetSpec, ExperimentConfig, Scheme};
use super::metrics::{summary_path, write_summary, MetricsWriter, RoundMetrics, SummaryRow};
use crate::aircomp::AirInterface;
use crate::analysis::{comm_cost, CostScheme};
use crate::detector::ideal_majority_vote;
use crate::error::{Error, Result};
use crate::learner::{
    apply_global_update, apply_gradient_step, compute_local_gradient, evaluate, full_gradient,
    load_idx_dataset, make_synthetic_split, partition, sign_quantize, Architecture, Dataset,
    DatasetShard, Evaluation, GradientVector, ModelState, SignReport,
};
use crate::otaphy::{mean_power, update_power, PowerState, Randomization};
use crate::seed::derive_seed;

/// Seed tag separating uplink randomness from per-device batch draws.
const AIR_TAG: u64 = 0xA1;

/// Model and power state between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub model: ModelState,
    pub power: PowerState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    /// The direction actually applied (for FedAvg, the sign of the averaged
    /// gradient).
    pub vote: SignReport,
    /// Exact majority of the device signs.
    pub ideal_vote: SignReport,
    /// Fraction of coordinates where `vote == ideal_vote`.
    pub vote_agreement: f64,
}

/// Everything fixed for the length of a run.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub arch: Architecture,
    pub train: Dataset,
    pub test: Dataset,
    pub shards: Vec<DatasetShard>,
    air: Option<AirInterface>,
}

const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

fn load_datasets(spec: &DatasetSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    match spec {
        DatasetSpec::Mnist {
            path,
            limit,
            test_limit,
        } => {
            let f = |i: usize| path.join(MNIST_FILES[i]);
            let mut train = load_idx_dataset(&f(0), &f(1))?;
            let mut test = load_idx_dataset(&f(2), &f(3))?;
            if let Some(n) = *limit {
                train = train.truncate(n);
            }
            if let Some(n) = *test_limit {
                test = test.truncate(n);
            }
            if train.input_dim() != test.input_dim() {
                return Err(Error::Consistency(format!(
                    "train rows have {} features, test rows {}",
                    train.input_dim(),
                    test.input_dim()
                )));
            }
            Ok((train, test))
        }
        &DatasetSpec::Synthetic {
            samples,
            test_samples,
            dim,
            classes,
        } => make_synthetic_split(samples, test_samples, dim, classes, seed)
            .map_err(|e| Error::Config(e.to_string())),
    }
}

fn numeric(round: u64, device: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(reason) => Error::Numeric {
            round,
            device,
            reason,
        },
        other => other,
    }
}

fn agreement_fraction(a: &SignReport, b: &SignReport) -> f64 {
    a.agreements(b) as f64 / a.len() as f64
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.master_seed();
        let (train, test) = load_datasets(&config.dataset, seed)?;
        let shards = partition(
            &train,
            config.training.num_devices,
            config.training.partition_mode,
            seed,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        config.training.validate(&shards)?;
        let arch = Architecture::for_dataset(config.model, &train);
        let air = if config.scheme.uses_air() {
            let q = arch.num_params();
            let mut air = AirInterface::new(
                q,
                config.phy.subcarriers,
                config.phy.symbols_for(q),
                config.channel,
            )
            .map_err(|e| match e {
                Error::Argument(m) => Error::Config(m),
                other => other,
            })?;
            air.unit_channel = config.hooks.unit_channel;
            if config.hooks.pin_randomization {
                air.randomization = Randomization::Pinned;
            }
            Some(air)
        } else {
            None
        };
        Ok(Experiment {
            config,
            arch,
            train,
            test,
            shards,
            air,
        })
    }

    pub fn num_params(&self) -> usize {
        self.arch.num_params()
    }

    pub fn initial_state(&self) -> RunState {
        RunState {
            model: self.arch.init(self.config.master_seed()),
            power: PowerState::new(self.config.training.num_devices),
        }
    }

    /// Local mini-batch gradients of every device at `model`, computed in
    /// parallel with per-(round, device) seeds.
    pub fn local_gradients(&self, model: &ModelState, round: u64) -> Result<Vec<GradientVector>> {
        let seed = self.config.master_seed();
        let d_b = self.config.training.batch_size;
        self.shards
            .par_iter()
            .enumerate()
            .map(|(m, shard)| {
                let g = compute_local_gradient(
                    &self.arch,
                    model,
                    &self.train,
                    shard,
                    d_b,
                    derive_seed(seed, &[round, m as u64]),
                )
                .map_err(|e| numeric(round, m, e))?;
                match g.values.iter().position(|v| !v.is_finite()) {
                    Some(i) => Err(Error::Numeric {
                        round,
                        device: m,
                        reason: format!("gradient coordinate {i} is not finite"),
                    }),
                    None => Ok(g),
                }
            })
            .collect()
    }

    /// One communication round `round` (0-based) starting from `state`.
    pub fn run_round(&self, state: &RunState, round: u64) -> Result<(RunState, RoundOutcome)> {
        let grads = self.local_gradients(&state.model, round)?;
        let reports: Vec<SignReport> = grads.iter().map(sign_quantize).collect();
        let ideal_vote = ideal_majority_vote(&reports)?;
        let lr = self.config.training.learning_rate;
        let mut power = state.power.clone();

        let (model, vote) = match self.config.scheme {
            Scheme::IdealSignsgdMv => (apply_global_update(&state.model, &ideal_vote, lr)?, ideal_vote.clone()),
            Scheme::FedavgIdeal => {
                let q = self.num_params();
                let mut avg = vec![0.0; q];
                for g in &grads {
                    for (a, v) in avg.iter_mut().zip(&g.values) {
                        *a += v;
                    }
                }
                let m = grads.len() as f64;
                avg.iter_mut().for_each(|a| *a /= m);
                let vote = SignReport::from_values(&avg);
                (apply_gradient_step(&state.model, &avg, lr), vote)
            }
            Scheme::FskMv | Scheme::FskMvDpc => {
                let air = self.air.as_ref().expect("air interface built for air schemes");
                let seed = derive_seed(self.config.master_seed(), &[AIR_TAG, round]);
                let vote = air.transmit(&reports, &state.power.powers, seed)?.votes;
                if self.config.scheme == Scheme::FskMvDpc {
                    power = update_power(&state.power, &reports, &vote, self.config.phy.power_cap)?;
                }
                (apply_global_update(&state.model, &vote, lr)?, vote)
            }
        };
        let vote_agreement = agreement_fraction(&vote, &ideal_vote);
        Ok((
            RunState { model, power },
            RoundOutcome {
                vote,
                ideal_vote,
                vote_agreement,
            },
        ))
    }

    pub fn evaluate(&self, state: &RunState) -> Result<Evaluation> {
        evaluate(&self.arch, &state.model, &self.test)
    }

    /// Sign of the gradient over the whole training set.
    pub fn true_gradient_signs(&self, model: &ModelState) -> Result<SignReport> {
        let rows: Vec<usize> = (0..self.train.len()).collect();
        Ok(SignReport::from_values(
            &full_gradient(&self.arch, model, &self.train, &rows)?.values,
        ))
    }

    /// Bits sent per round by all devices, times the number of rounds.
    pub fn total_bits(&self) -> Result<u64> {
        let scheme = match self.config.scheme {
            Scheme::FedavgIdeal => CostScheme::Sgd,
            _ => CostScheme::SignSgdMv,
        };
        let per_round = comm_cost(
            scheme,
            self.config.training.num_devices as u64,
            self.num_params() as u64,
        )?;
        Ok(per_round * self.config.training.rounds)
    }

    fn record(&self, state: &RunState, round: u64, vote: Option<(f64, f64)>, start: Instant) -> Result<RoundMetrics> {
        let eval = self.evaluate(state)?;
        Ok(RoundMetrics {
            round,
            test_accuracy: eval.accuracy,
            test_loss: eval.mean_loss,
            mean_power: mean_power(&state.power)?,
            vote_agreement: vote.map(|v| v.0),
            empirical_perr: vote.map(|v| v.1),
            wall_time_ms: self
                .config
                .record_wall_time
                .then(|| start.elapsed().as_millis() as u64),
        })
    }

    /// Runs all rounds, passing each evaluation record to `sink`. Records
    /// are taken at round 0, every `eval_every` rounds, and after the last
    /// round. Returns the final state.
    pub fn run_with(&self, mut sink: impl FnMut(&RoundMetrics) -> Result<()>) -> Result<RunState> {
        let start = Instant::now();
        let rounds = self.config.training.rounds;
        let every = self.config.eval_every;
        let mut state = self.initial_state();
        sink(&self.record(&state, 0, None, start)?)?;
        for n in 0..rounds {
            let done = n + 1;
            let recorded = done % every == 0 || done == rounds;
            let truth = if recorded {
                Some(self.true_gradient_signs(&state.model)?)
            } else {
                None
            };
            let (next, outcome) = self.run_round(&state, n)?;
            state = next;
            if let Some(truth) = truth {
                let perr = 1.0 - agreement_fraction(&outcome.vote, &truth);
                sink(&self.record(&state, done, Some((outcome.vote_agreement, perr)), start)?)?;
            }
        }
        Ok(state)
    }

    /// Runs and collects the records in memory.
    pub fn run(&self) -> Result<(RunState, Vec<RoundMetrics>)> {
        let mut out = Vec::new();
        let state = self.run_with(|m| {
            out.push(m.clone());
            Ok(())
        })?;
        Ok((state, out))
    }
}

/// Runs `config` end to end, writing the metrics JSONL to `config.output`
/// and the summary CSV beside it. The output file is opened before any
/// training starts. Returns the summary row.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SummaryRow> {
    config.validate()?;
    let mut writer = MetricsWriter::create(&config.output)?;
    let exp = Experiment::new(config.clone())?;
    let mut last = None;
    let state = exp.run_with(|m| {
        last = Some(m.test_accuracy);
        writer.write(m)
    })?;
    writer.finish()?;
    let row = SummaryRow {
        scheme: config.scheme.name().into(),
        final_accuracy: last.unwrap_or(0.0),
        mean_power: mean_power(&state.power)?,
        total_bits: exp.total_bits()?,
        rounds: config.training.rounds,
        seed: config.master_seed(),
    };
    write_summary(&summary_path(&config.output), &row)?;
    Ok(row)
}

/// Where [`run_experiment`] puts the summary for `config`.
pub fn summary_file(config: &ExperimentConfig) -> PathBuf {
    summary_path(&config.output)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scheme: Scheme) -> ExperimentConfig {
        let mut c = ExperimentConfig::desk_default(scheme, 5, "unused.jsonl");
        c.training.num_devices = 5;
        c.training.batch_size = 16;
        c.training.rounds = 7;
        c.eval_every = 3;
        c.dataset = DatasetSpec::Synthetic {
            samples: 300,
            test_samples: 100,
            dim: 5,
            classes: 3,
        };
        c
    }

    #[test]
    fn record_schedule() {
        let exp = Experiment::new(small(Scheme::FskMv)).unwrap();
        let (state, recs) = exp.run().unwrap();
        let rounds: Vec<u64> = recs.iter().map(|r| r.round).collect();
        assert_eq!(rounds, vec![0, 3, 6, 7]);
        assert_eq!(state.model.round, 7);
        assert!(recs[0].vote_agreement.is_none() && recs[0].empirical_perr.is_none());
        assert!(recs[1..].iter().all(|r| r.vote_agreement.is_some()));
        assert!(recs.iter().all(|r| r.wall_time_ms.is_none()));
    }

    #[test]
    fn power_changes_only_with_dpc() {
        for scheme in Scheme::ALL {
            let exp = Experiment::new(small(scheme)).unwrap();
            let (state, _) = exp.run().unwrap();
            let p = mean_power(&state.power).unwrap();
            if scheme == Scheme::FskMvDpc {
                assert!(p > 1.0);
            } else {
                assert_eq!(p, 1.0);
            }
        }
    }

    #[test]
    fn batch_larger_than_shard_is_config_error() {
        let mut c = small(Scheme::IdealSignsgdMv);
        c.training.batch_size = 1000;
        assert!(matches!(Experiment::new(c), Err(Error::Config(_))));
    }

    #[test]
    fn total_bits_by_scheme() {
        let ideal = Experiment::new(small(Scheme::IdealSignsgdMv)).unwrap();
        let q = ideal.num_params() as u64;
        assert_eq!(ideal.total_bits().unwrap(), 2 * 5 * q * 7);
        let avg = Experiment::new(small(Scheme::FedavgIdeal)).unwrap();
        assert_eq!(avg.total_bits().unwrap(), 64 * 5 * q * 7);
    }
}
