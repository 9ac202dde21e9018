//! Monte Carlo estimators that exercise the real transmit/channel/detect
//! path. Trials are packed one per coordinate into blocks; blocks run in
//! parallel with seeds derived from the block index, and results are
//! combined as integer counts or in block order, so the outcome does not
//! depend on scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::aircomp::AirInterface;
use crate::channel::{ChannelConfig, Fading};
use crate::error::{Error, Result};
use crate::learner::SignReport;
use crate::otaphy::E0;
use crate::seed::{derive_seed, rng_for, Stream};

/// Coordinates (= trials) carried by one simulated uplink.
const BLOCK: usize = 1024;
const SUBCARRIERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Estimate {
    fn proportion(hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// How each device's sign relates to the true gradient sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoterModel {
    /// Wrong sign with probability `flip`, independently per device.
    Bernoulli { flip: f64 },
    /// Device gradient is the true one plus Gaussian noise, with
    /// `|g| / (sigma / sqrt(d_b)) = snr`.
    Gaussian { snr: f64 },
}

impl VoterModel {
    fn is_correct(&self, rng: &mut impl Rng) -> bool {
        match *self {
            VoterModel::Bernoulli { flip } => rng.random::<f64>() >= flip,
            VoterModel::Gaussian { snr } => rng.sample::<f64, _>(StandardNormal) >= -snr,
        }
    }
}

/// Setup for a vote-error simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProbSetup {
    pub devices: usize,
    pub voters: VoterModel,
    /// `E0 * theta / noise_var`; infinity means a noiseless receiver.
    pub beta: f64,
    /// Transmit power of every device.
    pub theta: f64,
    pub sync_error_max: f64,
    pub fading: Fading,
    pub trials: usize,
    pub seed: u64,
}

impl ErrorProbSetup {
    pub fn new(devices: usize, voters: VoterModel, beta: f64, trials: usize, seed: u64) -> Self {
        ErrorProbSetup {
            devices,
            voters,
            beta,
            theta: 1.0,
            sync_error_max: 0.0,
            fading: Fading::PerBin,
            trials,
            seed,
        }
    }

    fn noise_var(&self) -> f64 {
        if self.beta.is_infinite() {
            0.0
        } else {
            E0 * self.theta / self.beta
        }
    }
}

fn blocks(trials: usize) -> impl ParallelIterator<Item = (usize, usize)> {
    let n = trials.div_ceil(BLOCK);
    (0..n)
        .into_par_iter()
        .map(move |b| (b, BLOCK.min(trials - b * BLOCK)))
}

fn interface(coords: usize, channel: ChannelConfig) -> Result<AirInterface> {
    let symbols = (2 * coords).div_ceil(SUBCARRIERS);
    AirInterface::new(coords, SUBCARRIERS, symbols, channel)
}

/// Frequency of `sign(delta) != true sign` over `setup.trials` independent
/// coordinates. The true sign is drawn uniformly per coordinate.
pub fn run_error_prob(setup: &ErrorProbSetup) -> Result<Estimate> {
    if setup.devices == 0 || setup.trials == 0 {
        return Err(Error::arg("devices and trials must be positive"));
    }
    if !(setup.beta > 0.0) {
        return Err(Error::arg(format!("beta must be positive, got {}", setup.beta)));
    }
    let channel = ChannelConfig {
        noise_var: setup.noise_var(),
        sync_error_max: setup.sync_error_max,
        fft_size: SUBCARRIERS,
        fading: setup.fading,
    };
    let powers = vec![setup.theta; setup.devices];
    let errors = blocks(setup.trials)
        .map(|(b, coords)| -> Result<usize> {
            let air = interface(coords, channel)?;
            let mut rng = rng_for(setup.seed, Stream::Voters, &[b as u64]);
            let truth: Vec<i8> = (0..coords).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let reports = (0..setup.devices)
                .map(|_| {
                    let signs = truth
                        .iter()
                        .map(|&t| if setup.voters.is_correct(&mut rng) { t } else { -t })
                        .collect();
                    SignReport::new(signs)
                })
                .collect::<Result<Vec<_>>>()?;
            let seed = derive_seed(setup.seed, &[Stream::Trial as u64, b as u64]);
            let v = air.transmit(&reports, &powers, seed)?;
            Ok(v.votes.iter().zip(&truth).filter(|(v, t)| v != *t).count())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(Estimate::proportion(errors, setup.trials))
}

/// Vote error probability with `k` devices that each flip their sign with
/// probability `q_flip`, Rayleigh fading and noise set by `beta`.
pub fn mc_error_prob(k: usize, q_flip: f64, beta: f64, trials: usize, seed: u64) -> Result<Estimate> {
    if !(q_flip > 0.0 && q_flip < 0.5) {
        return Err(Error::arg(format!("q_flip must lie in (0, 1/2), got {q_flip}")));
    }
    if trials < 1000 {
        return Err(Error::arg(format!("at least 1000 trials required, got {trials}")));
    }
    run_error_prob(&ErrorProbSetup::new(
        k,
        VoterModel::Bernoulli { flip: q_flip },
        beta,
        trials,
        seed,
    ))
}

/// Received `+` bin energies when `m_side` devices at power `theta` vote
/// `+1` (one extra device votes `-1`, so `m_side = 0` is noise only).
pub fn sample_plus_energies(
    m_side: usize,
    theta: f64,
    noise_var: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let channel = ChannelConfig {
        noise_var,
        ..ChannelConfig::default()
    };
    let devices = m_side + 1;
    let powers = vec![theta; devices];
    let parts = blocks(trials)
        .map(|(b, coords)| -> Result<Vec<f64>> {
            let air = interface(coords, channel)?;
            let reports = (0..devices)
                .map(|m| SignReport::new(vec![if m < m_side { 1 } else { -1 }; coords]))
                .collect::<Result<Vec<_>>>()?;
            let v = air.transmit(&reports, &powers, derive_seed(seed, &[b as u64]))?;
            Ok(v.e_plus)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// Sample mean and standard error of the `+` bin energy.
pub fn mc_mean_energy(m_side: usize, theta: f64, noise_var: f64, trials: usize, seed: u64) -> Result<Estimate> {
    if trials < 2 {
        return Err(Error::arg("need at least two trials"));
    }
    let e = sample_plus_energies(m_side, theta, noise_var, trials, seed)?;
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
        trials,
    })
}

/// Frequency with which the mean of `batch` draws from `N(g, sigma^2)`
/// (with `g > 0`) comes out negative.
pub fn mc_sign_flip(g: f64, sigma: f64, batch: usize, draws: usize, seed: u64) -> Result<Estimate> {
    if !(g > 0.0 && sigma > 0.0) || batch == 0 || draws == 0 {
        return Err(Error::arg("g, sigma, batch and draws must be positive"));
    }
    let flips: usize = blocks(draws)
        .map(|(b, n)| {
            let mut rng = rng_for(seed, Stream::Trial, &[b as u64]);
            (0..n)
                .filter(|_| {
                    let sum: f64 = (0..batch)
                        .map(|_| g + sigma * rng.sample::<f64, _>(StandardNormal))
                        .sum();
                    sum < 0.0
                })
                .count()
        })
        .sum();
    Ok(Estimate::proportion(flips, draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::bounds::{exponential_race_error, mean_energy};

    #[test]
    fn energy_mean_matches_closed_form() {
        let est = mc_mean_energy(5, 1.0, 1.0, 100_000, 3).unwrap();
        let expect = mean_energy(5, E0, 1.0, 1.0).unwrap();
        assert!((est.value - expect).abs() / expect < 0.02, "{est:?}");
    }

    #[test]
    fn unanimous_high_snr_votes_are_right() {
        let est = mc_error_prob(31, 1e-3, 1e6, 2000, 1).unwrap();
        assert!(est.value < 0.01, "{est:?}");
    }

    #[test]
    fn single_noiseless_voter_passes_through() {
        let q = 0.2;
        let est = mc_error_prob(1, q, f64::INFINITY, 20_000, 7).unwrap();
        assert!((est.value - q).abs() < 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn estimate_matches_exponential_race_closed_form() {
        for &(k, q, beta) in &[(31, 0.1, 2.0), (5, 0.3, 0.5), (15, 0.05, 8.0)] {
            let est = mc_error_prob(k, q, beta, 40_000, 11).unwrap();
            let exact = exponential_race_error(k, beta, q).unwrap();
            assert!(
                (est.value - exact).abs() < 4.0 * est.stderr,
                "K={k} q={q} beta={beta}: {est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn argument_checks() {
        assert!(mc_error_prob(5, 0.5, 1.0, 1000, 0).is_err());
        assert!(mc_error_prob(5, 0.0, 1.0, 1000, 0).is_err());
        assert!(mc_error_prob(5, 0.1, 1.0, 999, 0).is_err());
        assert!(mc_sign_flip(-1.0, 1.0, 1, 10, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = mc_error_prob(7, 0.2, 1.0, 3000, 5).unwrap();
        let b = mc_error_prob(7, 0.2, 1.0, 3000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sign_flip_example_respects_gauss_bound() {
        // |g| = 0.1, sigma = 0.8, d_b = 128  =>  R = sqrt(128) / 8.
        let est = mc_sign_flip(0.1, 0.8, 128, 100_000, 2).unwrap();
        let r = 128f64.sqrt() * 0.1 / 0.8;
        let bound = crate::analysis::bounds::failure_prob_bound(r).unwrap();
        assert!(est.value <= bound, "{est:?} vs {bound}");
    }
}
