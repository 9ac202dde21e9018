//! Bound-versus-simulation verification suites, shared by the `mc-verify`
//! subcommand and the test suite.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::bounds::{failure_prob_bound, intermediate_error_bound, mean_energy};
use super::montecarlo::{mc_error_prob, mc_mean_energy, mc_sign_flip, run_error_prob, ErrorProbSetup, VoterModel};
use crate::aircomp::AirInterface;
use crate::channel::ChannelConfig;
use crate::detector::ideal_majority_vote;
use crate::error::{Error, Result};
use crate::learner::SignReport;
use crate::otaphy::{Randomization, E0};
use crate::seed::{derive_seed, rng_for, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Mean received energy against its closed form.
    Lemma31,
    /// Gaussian sign-flip frequency against the Gauss-inequality bound.
    LemmaD1,
    /// Vote error against the pre-relaxation error bound, and below 1/2.
    Lemma32,
    /// Vote error with and without timing offsets.
    Sync,
    /// Ideal air interface against the exact majority vote.
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lemma31, Suite::LemmaD1, Suite::Lemma32, Suite::Sync, Suite::Oracle];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Lemma31 => "lemma31",
            Suite::LemmaD1 => "lemmad1",
            Suite::Lemma32 => "lemma32",
            Suite::Sync => "sync",
            Suite::Oracle => "oracle",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .or(match s {
                "gauss" | "lemma-d1" => Some(Suite::LemmaD1),
                _ => None,
            })
            .ok_or_else(|| Error::arg(format!("unknown suite `{s}`")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of a verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: Suite,
    pub case: String,
    pub measured: f64,
    pub reference: f64,
    /// Human-readable acceptance rule.
    pub rule: String,
    pub passed: bool,
}

pub const LEMMA31_SIDES: [usize; 6] = [0, 1, 2, 5, 15, 31];
pub const LEMMA31_THETAS: [f64; 3] = [1.0, 1.5, 3.0];
pub const LEMMA31_NOISE: [f64; 2] = [0.1, 1.0];
pub const LEMMA31_REL_TOL: f64 = 0.02;

pub const LEMMAD1_SNRS: [f64; 7] = [0.2, 0.5, 1.0, 1.155, 2.0, 5.0, 20.0];
/// Mini-batch noise used to realise a given SNR in the sign-flip suite.
pub const LEMMAD1_SIGMA: f64 = 0.8;
pub const LEMMAD1_BATCH: usize = 128;

pub const LEMMA32_DEVICES: [usize; 3] = [5, 15, 31];
pub const LEMMA32_BETAS: [f64; 3] = [0.5, 2.0, 8.0];
pub const LEMMA32_FLIPS: [f64; 3] = [0.05, 0.2, 0.4];

pub const SYNC_DEVICES: usize = 31;
pub const SYNC_FLIP: f64 = 0.2;
pub const SYNC_BETA: f64 = 2.0;
pub const SYNC_OFFSET: f64 = 0.25;

pub fn lemma31(trials: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for (a, &m) in LEMMA31_SIDES.iter().enumerate() {
        for (b, &theta) in LEMMA31_THETAS.iter().enumerate() {
            for (c, &nv) in LEMMA31_NOISE.iter().enumerate() {
                let s = derive_seed(seed, &[a as u64, b as u64, c as u64]);
                let est = mc_mean_energy(m, theta, nv, trials, s)?;
                let exact = mean_energy(m, E0, theta, nv)?;
                let rel = (est.value - exact).abs() / exact;
                rows.push(CheckRow {
                    suite: Suite::Lemma31,
                    case: format!("M+={m} theta={theta} noise={nv}"),
                    measured: est.value,
                    reference: exact,
                    rule: format!("rel err {rel:.4} < {LEMMA31_REL_TOL}"),
                    passed: rel < LEMMA31_REL_TOL,
                });
            }
        }
    }
    Ok(rows)
}

pub fn lemma_d1(draws: usize, seed: u64) -> Result<Vec<CheckRow>> {
    LEMMAD1_SNRS
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let g = r * LEMMAD1_SIGMA / (LEMMAD1_BATCH as f64).sqrt();
            let est = mc_sign_flip(g, LEMMAD1_SIGMA, LEMMAD1_BATCH, draws, derive_seed(seed, &[i as u64]))?;
            let bound = failure_prob_bound(r)?;
            Ok(CheckRow {
                suite: Suite::LemmaD1,
                case: format!("R={r}"),
                measured: est.value,
                reference: bound,
                rule: format!("<= bound + 3se ({:.5})", bound + 3.0 * est.stderr),
                passed: est.value <= bound + 3.0 * est.stderr,
            })
        })
        .collect()
}

pub fn lemma32(trials: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for (a, &k) in LEMMA32_DEVICES.iter().enumerate() {
        for (b, &beta) in LEMMA32_BETAS.iter().enumerate() {
            for (c, &q) in LEMMA32_FLIPS.iter().enumerate() {
                let s = derive_seed(seed, &[a as u64, b as u64, c as u64]);
                let est = mc_error_prob(k, q, beta, trials, s)?;
                let bound = intermediate_error_bound(k, beta, q)?;
                let limit = bound + 3.0 * est.stderr;
                let below_half = est.value + 3.0 * est.stderr < 0.5;
                rows.push(CheckRow {
                    suite: Suite::Lemma32,
                    case: format!("K={k} beta={beta} q={q}"),
                    measured: est.value,
                    reference: bound,
                    rule: format!("<= bound + 3se ({limit:.4}) and < 1/2"),
                    passed: est.value <= limit && below_half,
                });
            }
        }
    }
    Ok(rows)
}

/// Error rates with and without timing offsets, on matched seeds.
pub fn sync(trials: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let mut setup = ErrorProbSetup::new(
        SYNC_DEVICES,
        VoterModel::Bernoulli { flip: SYNC_FLIP },
        SYNC_BETA,
        trials,
        seed,
    );
    let aligned = run_error_prob(&setup)?;
    setup.sync_error_max = SYNC_OFFSET;
    let offset = run_error_prob(&setup)?;
    let combined = (aligned.stderr.powi(2) + offset.stderr.powi(2)).sqrt();
    let diff = (offset.value - aligned.value).abs();
    Ok(vec![CheckRow {
        suite: Suite::Sync,
        case: format!("K={SYNC_DEVICES} q={SYNC_FLIP} beta={SYNC_BETA} delta_max={SYNC_OFFSET}"),
        measured: offset.value,
        reference: aligned.value,
        rule: format!("|diff| {diff:.5} < 3 combined se ({:.5})", 3.0 * combined),
        passed: diff < 3.0 * combined,
    }])
}

fn ideal_interface(q: usize) -> Result<AirInterface> {
    let mut air = AirInterface::new(q, 2 * q, 1, ChannelConfig::default())?;
    air.unit_channel = true;
    air.randomization = Randomization::Pinned;
    Ok(air)
}

fn reports_from_bits(bits: u64, devices: usize, q: usize) -> Vec<SignReport> {
    (0..devices)
        .map(|m| {
            let signs = (0..q)
                .map(|i| if bits >> (m * q + i) & 1 == 1 { 1 } else { -1 })
                .collect();
            SignReport::new(signs).expect("signs are +-1")
        })
        .collect()
}

/// Number of sign patterns on which the ideal air interface disagrees with
/// the exact majority vote: every pattern for small `(devices, q)`.
pub fn oracle_mismatches_exhaustive(devices: usize, q: usize, power: f64) -> Result<(usize, usize)> {
    let total_bits = devices * q;
    if total_bits > 20 {
        return Err(Error::arg("exhaustive check limited to 2^20 patterns"));
    }
    let air = ideal_interface(q)?;
    let powers = vec![power; devices];
    let mut mismatches = 0;
    let patterns = 1usize << total_bits;
    for bits in 0..patterns as u64 {
        let reports = reports_from_bits(bits, devices, q);
        let v = air.transmit(&reports, &powers, bits)?;
        mismatches += usize::from(v.votes != ideal_majority_vote(&reports)?);
    }
    Ok((mismatches, patterns))
}

pub fn oracle_mismatches_random(devices: usize, q: usize, patterns: usize, seed: u64) -> Result<usize> {
    let air = ideal_interface(q)?;
    let powers = vec![1.0; devices];
    let mut rng = rng_for(seed, Stream::Voters, &[]);
    let mut mismatches = 0;
    for p in 0..patterns {
        let reports = (0..devices)
            .map(|_| SignReport::new((0..q).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()))
            .collect::<Result<Vec<_>>>()?;
        let v = air.transmit(&reports, &powers, p as u64)?;
        mismatches += usize::from(v.votes != ideal_majority_vote(&reports)?);
    }
    Ok(mismatches)
}

pub fn oracle(seed: u64) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for &(m, q) in &[(3usize, 2usize), (3, 4)] {
        let (bad, n) = oracle_mismatches_exhaustive(m, q, 1.0)?;
        rows.push(CheckRow {
            suite: Suite::Oracle,
            case: format!("exhaustive M={m} q={q} ({n} patterns)"),
            measured: bad as f64,
            reference: 0.0,
            rule: "zero mismatches".into(),
            passed: bad == 0,
        });
    }
    let bad = oracle_mismatches_random(31, 10, 1000, seed)?;
    rows.push(CheckRow {
        suite: Suite::Oracle,
        case: "random M=31 q=10 (1000 patterns)".into(),
        measured: bad as f64,
        reference: 0.0,
        rule: "zero mismatches".into(),
        passed: bad == 0,
    });
    Ok(rows)
}

/// Runs one suite. `trials` is the Monte Carlo sample size; the oracle
/// suite ignores it.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Lemma31 => lemma31(trials, seed),
        Suite::LemmaD1 => lemma_d1(trials, seed),
        Suite::Lemma32 => lemma32(trials, seed),
        Suite::Sync => sync(trials, seed),
        Suite::Oracle => oracle(seed),
    }
}
