//! Closed-form expressions: received energy, sign-failure and vote-error
//! bounds, the convergence-rate bound, and per-iteration communication cost.
//!
//! Device count is written `k` throughout; it is the same quantity as the
//! number of devices `M` used elsewhere in the crate.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be positive, got {v}")))
    }
}

/// Expected energy on a bin that `m_side` devices vote on:
/// `E0 * m_side * theta + noise_var`.
pub fn mean_energy(m_side: usize, e0: f64, theta: f64, noise_var: f64) -> Result<f64> {
    for (name, v) in [("E0", e0), ("theta", theta), ("noise_var", noise_var)] {
        if !(v >= 0.0) {
            return Err(Error::arg(format!("{name} must be non-negative, got {v}")));
        }
    }
    Ok(e0 * m_side as f64 * theta + noise_var)
}

/// Gauss-inequality bound on the probability that one device's mini-batch
/// gradient has the wrong sign, given the signal-to-noise ratio `r`.
pub fn failure_prob_bound(r: f64) -> Result<f64> {
    positive("R", r)?;
    let sqrt3 = 3f64.sqrt();
    Ok(if r > 2.0 / sqrt3 {
        (2.0 / 9.0) / (r * r)
    } else {
        0.5 - r / (2.0 * sqrt3)
    })
}

/// Bound on the vote error probability for `k` devices at SNR-like ratio
/// `beta` and gradient SNR `r`.
pub fn error_prob_bound(k: usize, beta: f64, r: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::arg("K must be positive"));
    }
    positive("beta", beta)?;
    positive("R", r)?;
    let k = k as f64;
    Ok(((k / 2.0) * SQRT_2 / (3.0 * r) + 1.0 / beta) / (k + 2.0 / beta))
}

/// The form the error-probability derivation reaches before `q(1-q)` is
/// relaxed: `(k q (1-q) + 1/beta) / (k + 2/beta)`.
pub fn intermediate_error_bound(k: usize, beta: f64, q_flip: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::arg("K must be positive"));
    }
    positive("beta", beta)?;
    let k = k as f64;
    let inv = 1.0 / beta;
    Ok((k * q_flip * (1.0 - q_flip) + inv) / (k + 2.0 * inv))
}

/// Vote error probability when the two bin energies are independent
/// exponentials, which is exactly the case under Rayleigh fading with
/// randomized symbols. Conditioned on `X` correct voters the error is
/// `mu_- / (mu_+ + mu_-)`; averaging over `X ~ Bin(k, 1-q)` gives
/// `(k q + 1/beta) / (k + 2/beta)`.
pub fn exponential_race_error(k: usize, beta: f64, q_flip: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::arg("K must be positive"));
    }
    positive("beta", beta)?;
    let k = k as f64;
    let inv = 1.0 / beta;
    Ok((k * q_flip + inv) / (k + 2.0 * inv))
}

/// `tau = (1 + 2 / (beta k)) / sqrt(gamma)`.
pub fn tau(beta: f64, k: usize, gamma: f64) -> f64 {
    (1.0 + 2.0 / (beta * k as f64)) / gamma.sqrt()
}

/// Inputs of the convergence-rate bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub k: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Total rounds `N`.
    pub rounds: f64,
    /// `||L||_1`.
    pub l1_smooth: f64,
    /// `||sigma||_1`.
    pub l1_sigma: f64,
    /// `F(w0) - F*`.
    pub f_gap: f64,
    pub e0: f64,
    pub theta: Option<f64>,
    pub noise_var: Option<f64>,
    /// Defaults to `rounds / gamma`.
    pub batch_size: Option<f64>,
    /// Keep the `1/sqrt(d_b)` factor the derivation carries on the variance
    /// term.
    pub strict_derivation: bool,
}

impl BoundParams {
    pub fn new(k: usize, beta: f64, gamma: f64, rounds: f64) -> Self {
        BoundParams {
            k,
            beta,
            gamma,
            rounds,
            l1_smooth: 1.0,
            l1_sigma: 1.0,
            f_gap: 1.0,
            e0: crate::otaphy::E0,
            theta: None,
            noise_var: None,
            batch_size: None,
            strict_derivation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::arg("K must be positive"));
        }
        positive("N", self.rounds)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        positive("||L||_1", self.l1_smooth)?;
        if !(self.l1_sigma >= 0.0 && self.f_gap >= 0.0) {
            return Err(Error::arg("||sigma||_1 and F gap must be non-negative"));
        }
        if let (Some(theta), Some(nv)) = (self.theta, self.noise_var) {
            let implied = self.e0 * theta / nv;
            if ((implied - self.beta) / self.beta).abs() > 1e-12 {
                return Err(Error::Consistency(format!(
                    "beta = {} but E0 * theta / noise_var = {implied}",
                    self.beta
                )));
            }
        }
        Ok(())
    }

    pub fn effective_batch_size(&self) -> f64 {
        self.batch_size.unwrap_or(self.rounds / self.gamma)
    }

    /// Whether `d_b = N / gamma` holds with an integral batch size, as the
    /// bound assumes.
    pub fn batch_size_consistent(&self) -> bool {
        let d = self.rounds / self.gamma;
        let integral = (d - d.round()).abs() < 1e-9 && d >= 1.0;
        integral && self.batch_size.is_none_or(|b| (b - d).abs() < 1e-9)
    }
}

/// Upper bound on the average gradient L1 norm after `N` rounds.
pub fn convergence_bound(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let t = tau(p.beta, p.k, p.gamma);
    let mut variance_term = (2.0 * SQRT_2 / 6.0) * p.gamma.sqrt() * p.l1_sigma;
    if p.strict_derivation {
        variance_term /= p.effective_batch_size().sqrt();
    }
    Ok((t * p.l1_smooth.sqrt() * (p.f_gap + p.gamma / 2.0) + variance_term) / p.rounds.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostScheme {
    Sgd,
    Qsgd,
    TernGrad,
    SignSgdMv,
}

impl FromStr for CostScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(CostScheme::Sgd),
            "qsgd" => Ok(CostScheme::Qsgd),
            "terngrad" => Ok(CostScheme::TernGrad),
            "signsgd_mv" | "signsgd-mv" => Ok(CostScheme::SignSgdMv),
            other => Err(Error::arg(format!("unknown compression scheme `{other}`"))),
        }
    }
}

impl fmt::Display for CostScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostScheme::Sgd => "sgd",
            CostScheme::Qsgd => "qsgd",
            CostScheme::TernGrad => "terngrad",
            CostScheme::SignSgdMv => "signsgd_mv",
        })
    }
}

/// Uplink bits per iteration for `devices` devices and a `dim`-parameter
/// model.
pub fn comm_cost(scheme: CostScheme, devices: u64, dim: u64) -> Result<u64> {
    if devices == 0 || dim == 0 {
        return Err(Error::arg("M and D must be at least 1"));
    }
    let md = devices * dim;
    Ok(match scheme {
        CostScheme::Sgd => 64 * md,
        CostScheme::Qsgd | CostScheme::TernGrad => {
            let per = 2.0 + ((2 * devices + 1) as f64).log2();
            (per * md as f64).ceil() as u64
        }
        CostScheme::SignSgdMv => 2 * md,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_energy_examples() {
        assert_eq!(mean_energy(5, 2.0, 1.0, 1.0).unwrap(), 11.0);
        assert_eq!(mean_energy(0, 2.0, 1.0, 0.3).unwrap(), 0.3);
        assert!(mean_energy(1, 2.0, -1.0, 0.3).is_err());
    }

    #[test]
    fn failure_bound_branches() {
        assert!((failure_prob_bound(2.0).unwrap() - 1.0 / 18.0).abs() < 1e-15);
        let expect = 0.5 - 1.0 / (2.0 * 3f64.sqrt());
        assert!((failure_prob_bound(1.0).unwrap() - expect).abs() < 1e-15);
        assert!((failure_prob_bound(1.0).unwrap() - 0.21132).abs() < 1e-5);
        assert!(failure_prob_bound(0.0).is_err());
        assert!(failure_prob_bound(-1.0).is_err());
        for r in [1e-6, 0.1, 1.0, 1.15, 1.16, 3.0, 100.0] {
            assert!(failure_prob_bound(r).unwrap() < 0.5);
        }
    }

    #[test]
    fn error_bound_value() {
        let b = error_prob_bound(31, 2.0, 3.0).unwrap();
        let expect = (15.5 * SQRT_2 / 9.0 + 0.5) / 32.0;
        assert!((b - expect).abs() < 1e-15);
        assert!((b - 0.09174).abs() < 1e-5);
        assert!(error_prob_bound(0, 2.0, 3.0).is_err());
        assert!(error_prob_bound(3, 0.0, 3.0).is_err());
        assert!(error_prob_bound(3, 1.0, -3.0).is_err());
    }

    #[test]
    fn error_bound_limit() {
        let r = 1.7;
        let b = error_prob_bound(1_000_000_000, 1e12, r).unwrap();
        assert!((b - SQRT_2 / (6.0 * r)).abs() < 1e-8);
    }

    #[test]
    fn tau_value() {
        assert!((tau(2.0, 31, 1.0) - 1.032_258_064_5).abs() < 1e-9);
    }

    #[test]
    fn convergence_scaling_and_limit() {
        let mut p = BoundParams::new(31, 2.0, 1.0, 100.0);
        p.l1_smooth = 4.0;
        p.l1_sigma = 3.0;
        p.f_gap = 2.5;
        let a = convergence_bound(&p).unwrap();
        p.rounds = 200.0;
        let b = convergence_bound(&p).unwrap();
        assert!((a / b - SQRT_2).abs() < 1e-12);

        p.k = usize::MAX / 4;
        p.beta = 1e300;
        let lim = convergence_bound(&p).unwrap();
        let expect = (2.0 * (2.5 + 0.5) + (2.0 * SQRT_2 / 6.0) * 3.0) / 200f64.sqrt();
        assert!((lim - expect).abs() < 1e-12);
    }

    #[test]
    fn strict_derivation_divides_variance_term() {
        let mut p = BoundParams::new(10, 1.0, 2.0, 128.0);
        p.f_gap = 0.0;
        p.l1_smooth = 1e-300;
        let loose = convergence_bound(&p).unwrap();
        p.strict_derivation = true;
        let strict = convergence_bound(&p).unwrap();
        assert!((loose / strict - 8.0).abs() < 1e-9);
        assert!(p.batch_size_consistent());
        p.rounds = 127.0;
        assert!(!p.batch_size_consistent());
    }

    #[test]
    fn beta_cross_check() {
        let mut p = BoundParams::new(10, 4.0, 1.0, 10.0);
        p.theta = Some(1.0);
        p.noise_var = Some(0.5);
        assert!(p.validate().is_ok());
        p.noise_var = Some(0.6);
        assert!(matches!(p.validate(), Err(Error::Consistency(_))));
        p.rounds = 0.0;
        assert!(convergence_bound(&p).is_err());
    }

    #[test]
    fn table_costs() {
        assert_eq!(comm_cost(CostScheme::SignSgdMv, 31, 10_000).unwrap(), 620_000);
        assert_eq!(comm_cost(CostScheme::Sgd, 1, 1).unwrap(), 64);
        // log2(3) = 1.585 -> 3.585 bits, ceil.
        assert_eq!(comm_cost(CostScheme::Qsgd, 1, 1).unwrap(), 4);
        assert_eq!(comm_cost(CostScheme::TernGrad, 1, 1000).unwrap(), 3585);
        assert!("bogus".parse::<CostScheme>().is_err());
        assert!(comm_cost(CostScheme::Sgd, 0, 1).is_err());
    }
}
