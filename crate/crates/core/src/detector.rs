//! Server side: non-coherent energy detection of the majority vote.

use crate::error::{Error, Result};
use crate::learner::{sign, SignReport};
use crate::otaphy::{OfdmFrame, SubcarrierMap};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
    /// `e_plus - e_minus`.
    pub delta: Vec<f64>,
    pub votes: SignReport,
}

/// Received energy `|y|^2` on the `+` and `-` bin of every coordinate.
pub fn measure_energies(received: &OfdmFrame, map: &SubcarrierMap) -> Result<(Vec<f64>, Vec<f64>)> {
    let energy = |bin| {
        received.get(bin).map(|z| z.norm_sqr()).ok_or_else(|| {
            Error::Dimension(format!(
                "{bin:?} outside {}x{} frame",
                received.symbols(),
                received.subcarriers()
            ))
        })
    };
    let mut e_plus = Vec::with_capacity(map.len());
    let mut e_minus = Vec::with_capacity(map.len());
    for &(p, m) in &map.pairs {
        e_plus.push(energy(p)?);
        e_minus.push(energy(m)?);
    }
    Ok((e_plus, e_minus))
}

/// `v_i = sign(e_plus_i - e_minus_i)`, ties to `+1`.
pub fn detect_votes(e_plus: &[f64], e_minus: &[f64]) -> Result<SignReport> {
    if e_plus.len() != e_minus.len() {
        return Err(Error::Dimension(format!(
            "{} plus energies vs {} minus energies",
            e_plus.len(),
            e_minus.len()
        )));
    }
    Ok(SignReport::from_values(
        &e_plus.iter().zip(e_minus).map(|(p, m)| p - m).collect::<Vec<_>>(),
    ))
}

/// Energies and votes for every coordinate of `map`.
pub fn detect(received: &OfdmFrame, map: &SubcarrierMap) -> Result<DetectionResult> {
    let (e_plus, e_minus) = measure_energies(received, map)?;
    let delta: Vec<f64> = e_plus.iter().zip(&e_minus).map(|(p, m)| p - m).collect();
    let votes = SignReport::from_values(&delta);
    Ok(DetectionResult {
        e_plus,
        e_minus,
        delta,
        votes,
    })
}

/// Exact coordinate-wise majority, ties to `+1`.
pub fn ideal_majority_vote(reports: &[SignReport]) -> Result<SignReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::arg("majority vote needs at least one report"))?;
    let q = first.len();
    if let Some(r) = reports.iter().find(|r| r.len() != q) {
        return Err(Error::Dimension(format!(
            "report lengths differ: {} vs {q}",
            r.len()
        )));
    }
    let mut tally = vec![0i64; q];
    for r in reports {
        for (t, s) in tally.iter_mut().zip(r.iter()) {
            *t += s as i64;
        }
    }
    Ok(SignReport::new(tally.iter().map(|&t| sign(t as f64)).collect()).expect("signs are +-1"))
}
