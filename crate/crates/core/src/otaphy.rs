//! Transmitter side: sign votes mapped onto pairs of OFDM bins, the unit
//! circle randomization symbol, and dynamic per-device power control.

use std::f64::consts::TAU;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::learner::SignReport;
use crate::seed::{rng_for, Stream};

/// Symbol energy normalization factor.
pub const E0: f64 = 2.0;

/// One resource element: OFDM symbol `symbol`, subcarrier `subcarrier`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bin {
    pub symbol: usize,
    pub subcarrier: usize,
}

impl Bin {
    pub const fn new(symbol: usize, subcarrier: usize) -> Self {
        Bin { symbol, subcarrier }
    }
}

/// Coordinate `i` votes `+1` on `pairs[i].0` and `-1` on `pairs[i].1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierMap {
    pub pairs: Vec<(Bin, Bin)>,
    pub subcarriers: usize,
    pub symbols: usize,
}

impl SubcarrierMap {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn bins(&self) -> impl Iterator<Item = Bin> + '_ {
        self.pairs.iter().flat_map(|&(p, m)| [p, m])
    }
}

/// FSK layout: coordinate `j` (zero-based) sits on subcarriers `2k, 2k+1` of
/// symbol `s`, with `s = j / (A/2)` and `k = j mod (A/2)`.
pub fn build_subcarrier_map(q: usize, subcarriers: usize, symbols: usize) -> Result<SubcarrierMap> {
    if subcarriers == 0 || !subcarriers.is_multiple_of(2) {
        return Err(Error::arg(format!(
            "subcarrier count must be positive and even, got {subcarriers}"
        )));
    }
    if symbols == 0 {
        return Err(Error::arg("symbol count must be positive"));
    }
    let available = subcarriers * symbols;
    if 2 * q > available {
        return Err(Error::Capacity {
            required: 2 * q,
            available,
        });
    }
    let per_symbol = subcarriers / 2;
    let pairs = (0..q)
        .map(|j| {
            let s = j / per_symbol;
            let k = j % per_symbol;
            (Bin::new(s, 2 * k), Bin::new(s, 2 * k + 1))
        })
        .collect();
    Ok(SubcarrierMap {
        pairs,
        subcarriers,
        symbols,
    })
}

/// How a `q`-coordinate vote is spread over as many frames as it needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    pub frames: Vec<(Range<usize>, SubcarrierMap)>,
}

impl FrameLayout {
    pub fn new(q: usize, subcarriers: usize, symbols: usize) -> Result<Self> {
        let per_frame = subcarriers * symbols / 2;
        if per_frame == 0 {
            return Err(Error::arg("a frame must hold at least one coordinate"));
        }
        let mut frames = Vec::new();
        let mut start = 0;
        while start < q {
            let end = (start + per_frame).min(q);
            frames.push((start..end, build_subcarrier_map(end - start, subcarriers, symbols)?));
            start = end;
        }
        Ok(FrameLayout { frames })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Frequency-domain grid, `symbols x subcarriers`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    symbols: usize,
    subcarriers: usize,
    data: Vec<Complex64>,
}

impl OfdmFrame {
    pub fn zeros(symbols: usize, subcarriers: usize) -> Self {
        OfdmFrame {
            symbols,
            subcarriers,
            data: vec![Complex64::new(0.0, 0.0); symbols * subcarriers],
        }
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn same_shape(&self, other: &OfdmFrame) -> bool {
        self.symbols == other.symbols && self.subcarriers == other.subcarriers
    }

    pub fn get(&self, bin: Bin) -> Option<Complex64> {
        self.offset(bin).map(|k| self.data[k])
    }

    pub fn set(&mut self, bin: Bin, value: Complex64) {
        let k = self
            .offset(bin)
            .unwrap_or_else(|| panic!("{bin:?} outside {}x{} frame", self.symbols, self.subcarriers));
        self.data[k] = value;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    fn offset(&self, bin: Bin) -> Option<usize> {
        (bin.symbol < self.symbols && bin.subcarrier < self.subcarriers)
            .then(|| bin.symbol * self.subcarriers + bin.subcarrier)
    }
}

/// Source of the per-coordinate symbol `s_{m,i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Randomization {
    /// Uniform phase on the unit circle.
    #[default]
    UnitCircle,
    /// `s = 1`. Test hook for comparing the air interface against the exact
    /// majority vote; never used on production paths.
    Pinned,
}

/// Places `sqrt(E0) * s_i` on the `+` bin of coordinate `i` if the vote is
/// `+1`, otherwise on its `-` bin. The transmit power is applied later, in
/// [`crate::channel::superpose`].
pub fn encode_signs(
    report: &SignReport,
    map: &SubcarrierMap,
    seed: u64,
    randomization: Randomization,
) -> Result<OfdmFrame> {
    if report.len() != map.len() {
        return Err(Error::Dimension(format!(
            "report has {} coordinates, map has {}",
            report.len(),
            map.len()
        )));
    }
    let mut frame = OfdmFrame::zeros(map.symbols, map.subcarriers);
    let mut rng = rng_for(seed, Stream::Phase, &[]);
    let amp = E0.sqrt();
    for (v, &(plus, minus)) in report.iter().zip(&map.pairs) {
        let s = match randomization {
            Randomization::UnitCircle => Complex64::from_polar(1.0, rng.random::<f64>() * TAU),
            Randomization::Pinned => Complex64::new(1.0, 0.0),
        };
        frame.set(if v > 0 { plus } else { minus }, s * amp);
    }
    Ok(frame)
}

/// Per-device transmit power multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerState {
    pub powers: Vec<f64>,
    pub round: u64,
}

impl PowerState {
    /// Every device starts at unit power.
    pub fn new(devices: usize) -> Self {
        PowerState {
            powers: vec![1.0; devices],
            round: 0,
        }
    }
}

/// `(agree - disagree) / q` between a device's report and the vote, before
/// the absolute value of the power rule is taken.
pub fn agreement_statistic(report: &SignReport, vote: &SignReport) -> f64 {
    let agree = report.agreements(vote) as f64;
    let q = vote.len() as f64;
    (2.0 * agree - q) / q
}

/// One power-control step: `P_m += |(agree_m - disagree_m) / q|`, optionally
/// clipped at `cap`.
pub fn update_power(
    state: &PowerState,
    reports: &[SignReport],
    vote: &SignReport,
    cap: Option<f64>,
) -> Result<PowerState> {
    if reports.len() != state.powers.len() {
        return Err(Error::Dimension(format!(
            "{} reports for {} devices",
            reports.len(),
            state.powers.len()
        )));
    }
    if vote.is_empty() {
        return Err(Error::arg("empty vote"));
    }
    if let Some(r) = reports.iter().find(|r| r.len() != vote.len()) {
        return Err(Error::Dimension(format!(
            "report of length {} against vote of length {}",
            r.len(),
            vote.len()
        )));
    }
    let powers = state
        .powers
        .iter()
        .zip(reports)
        .map(|(&p, r)| {
            let next = p + agreement_statistic(r, vote).abs();
            match cap {
                Some(c) => next.min(c.max(p)),
                None => next,
            }
        })
        .collect();
    Ok(PowerState {
        powers,
        round: state.round + 1,
    })
}

/// Average transmit power over devices.
pub fn mean_power(state: &PowerState) -> Result<f64> {
    if state.powers.is_empty() {
        return Err(Error::arg("power state has no devices"));
    }
    Ok(state.powers.iter().sum::<f64>() / state.powers.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn report(v: &[i8]) -> SignReport {
        SignReport::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_coordinate_map() {
        let map = build_subcarrier_map(2, 4, 1).unwrap();
        assert_eq!(
            map.pairs,
            vec![
                (Bin::new(0, 0), Bin::new(0, 1)),
                (Bin::new(0, 2), Bin::new(0, 3))
            ]
        );
    }

    #[test]
    fn capacity_error_reports_counts() {
        match build_subcarrier_map(3, 4, 1) {
            Err(Error::Capacity {
                required,
                available,
            }) => assert_eq!((required, available), (6, 4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn odd_subcarrier_count_rejected() {
        assert!(build_subcarrier_map(1, 3, 1).is_err());
    }

    #[test]
    fn layout_splits_into_frames() {
        let layout = FrameLayout::new(330, 64, 3).unwrap();
        assert_eq!(layout.num_frames(), 4);
        assert_eq!(layout.frames[3].0, 288..330);
        assert_eq!(layout.frames[3].1.len(), 42);
    }

    #[test]
    fn encode_plus_and_minus() {
        let map = build_subcarrier_map(1, 2, 1).unwrap();
        let f = encode_signs(&report(&[1]), &map, 5, Randomization::UnitCircle).unwrap();
        assert!((f.get(Bin::new(0, 0)).unwrap().norm() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.get(Bin::new(0, 1)).unwrap(), Complex64::new(0.0, 0.0));

        let f = encode_signs(&report(&[-1]), &map, 5, Randomization::UnitCircle).unwrap();
        assert_eq!(f.get(Bin::new(0, 0)).unwrap(), Complex64::new(0.0, 0.0));
        assert!((f.get(Bin::new(0, 1)).unwrap().norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pinned_randomization_is_real() {
        let map = build_subcarrier_map(1, 2, 1).unwrap();
        let f = encode_signs(&report(&[1]), &map, 0, Randomization::Pinned).unwrap();
        assert_eq!(f.get(Bin::new(0, 0)).unwrap(), Complex64::new(2f64.sqrt(), 0.0));
    }

    #[test]
    fn power_update_examples() {
        let vote = report(&[1, 1, 1, 1]);
        let s = PowerState::new(3);
        let reports = [
            report(&[1, 1, 1, -1]),
            report(&[1, 1, -1, -1]),
            report(&[-1, -1, -1, -1]),
        ];
        let next = update_power(&s, &reports, &vote, None).unwrap();
        assert_eq!(next.powers, vec![1.5, 1.0, 2.0]);
        assert_eq!(next.round, 1);
    }

    #[test]
    fn power_cap_clips() {
        let vote = report(&[1, 1]);
        let s = PowerState {
            powers: vec![1.8, 3.0],
            round: 0,
        };
        let next = update_power(&s, &[vote.clone(), vote.clone()], &vote, Some(2.0)).unwrap();
        assert_eq!(next.powers, vec![2.0, 3.0]);
    }

    #[test]
    fn mean_power_examples() {
        assert_eq!(mean_power(&PowerState::new(3)).unwrap(), 1.0);
        let s = PowerState {
            powers: vec![1.0, 2.0],
            round: 0,
        };
        assert_eq!(mean_power(&s).unwrap(), 1.5);
        assert!(mean_power(&PowerState::new(0)).is_err());
    }

    fn sign_vec(len: usize) -> impl Strategy<Value = Vec<i8>> {
        prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], len)
    }

    proptest! {
        #[test]
        fn map_is_bijective(q in 1usize..200, half in 1usize..40, extra in 0usize..3) {
            let subcarriers = 2 * half;
            let symbols = (2 * q).div_ceil(subcarriers) + extra;
            let map = build_subcarrier_map(q, subcarriers, symbols).unwrap();
            let bins: HashSet<Bin> = map.bins().collect();
            prop_assert_eq!(bins.len(), 2 * q);
            for &(p, m) in &map.pairs {
                prop_assert_eq!(p.symbol, m.symbol);
                prop_assert_eq!(m.subcarrier, p.subcarrier + 1);
                prop_assert!(p.symbol < symbols && m.subcarrier < subcarriers);
            }
        }

        #[test]
        fn exactly_one_active_bin(signs in sign_vec(37), seed in any::<u64>()) {
            let map = build_subcarrier_map(37, 16, 5).unwrap();
            let f = encode_signs(&report(&signs), &map, seed, Randomization::UnitCircle).unwrap();
            for &(p, m) in &map.pairs {
                let (a, b) = (f.get(p).unwrap(), f.get(m).unwrap());
                prop_assert!((a.norm() == 0.0) != (b.norm() == 0.0));
                prop_assert!((a.norm_sqr() + b.norm_sqr() - E0).abs() < 1e-12);
            }
            let nonzero = f.values().iter().filter(|z| z.norm() > 0.0).count();
            prop_assert_eq!(nonzero, 37);
        }

        #[test]
        fn power_is_monotone_and_symmetric(
            reports in prop::collection::vec(sign_vec(12), 1..8),
            vote in sign_vec(12),
        ) {
            let reports: Vec<SignReport> = reports.iter().map(|r| report(r)).collect();
            let vote = report(&vote);
            let s = PowerState::new(reports.len());
            let a = update_power(&s, &reports, &vote, None).unwrap();
            let negated: Vec<SignReport> = reports.iter().map(SignReport::negated).collect();
            let b = update_power(&s, &negated, &vote.negated(), None).unwrap();
            prop_assert_eq!(&a, &b);
            for (&p0, &p1) in s.powers.iter().zip(&a.powers) {
                prop_assert!(p1 - p0 >= 0.0 && p1 - p0 <= 1.0);
            }
        }
    }
}
