//! The full uplink: encode every device's signs, push them through the
//! channel frame by frame, and detect the vote at the server.

use crate::channel::{apply_sync_error, sample_channel, superpose, ChannelConfig, ChannelRealization};
use crate::detector::detect;
use crate::error::{Error, Result};
use crate::learner::SignReport;
use crate::otaphy::{encode_signs, FrameLayout, Randomization};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct AirInterface {
    pub layout: FrameLayout,
    pub channel: ChannelConfig,
    pub randomization: Randomization,
    /// Replace fading with `H = 1` everywhere (test hook).
    pub unit_channel: bool,
}

/// Detected vote plus the per-coordinate energy difference.
#[derive(Debug, Clone, PartialEq)]
pub struct AirVote {
    pub votes: SignReport,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
}

impl AirInterface {
    pub fn new(q: usize, subcarriers: usize, symbols: usize, channel: ChannelConfig) -> Result<Self> {
        channel.validate()?;
        Ok(AirInterface {
            layout: FrameLayout::new(q, subcarriers, symbols)?,
            channel,
            randomization: Randomization::UnitCircle,
            unit_channel: false,
        })
    }

    pub fn num_coordinates(&self) -> usize {
        self.layout.frames.last().map_or(0, |(r, _)| r.end)
    }

    /// One uplink use. Every frame gets its own channel draw; all randomness
    /// is derived from `seed`.
    pub fn transmit(&self, reports: &[SignReport], powers: &[f64], seed: u64) -> Result<AirVote> {
        let q = self.num_coordinates();
        if reports.is_empty() || reports.len() != powers.len() {
            return Err(Error::Dimension(format!(
                "{} reports and {} powers",
                reports.len(),
                powers.len()
            )));
        }
        if let Some(r) = reports.iter().find(|r| r.len() != q) {
            return Err(Error::Dimension(format!(
                "report of length {} on a {q}-coordinate interface",
                r.len()
            )));
        }
        let devices = reports.len();
        let mut e_plus = Vec::with_capacity(q);
        let mut e_minus = Vec::with_capacity(q);
        for (f, (range, map)) in self.layout.frames.iter().enumerate() {
            let frame_seed = derive_seed(seed, &[f as u64]);
            let frames = reports
                .iter()
                .enumerate()
                .map(|(m, r)| {
                    let chunk = SignReport::new(r.as_slice()[range.clone()].to_vec())?;
                    encode_signs(&chunk, map, derive_seed(frame_seed, &[m as u64]), self.randomization)
                })
                .collect::<Result<Vec<_>>>()?;
            let realization = if self.unit_channel {
                ChannelRealization::unit(devices, map.symbols, map.subcarriers)
            } else {
                let h = sample_channel(devices, map.symbols, map.subcarriers, &self.channel, frame_seed)?;
                apply_sync_error(&h, &self.channel)
            };
            let received = superpose(&frames, powers, &realization, &self.channel, frame_seed)?;
            let d = detect(&received, map)?;
            e_plus.extend(d.e_plus);
            e_minus.extend(d.e_minus);
        }
        let votes = crate::detector::detect_votes(&e_plus, &e_minus)?;
        Ok(AirVote {
            votes,
            e_plus,
            e_minus,
        })
    }
}
