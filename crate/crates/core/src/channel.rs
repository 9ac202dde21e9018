//! Uplink channel: Rayleigh fading, timing-offset phase ramps, AWGN, and the
//! over-the-air sum of all device frames.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::otaphy::OfdmFrame;
use crate::seed::{rng_for, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// Independent coefficient for every (device, symbol, subcarrier).
    #[default]
    PerBin,
    /// One coefficient per device, held over the whole frame.
    PerFrame,
}

impl FromStr for Fading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_bin" => Ok(Fading::PerBin),
            "per_frame" => Ok(Fading::PerFrame),
            other => Err(Error::arg(format!("unknown fading mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Total complex noise variance per bin.
    pub noise_var: f64,
    /// Upper end of the per-device timing offset.
    pub sync_error_max: f64,
    /// FFT length used to turn a timing offset into a phase slope.
    pub fft_size: usize,
    pub fading: Fading,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::arg(format!("noise_var must be >= 0, got {}", self.noise_var)));
        }
        if !(0.0..1.0).contains(&self.sync_error_max) {
            return Err(Error::arg(format!(
                "sync_error_max must lie in [0, 1), got {}",
                self.sync_error_max
            )));
        }
        if self.fft_size == 0 {
            return Err(Error::arg("fft_size must be positive"));
        }
        Ok(())
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            noise_var: 0.0,
            sync_error_max: 0.0,
            fft_size: 64,
            fading: Fading::PerBin,
        }
    }
}

/// Coefficients `H[m][s][l]` for every device and bin, plus each device's
/// timing offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    devices: usize,
    symbols: usize,
    subcarriers: usize,
    coefficients: Vec<Complex64>,
    pub offsets: Vec<f64>,
}

/// `CN(0, 1)`: real and imaginary parts each `N(0, 1/2)`.
pub fn complex_gaussian(rng: &mut SimRng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

impl ChannelRealization {
    /// All coefficients 1, no offsets. For ideal-channel checks.
    pub fn unit(devices: usize, symbols: usize, subcarriers: usize) -> Self {
        ChannelRealization {
            devices,
            symbols,
            subcarriers,
            coefficients: vec![Complex64::new(1.0, 0.0); devices * symbols * subcarriers],
            offsets: vec![0.0; devices],
        }
    }

    pub fn from_coefficients(
        devices: usize,
        symbols: usize,
        subcarriers: usize,
        coefficients: Vec<Complex64>,
    ) -> Result<Self> {
        if coefficients.len() != devices * symbols * subcarriers {
            return Err(Error::Dimension(format!(
                "{} coefficients for {devices}x{symbols}x{subcarriers}",
                coefficients.len()
            )));
        }
        Ok(ChannelRealization {
            devices,
            symbols,
            subcarriers,
            coefficients,
            offsets: vec![0.0; devices],
        })
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn coefficient(&self, device: usize, symbol: usize, subcarrier: usize) -> Complex64 {
        self.coefficients[self.index(device, symbol, subcarrier)]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    fn index(&self, m: usize, s: usize, l: usize) -> usize {
        (m * self.symbols + s) * self.subcarriers + l
    }

    fn device_block(&self, m: usize) -> &[Complex64] {
        let n = self.symbols * self.subcarriers;
        &self.coefficients[m * n..(m + 1) * n]
    }
}

/// Draws i.i.d. `CN(0, 1)` coefficients and uniform offsets on
/// `[0, sync_error_max]`.
pub fn sample_channel(
    devices: usize,
    symbols: usize,
    subcarriers: usize,
    config: &ChannelConfig,
    seed: u64,
) -> Result<ChannelRealization> {
    if devices == 0 || symbols == 0 || subcarriers == 0 {
        return Err(Error::arg("channel dimensions must be positive"));
    }
    let per_device = symbols * subcarriers;
    let mut rng = rng_for(seed, Stream::Fading, &[0]);
    let coefficients = match config.fading {
        Fading::PerBin => (0..devices * per_device)
            .map(|_| complex_gaussian(&mut rng))
            .collect(),
        Fading::PerFrame => (0..devices)
            .flat_map(|_| std::iter::repeat_n(complex_gaussian(&mut rng), per_device))
            .collect(),
    };
    let mut rng = rng_for(seed, Stream::Fading, &[1]);
    let offsets = (0..devices)
        .map(|_| {
            if config.sync_error_max > 0.0 {
                rng.random::<f64>() * config.sync_error_max
            } else {
                0.0
            }
        })
        .collect();
    Ok(ChannelRealization {
        devices,
        symbols,
        subcarriers,
        coefficients,
        offsets,
    })
}

/// Rotates every coefficient by the phase ramp of its device's timing
/// offset: `H' = H * exp(-j 2 pi l delta_m / N)`.
pub fn apply_sync_error(realization: &ChannelRealization, config: &ChannelConfig) -> ChannelRealization {
    let mut out = realization.clone();
    let n = config.fft_size as f64;
    for m in 0..out.devices {
        let delta = out.offsets[m];
        if delta == 0.0 {
            continue;
        }
        for s in 0..out.symbols {
            for l in 0..out.subcarriers {
                let k = out.index(m, s, l);
                let rot = Complex64::from_polar(1.0, -TAU * l as f64 * delta / n);
                out.coefficients[k] *= rot;
            }
        }
    }
    out
}

/// Received grid: `y = sum_m sqrt(P_m) H_m t_m + n` with `n ~ CN(0, noise_var)`.
pub fn superpose(
    frames: &[OfdmFrame],
    powers: &[f64],
    realization: &ChannelRealization,
    config: &ChannelConfig,
    seed: u64,
) -> Result<OfdmFrame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Dimension("no frames to superpose".into()))?;
    if frames.len() != realization.devices || powers.len() != frames.len() {
        return Err(Error::Dimension(format!(
            "{} frames, {} powers, {} channel devices",
            frames.len(),
            powers.len(),
            realization.devices
        )));
    }
    if first.symbols() != realization.symbols || first.subcarriers() != realization.subcarriers {
        return Err(Error::Dimension(format!(
            "frame is {}x{}, channel is {}x{}",
            first.symbols(),
            first.subcarriers(),
            realization.symbols,
            realization.subcarriers
        )));
    }
    if let Some(bad) = frames.iter().find(|f| !f.same_shape(first)) {
        return Err(Error::Dimension(format!(
            "frame shapes differ: {}x{} vs {}x{}",
            bad.symbols(),
            bad.subcarriers(),
            first.symbols(),
            first.subcarriers()
        )));
    }
    let mut out = OfdmFrame::zeros(first.symbols(), first.subcarriers());
    for (m, (frame, &p)) in frames.iter().zip(powers).enumerate() {
        let gain = p.sqrt();
        let h = realization.device_block(m);
        for ((y, &t), &hk) in out.values_mut().iter_mut().zip(frame.values()).zip(h) {
            if t.re != 0.0 || t.im != 0.0 {
                *y += hk * t * gain;
            }
        }
    }
    if config.noise_var > 0.0 {
        let mut rng = rng_for(seed, Stream::Noise, &[]);
        let scale = config.noise_var.sqrt();
        for y in out.values_mut() {
            *y += complex_gaussian(&mut rng) * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otaphy::Bin;

    fn cfg(noise_var: f64, sync: f64) -> ChannelConfig {
        ChannelConfig {
            noise_var,
            sync_error_max: sync,
            fft_size: 64,
            fading: Fading::PerBin,
        }
    }

    #[test]
    fn coefficient_moments() {
        let r = sample_channel(10, 100, 100, &cfg(0.0, 0.0), 17).unwrap();
        let n = r.coefficients().len() as f64;
        let energy: f64 = r.coefficients().iter().map(|h| h.norm_sqr()).sum::<f64>() / n;
        let mean: Complex64 = r.coefficients().iter().sum::<Complex64>() / n;
        assert!((energy - 1.0).abs() < 0.01, "E|H|^2 = {energy}");
        assert!(mean.re.abs() < 0.01 && mean.im.abs() < 0.01, "E[H] = {mean}");
    }

    #[test]
    fn no_sync_error_means_zero_offsets() {
        let r = sample_channel(5, 1, 4, &cfg(0.0, 0.0), 1).unwrap();
        assert!(r.offsets.iter().all(|&d| d == 0.0));
        let r = sample_channel(50, 1, 4, &cfg(0.0, 0.25), 1).unwrap();
        assert!(r.offsets.iter().all(|&d| (0.0..=0.25).contains(&d)));
        assert!(r.offsets.iter().any(|&d| d > 0.0));
    }

    #[test]
    fn per_frame_fading_is_constant_per_device() {
        let c = ChannelConfig {
            fading: Fading::PerFrame,
            ..cfg(0.0, 0.0)
        };
        let r = sample_channel(3, 2, 4, &c, 9).unwrap();
        for m in 0..3 {
            let h = r.coefficient(m, 0, 0);
            assert!((0..2).all(|s| (0..4).all(|l| r.coefficient(m, s, l) == h)));
        }
        assert_ne!(r.coefficient(0, 0, 0), r.coefficient(1, 0, 0));
    }

    #[test]
    fn sync_error_only_rotates() {
        let c = cfg(0.0, 0.5);
        let r = sample_channel(4, 2, 8, &c, 3).unwrap();
        let rot = apply_sync_error(&r, &c);
        for m in 0..4 {
            for s in 0..2 {
                assert_eq!(rot.coefficient(m, s, 0), r.coefficient(m, s, 0));
                for l in 0..8 {
                    let (a, b) = (rot.coefficient(m, s, l), r.coefficient(m, s, l));
                    assert!((a.norm() - b.norm()).abs() < 1e-14);
                }
            }
        }
        let zero = sample_channel(4, 2, 8, &cfg(0.0, 0.0), 3).unwrap();
        assert_eq!(apply_sync_error(&zero, &c), zero);
    }

    #[test]
    fn identity_channel_passes_frame_through() {
        let mut f = OfdmFrame::zeros(1, 4);
        f.set(Bin::new(0, 1), Complex64::new(0.3, -1.1));
        f.set(Bin::new(0, 2), Complex64::new(2.0, 0.5));
        let y = superpose(std::slice::from_ref(&f), &[1.0], &ChannelRealization::unit(1, 1, 4), &cfg(0.0, 0.0), 0)
            .unwrap();
        assert_eq!(y, f);
    }

    #[test]
    fn destructive_interference() {
        let mut f = OfdmFrame::zeros(1, 2);
        f.set(Bin::new(0, 0), Complex64::new(1.0, 0.0));
        let h = ChannelRealization::from_coefficients(
            2,
            1,
            2,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        let y = superpose(&[f.clone(), f], &[1.0, 1.0], &h, &cfg(0.0, 0.0), 0).unwrap();
        assert_eq!(y.get(Bin::new(0, 0)).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn noise_only_energy() {
        let f = OfdmFrame::zeros(100, 1000);
        let h = ChannelRealization::unit(1, 100, 1000);
        let y = superpose(&[f], &[1.0], &h, &cfg(1.0, 0.0), 21).unwrap();
        let e = y.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
        assert!((e - 1.0).abs() < 0.02, "mean |y|^2 = {e}");
    }

    #[test]
    fn superpose_is_additive_without_noise() {
        let c = cfg(0.0, 0.0);
        let r = sample_channel(2, 1, 4, &c, 5).unwrap();
        let mut a = OfdmFrame::zeros(1, 4);
        let mut b = OfdmFrame::zeros(1, 4);
        a.set(Bin::new(0, 0), Complex64::new(1.0, 2.0));
        b.set(Bin::new(0, 3), Complex64::new(-0.5, 0.25));
        let z = OfdmFrame::zeros(1, 4);
        let both = superpose(&[a.clone(), b.clone()], &[2.0, 3.0], &r, &c, 0).unwrap();
        let only_a = superpose(&[a, z.clone()], &[2.0, 3.0], &r, &c, 0).unwrap();
        let only_b = superpose(&[z, b], &[2.0, 3.0], &r, &c, 0).unwrap();
        for ((x, y), s) in only_a.values().iter().zip(only_b.values()).zip(both.values()) {
            assert!((x + y - s).norm() < 1e-14);
        }
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let r = ChannelRealization::unit(2, 1, 4);
        let f = OfdmFrame::zeros(1, 4);
        let err = superpose(std::slice::from_ref(&f), &[1.0], &r, &cfg(0.0, 0.0), 0).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        let g = OfdmFrame::zeros(2, 4);
        let err = superpose(&[f, g], &[1.0, 1.0], &r, &cfg(0.0, 0.0), 0).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(-1.0, 0.0).validate().is_err());
        assert!(cfg(0.0, 1.0).validate().is_err());
        assert!(cfg(0.5, 0.25).validate().is_ok());
    }
}
