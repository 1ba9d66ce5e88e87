use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SpeakingStyle;
use crate::dsp::Waveform;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Ssn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub snr_db: f64,
    pub seed: u64,
    pub noise_kind: NoiseKind,
    pub speaking_style: SpeakingStyle,
}

/// The two SNR grids used for training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrGrid {
    /// -20 dB to 5 dB in 5 dB steps.
    Narrow,
    /// The narrow grid plus 10 dB to 30 dB in 5 dB steps.
    Wide,
}

impl SnrGrid {
    pub const NARROW: [f64; 6] = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0];
    pub const HIGH: [f64; 5] = [10.0, 15.0, 20.0, 25.0, 30.0];

    pub fn values(self) -> Vec<f64> {
        match self {
            SnrGrid::Narrow => Self::NARROW.to_vec(),
            SnrGrid::Wide => Self::NARROW.iter().chain(Self::HIGH.iter()).copied().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mixture<T = f64> {
    pub noisy: Waveform<T>,
    /// The scaled noise excerpt actually added, `noisy = clean + noise`.
    pub noise: Waveform<T>,
    pub noise_offset: usize,
    pub noise_gain: T,
}

/// Measured SNR in dB from full-signal mean powers.
pub fn measured_snr_db<T: Real>(clean: &Waveform<T>, noise: &Waveform<T>) -> f64 {
    10.0 * (clean.power().to_f64_() / noise.power().to_f64_()).log10()
}

/// Adds a seeded random excerpt of `noise`, scaled to reach `snr_db`.
pub fn mix_at_snr<T: Real>(clean: &Waveform<T>, noise: &Waveform<T>, snr_db: f64, seed: u64) -> Result<Mixture<T>> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument("SNR must be finite".into()));
    }
    if noise.len() < clean.len() {
        return Err(Error::TooShort { needed: clean.len(), got: noise.len() });
    }
    if clean.sample_rate() != noise.sample_rate() {
        return Err(Error::InvalidArgument("clean and noise sample rates differ".into()));
    }
    let slack = noise.len() - clean.len();
    let offset = if slack == 0 { 0 } else { ChaCha8Rng::seed_from_u64(seed).random_range(0..=slack) };
    let excerpt = noise.slice(offset, clean.len())?;
    let (pc, pn) = (clean.power(), excerpt.power());
    if pc <= T::zero() || pn <= T::zero() {
        return Err(Error::Degenerate("zero-power clean or noise signal".into()));
    }
    let gain = (pc / (pn * T::lit(10f64.powf(snr_db / 10.0)))).sqrt();
    let scaled = excerpt.scaled(gain);
    let noisy: Vec<T> = clean.samples().iter().zip(scaled.samples()).map(|(&x, &d)| x + d).collect();
    Ok(Mixture { noisy: Waveform::new(noisy, clean.sample_rate())?, noise: scaled, noise_offset: offset, noise_gain: gain })
}
