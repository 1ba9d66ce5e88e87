//! Seeded speech-like test signals.
//!
//! A harmonic source at a fixed F0 is shaped by three slowly moving
//! formant resonances and a syllabic amplitude envelope. The Lombard style
//! raises F0 and lifts the spectrum above 1 kHz. Each signal also carries a
//! mouth-opening track (one value per 40 ms video frame) that follows the
//! syllabic envelope, so synthetic video and landmarks stay consistent with
//! the audio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{Waveform, DEFAULT_SAMPLE_RATE};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeakingStyle {
    Lombard,
    NonLombard,
}

impl SpeakingStyle {
    pub fn short(self) -> &'static str {
        match self {
            SpeakingStyle::Lombard => "L",
            SpeakingStyle::NonLombard => "NL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LombardShift {
    pub f0_offset_hz: f64,
    /// Spectral lift reached at 2 kHz and above (0 dB at 1 kHz and below).
    pub tilt_db: f64,
    /// Extra mouth opening, as a fraction of the plain opening.
    pub aperture_gain: f64,
}

impl Default for LombardShift {
    fn default() -> Self {
        Self { f0_offset_hz: 40.0, tilt_db: 6.0, aperture_gain: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub duration_s: f64,
    pub f0_hz: f64,
    pub style: SpeakingStyle,
    pub lombard: LombardShift,
    pub sample_rate: u32,
}

impl SynthParams {
    pub fn new(seed: u64, duration_s: f64, f0_hz: f64, style: SpeakingStyle) -> Self {
        Self { seed, duration_s, f0_hz, style, lombard: LombardShift::default(), sample_rate: DEFAULT_SAMPLE_RATE }
    }
}

#[derive(Debug, Clone)]
pub struct SynthUtterance<T = f64> {
    pub waveform: Waveform<T>,
    /// Mouth opening in [0, 1+aperture_gain] per 40 ms frame.
    pub mouth_opening: Vec<f64>,
}

struct Syllable {
    start: f64,
    end: f64,
    level: f64,
    formants: [f64; 3],
}

const BANDWIDTHS: [f64; 3] = [90.0, 120.0, 180.0];
const BLOCK: usize = 80;
const VIDEO_FRAME_S: f64 = 0.04;

fn plan_syllables(rng: &mut ChaCha8Rng, duration: f64) -> Vec<Syllable> {
    let mut t = rng.random_range(0.02..0.08);
    let mut out = Vec::new();
    while t < duration {
        let len = rng.random_range(0.14..0.30);
        out.push(Syllable {
            start: t,
            end: (t + len).min(duration),
            level: rng.random_range(0.5..1.0),
            formants: [rng.random_range(300.0..850.0), rng.random_range(900.0..2300.0), rng.random_range(2400.0..3300.0)],
        });
        t += len + rng.random_range(0.04..0.14);
    }
    out
}

/// Raised-cosine syllabic envelope and interpolated formants at time `t`.
fn articulation(syl: &[Syllable], t: f64) -> (f64, [f64; 3]) {
    let mut env = 0.0;
    let mut formants = syl.first().map(|s| s.formants).unwrap_or([500.0, 1500.0, 2500.0]);
    for (i, s) in syl.iter().enumerate() {
        if t >= s.start && t < s.end {
            let x = (t - s.start) / (s.end - s.start);
            env = s.level * (std::f64::consts::PI * x).sin().powf(0.7);
            let next = syl.get(i + 1).map(|n| n.formants).unwrap_or(s.formants);
            for k in 0..3 {
                formants[k] = s.formants[k] + (next[k] - s.formants[k]) * x * 0.5;
            }
            break;
        }
        if t >= s.end {
            formants = s.formants;
        }
    }
    (env, formants)
}

fn spectral_weight(f: f64, formants: &[f64; 3], lift_db: f64) -> f64 {
    let resonance: f64 = formants
        .iter()
        .zip(BANDWIDTHS)
        .map(|(&fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)).sqrt())
        .sum();
    // -6 dB per octave source tilt above 300 Hz.
    let tilt = 300.0 / f.max(300.0);
    let lift = if f <= 1000.0 { 0.0 } else { lift_db * (f / 1000.0).log2().min(1.0) };
    (0.05 + resonance) * tilt * 10f64.powf(lift / 20.0)
}

pub fn synth_utterance<T: Real>(p: &SynthParams) -> Result<SynthUtterance<T>> {
    if !(50.0..=500.0).contains(&p.f0_hz) {
        return Err(Error::InvalidArgument(format!("F0 {} Hz outside [50, 500]", p.f0_hz)));
    }
    if !(p.duration_s > 0.0) || p.sample_rate == 0 {
        return Err(Error::InvalidArgument("duration and sample rate must be positive".into()));
    }
    let fs = p.sample_rate as f64;
    let n = (p.duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let syllables = plan_syllables(&mut rng, p.duration_s);
    let noise_seed: u64 = rng.random();
    let phase0: f64 = rng.random_range(0.0..std::f64::consts::TAU);

    let (f0, lift_db, aperture_scale) = match p.style {
        SpeakingStyle::NonLombard => (p.f0_hz, 0.0, 1.0),
        SpeakingStyle::Lombard => (p.f0_hz + p.lombard.f0_offset_hz, p.lombard.tilt_db, 1.0 + p.lombard.aperture_gain),
    };
    let harmonics = ((0.47 * fs) / f0).floor() as usize;
    let omega = std::f64::consts::TAU * f0 / fs;

    let mut out = vec![0.0f64; n];
    let mut amps = vec![0.0f64; harmonics];
    let mut next_amps = vec![0.0f64; harmonics];
    let weights_at = |t: f64, buf: &mut [f64]| {
        let (env, formants) = articulation(&syllables, t);
        for (h, a) in buf.iter_mut().enumerate() {
            *a = env * spectral_weight((h + 1) as f64 * f0, &formants, lift_db);
        }
    };
    weights_at(0.0, &mut amps);
    for b0 in (0..n).step_by(BLOCK) {
        let b1 = (b0 + BLOCK).min(n);
        weights_at(b1 as f64 / fs, &mut next_amps);
        for (i, o) in out[b0..b1].iter_mut().enumerate() {
            let frac = i as f64 / BLOCK as f64;
            let theta = omega * (b0 + i) as f64 + phase0;
            let mut acc = 0.0;
            for h in 0..harmonics {
                let a = amps[h] + (next_amps[h] - amps[h]) * frac;
                acc += a * ((h + 1) as f64 * theta).sin();
            }
            *o = acc;
        }
        std::mem::swap(&mut amps, &mut next_amps);
    }

    // Low breath-noise floor keeps the signal free of digital silence.
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let floor = 1e-3 * peak;
    let samples: Vec<T> = out
        .iter()
        .map(|&v| T::lit(0.5 * (v + floor * noise_rng.random_range(-1.0..1.0)) / peak))
        .collect();

    let frames = (p.duration_s / VIDEO_FRAME_S).ceil() as usize;
    let mouth_opening = (0..frames)
        .map(|v| {
            let t = (v as f64 + 0.5) * VIDEO_FRAME_S;
            aperture_scale * articulation(&syllables, t).0
        })
        .collect();
    Ok(SynthUtterance { waveform: Waveform::new(samples, p.sample_rate)?, mouth_opening })
}

pub fn synth_speechlike<T: Real>(p: &SynthParams) -> Result<Waveform<T>> {
    Ok(synth_utterance(p)?.waveform)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let p = SynthParams::new(4, 1.0, 180.0, SpeakingStyle::NonLombard);
        let a: Waveform<f64> = synth_speechlike(&p).unwrap();
        let b: Waveform<f64> = synth_speechlike(&p).unwrap();
        assert_eq!(a, b);
        let c: Waveform<f64> = synth_speechlike(&SynthParams { seed: 5, ..p }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn f0_range_checked() {
        assert!(synth_speechlike::<f64>(&SynthParams::new(0, 1.0, 40.0, SpeakingStyle::Lombard)).is_err());
        assert!(synth_speechlike::<f64>(&SynthParams::new(0, 1.0, 501.0, SpeakingStyle::Lombard)).is_err());
    }

    #[test]
    fn lombard_lifts_high_frequencies() {
        let p = SynthParams::new(1, 2.0, 150.0, SpeakingStyle::NonLombard);
        assert!(spectral_weight(3000.0, &[500.0, 1500.0, 2500.0], 6.0) / spectral_weight(3000.0, &[500.0, 1500.0, 2500.0], 0.0) > 1.99);
        let nl: SynthUtterance<f64> = synth_utterance(&p).unwrap();
        let l: SynthUtterance<f64> = synth_utterance(&SynthParams { style: SpeakingStyle::Lombard, ..p }).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&l.mouth_opening) > mean(&nl.mouth_opening));
        assert_eq!(l.mouth_opening.len(), 50);
    }
}
