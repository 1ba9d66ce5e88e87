//! K-weighted, gated integrated loudness and two-pass normalisation.

use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::{Error, Real, Result};

const BLOCK_S: f64 = 0.4;
const BLOCK_OVERLAP: f64 = 0.75;
const ABSOLUTE_GATE_LUFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;
const LOUDNESS_OFFSET: f64 = -0.691;

/// Second-order section with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// The two-stage K-weighting pre-filter, designed for an arbitrary rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KWeighting {
    pub shelf: Biquad,
    pub high_pass: Biquad,
}

impl KWeighting {
    pub fn new(sample_rate: u32) -> Self {
        let fs = sample_rate as f64;
        let pi = std::f64::consts::PI;

        // High-shelf stage.
        let gain_db = 3.999_843_853_973_347;
        let q = 0.707_175_236_955_419_3;
        let fc = 1_681.974_450_955_531_9;
        let k = (pi * fc / fs).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_154_541_6);
        let a0 = 1.0 + k / q + k * k;
        let shelf = Biquad {
            b: [(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0],
            a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
        };

        // RLB high-pass stage.
        let q = 0.500_327_037_325_395_3;
        let fc = 38.135_470_876_139_82;
        let k = (pi * fc / fs).tan();
        let a0 = 1.0 + k / q + k * k;
        let high_pass = Biquad {
            b: [1.0, -2.0, 1.0],
            a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
        };
        Self { shelf, high_pass }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.high_pass.run(&self.shelf.run(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "lufs", rename_all = "snake_case")]
pub enum Loudness {
    Measured(f64),
    Unmeasurable,
}

impl Loudness {
    pub fn lufs(self) -> Option<f64> {
        match self {
            Loudness::Measured(v) => Some(v),
            Loudness::Unmeasurable => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessReport {
    pub integrated: Loudness,
    pub gain_applied_db: f64,
}

/// Integrated loudness of a mono signal (unity channel weight).
pub fn integrated_loudness<T: Real>(w: &Waveform<T>) -> Result<LoudnessReport> {
    let fs = w.sample_rate() as f64;
    let block = (BLOCK_S * fs).round() as usize;
    let step = ((1.0 - BLOCK_OVERLAP) * BLOCK_S * fs).round() as usize;
    if w.len() < block {
        return Err(Error::TooShort { needed: block, got: w.len() });
    }
    let x: Vec<f64> = w.samples().iter().map(|s| s.to_f64_()).collect();
    let y = KWeighting::new(w.sample_rate()).apply(&x);

    let blocks = (y.len() - block) / step + 1;
    let powers: Vec<f64> = (0..blocks)
        .map(|j| y[j * step..j * step + block].iter().map(|v| v * v).sum::<f64>() / block as f64)
        .collect();
    let block_lufs = |z: f64| LOUDNESS_OFFSET + 10.0 * z.log10();

    let above_abs: Vec<f64> = powers.iter().copied().filter(|&z| z > 0.0 && block_lufs(z) > ABSOLUTE_GATE_LUFS).collect();
    if above_abs.is_empty() {
        return Ok(LoudnessReport { integrated: Loudness::Unmeasurable, gain_applied_db: 0.0 });
    }
    let relative_gate = block_lufs(mean(&above_abs)) + RELATIVE_GATE_LU;
    let gated: Vec<f64> = above_abs.into_iter().filter(|&z| block_lufs(z) > relative_gate).collect();
    if gated.is_empty() {
        return Ok(LoudnessReport { integrated: Loudness::Unmeasurable, gain_applied_db: 0.0 });
    }
    Ok(LoudnessReport { integrated: Loudness::Measured(block_lufs(mean(&gated))), gain_applied_db: 0.0 })
}

/// Measures, applies one linear gain towards `target_lufs`, then re-measures.
pub fn loudness_normalize<T: Real>(w: &Waveform<T>, target_lufs: f64) -> Result<(Waveform<T>, LoudnessReport)> {
    let measured = integrated_loudness(w)?.integrated.lufs().ok_or(Error::Unmeasurable)?;
    let gain_db = target_lufs - measured;
    let out = w.scaled(T::lit(10f64.powf(gain_db / 20.0)));
    let after = integrated_loudness(&out)?;
    Ok((out, LoudnessReport { integrated: after.integrated, gain_applied_db: gain_db }))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex;

    fn response(b: &Biquad, omega: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (b.b[0] + z1 * b.b[1] + z2 * b.b[2]) / (1.0 + z1 * b.a[0] + z2 * b.a[1])
    }

    fn tone(freq: f64, amp: f64, secs: f64) -> Waveform<f64> {
        let n = (secs * 16_000.0) as usize;
        Waveform::from_samples(
            (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn silence_is_unmeasurable() {
        let r = integrated_loudness(&Waveform::<f64>::zeros(16_000, 16_000)).unwrap();
        assert_eq!(r.integrated, Loudness::Unmeasurable);
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(integrated_loudness(&Waveform::<f64>::zeros(6000, 16_000)).is_err());
    }

    #[test]
    fn stationary_tone_matches_hand_evaluation() {
        // Every block has the same K-weighted power 0.5*|H(f)|^2, so both
        // gates keep all blocks and the result is -0.691 + 10 log10(that power).
        let f = 1000.0;
        let k = KWeighting::new(16_000);
        let omega = 2.0 * std::f64::consts::PI * f / 16_000.0;
        let h = (response(&k.shelf, omega) * response(&k.high_pass, omega)).norm();
        let expected = -0.691 + 10.0 * (0.5 * h * h).log10();
        let got = integrated_loudness(&tone(f, 1.0, 4.0)).unwrap().integrated.lufs().unwrap();
        assert!((got - expected).abs() < 0.02, "{got} vs {expected}");
    }

    #[test]
    fn plus_six_db_raises_loudness_by_six_lu() {
        let w = tone(440.0, 0.1, 3.0);
        let a = integrated_loudness(&w).unwrap().integrated.lufs().unwrap();
        let b = integrated_loudness(&w.scaled(10f64.powf(6.02 / 20.0))).unwrap().integrated.lufs().unwrap();
        assert!((b - a - 6.02).abs() < 0.1);
    }

    #[test]
    fn normalise_at_target_applies_no_gain() {
        let w = tone(500.0, 0.2, 3.0);
        let now = integrated_loudness(&w).unwrap().integrated.lufs().unwrap();
        let (_, r) = loudness_normalize(&w, now).unwrap();
        assert!(r.gain_applied_db.abs() < 1e-9);
    }

    #[test]
    fn ten_lu_below_target_gets_ten_db() {
        let w = tone(500.0, 0.2, 3.0);
        let now = integrated_loudness(&w).unwrap().integrated.lufs().unwrap();
        let (out, r) = loudness_normalize(&w, now + 10.0).unwrap();
        assert!((r.gain_applied_db - 10.0).abs() < 1e-9);
        assert!((r.integrated.lufs().unwrap() - (now + 10.0)).abs() < 0.5);
        assert!((out.peak() / w.peak() - 10f64.powf(0.5)).abs() < 1e-9);
    }

    #[test]
    fn unmeasurable_input_cannot_be_normalised() {
        assert!(matches!(
            loudness_normalize(&Waveform::<f64>::zeros(16_000, 16_000), -23.0),
            Err(Error::Unmeasurable)
        ));
    }
}
