//! Extended short-time objective intelligibility.
//!
//! Both signals are resampled to 10 kHz, frames more than 40 dB below the
//! loudest clean frame are dropped from both, and 15 one-third-octave band
//! envelopes (lowest centre 150 Hz) are taken from a 256-sample Hann STFT
//! with 50% overlap and a 512-point DFT. Over every run of 30 consecutive
//! frames (384 ms) the band-by-time matrices are normalised to zero mean and
//! unit norm, first along time per band and then across bands per frame;
//! the score is the mean inner product of the normalised columns.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::resample;
use crate::dsp::Waveform;
use crate::{Error, Real, Result};

pub const ESTOI_SAMPLE_RATE: u32 = 10_000;
/// Frames per intermediate-intelligibility segment.
pub const ESTOI_MIN_FRAMES: usize = 30;

const FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_CENTRE_HZ: f64 = 150.0;
const DYN_RANGE_DB: f64 = 40.0;

fn hann() -> Vec<f64> {
    // Symmetric Hann of length FRAME + 2 without its zero end points.
    (1..=FRAME).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (FRAME + 1) as f64).cos()).collect()
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

fn remove_silent_frames(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let energy: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = x[s..s + FRAME].iter().zip(w).map(|(v, wn)| (v * wn).powi(2)).sum();
            20.0 * (e.sqrt() + f64::EPSILON).log10()
        })
        .collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts.iter().zip(&energy).filter(|(_, &e)| e > max - DYN_RANGE_DB).map(|(&s, _)| s).collect();
    let ola = |sig: &[f64]| {
        if kept.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0.0; (kept.len() - 1) * HOP + FRAME];
        for (i, &s) in kept.iter().enumerate() {
            for k in 0..FRAME {
                out[i * HOP + k] += sig[s + k] * w[k];
            }
        }
        out
    };
    (ola(x), ola(y))
}

/// Indices `[lo, hi)` of DFT bins per one-third-octave band.
fn band_edges() -> Vec<(usize, usize)> {
    let bin_hz = ESTOI_SAMPLE_RATE as f64 / NFFT as f64;
    let nearest = |f: f64| {
        (0..=NFFT / 2)
            .min_by(|&a, &b| ((a as f64 * bin_hz - f).abs()).total_cmp(&(b as f64 * bin_hz - f).abs()))
            .unwrap()
    };
    (0..BANDS)
        .map(|k| {
            let cf = MIN_CENTRE_HZ * 2f64.powf(k as f64 / 3.0);
            (nearest(cf * 2f64.powf(-1.0 / 6.0)), nearest(cf * 2f64.powf(1.0 / 6.0)))
        })
        .collect()
}

/// Band envelopes, `[frame][band]`.
fn band_envelopes(x: &[f64], w: &[f64], edges: &[(usize, usize)]) -> Vec<[f64; BANDS]> {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(NFFT);
    let mut buf = vec![Complex::new(0.0, 0.0); NFFT];
    frame_starts(x.len())
        .map(|s| {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for k in 0..FRAME {
                buf[k].re = x[s + k] * w[k];
            }
            fft.process(&mut buf);
            let mut bands = [0.0; BANDS];
            for (b, &(lo, hi)) in bands.iter_mut().zip(edges) {
                *b = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            }
            bands
        })
        .collect()
}

/// Zero-mean, unit-norm columns of a segment after row normalisation.
fn normalise(seg: &[[f64; BANDS]]) -> Vec<[f64; BANDS]> {
    let n = seg.len() as f64;
    let mut m: Vec<[f64; BANDS]> = seg.to_vec();
    for b in 0..BANDS {
        let mean = m.iter().map(|f| f[b]).sum::<f64>() / n;
        m.iter_mut().for_each(|f| f[b] -= mean);
        let norm = m.iter().map(|f| f[b] * f[b]).sum::<f64>().sqrt() + f64::EPSILON;
        m.iter_mut().for_each(|f| f[b] /= norm);
    }
    for f in &mut m {
        let mean = f.iter().sum::<f64>() / BANDS as f64;
        f.iter_mut().for_each(|v| *v -= mean);
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt() + f64::EPSILON;
        f.iter_mut().for_each(|v| *v /= norm);
    }
    m
}

/// ESTOI of `processed` against `clean`. Signals are trimmed to the shorter
/// length; at least 384 ms must remain after silence removal.
pub fn estoi<T: Real>(clean: &Waveform<T>, processed: &Waveform<T>) -> Result<f64> {
    if clean.sample_rate() != processed.sample_rate() {
        return Err(Error::InvalidArgument("clean and processed sample rates differ".into()));
    }
    let len = clean.len().min(processed.len());
    let to_f64 = |w: &Waveform<T>| w.samples()[..len].iter().map(|v| v.to_f64_()).collect::<Vec<f64>>();
    let x = resample(&to_f64(clean), clean.sample_rate(), ESTOI_SAMPLE_RATE)?;
    let y = resample(&to_f64(processed), clean.sample_rate(), ESTOI_SAMPLE_RATE)?;

    let w = hann();
    let (x, y) = remove_silent_frames(&x, &y, &w);
    let edges = band_edges();
    let xb = band_envelopes(&x, &w, &edges);
    let yb = band_envelopes(&y, &w, &edges);
    if xb.len() < ESTOI_MIN_FRAMES {
        return Err(Error::TooShort { needed: ESTOI_MIN_FRAMES, got: xb.len() });
    }

    let segments = xb.len() - ESTOI_MIN_FRAMES + 1;
    let mut total = 0.0;
    for s in 0..segments {
        let xn = normalise(&xb[s..s + ESTOI_MIN_FRAMES]);
        let yn = normalise(&yb[s..s + ESTOI_MIN_FRAMES]);
        let d: f64 = xn.iter().zip(&yn).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>()).sum();
        total += d / ESTOI_MIN_FRAMES as f64;
    }
    Ok(total / segments as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{synth_speechlike, SpeakingStyle, SynthParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn speech(seed: u64) -> Waveform<f64> {
        synth_speechlike(&SynthParams::new(seed, 2.0, 120.0, SpeakingStyle::NonLombard)).unwrap()
    }

    #[test]
    fn identical_signals_score_one() {
        let x = speech(1);
        assert!((estoi(&x, &x).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gain_invariant() {
        let x = speech(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = Waveform::from_samples(x.samples().iter().map(|v| v + 0.05 * rng.random_range(-1.0..1.0)).collect()).unwrap();
        let a = estoi(&x, &y).unwrap();
        let b = estoi(&x, &y.scaled(7.5)).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} {b}");
        assert!(a < 1.0);
    }

    #[test]
    fn unrelated_noise_scores_near_zero() {
        let x = speech(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = Waveform::from_samples((0..x.len()).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap();
        let s = estoi(&x, &y).unwrap();
        assert!(s.abs() < 0.1, "{s}");
    }

    #[test]
    fn too_short_rejected() {
        let x = speech(6).slice(0, 4000).unwrap();
        assert!(matches!(estoi(&x, &x), Err(Error::TooShort { .. })));
    }

    #[test]
    fn bands_are_ordered_and_nonempty() {
        let e = band_edges();
        assert_eq!(e.len(), 15);
        assert!(e.iter().all(|(lo, hi)| lo < hi));
        assert!(e.windows(2).all(|p| p[0].1 <= p[1].0 + 1));
    }
}
