use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dsp::{hamming_periodic, Waveform};
use crate::{Error, Real, Result};

pub const DEFAULT_LPC_ORDER: usize = 12;

const FRAME: usize = 512;
const HOP: usize = 256;
const WARMUP: usize = 4096;

/// All-pole model `gain / A(z)` with `A(z) = 1 + sum_k a_k z^-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LpcModel<T = f64> {
    pub order: usize,
    pub coefficients: Vec<T>,
    pub gain: T,
}

impl<T: Real> LpcModel<T> {
    pub fn new(coefficients: Vec<T>, gain: T) -> Result<Self> {
        let m = Self { order: coefficients.len(), coefficients, gain };
        m.check_stable()?;
        Ok(m)
    }

    /// A flat (white) model of the given gain.
    pub fn flat(order: usize, gain: T) -> Self {
        Self { order, coefficients: vec![T::zero(); order], gain }
    }

    /// Reflection coefficients by step-down recursion.
    pub fn reflection_coefficients(&self) -> Vec<T> {
        let mut a: Vec<T> = self.coefficients.clone();
        let mut ks = vec![T::zero(); a.len()];
        for m in (0..a.len()).rev() {
            let k = a[m];
            ks[m] = k;
            let denom = T::one() - k * k;
            if denom <= T::zero() {
                break;
            }
            let prev: Vec<T> = (0..m).map(|i| (a[i] - k * a[m - 1 - i]) / denom).collect();
            a.truncate(m);
            a.copy_from_slice(&prev);
        }
        ks
    }

    pub fn check_stable(&self) -> Result<()> {
        if self.coefficients.len() != self.order {
            return Err(Error::shape(self.order, self.coefficients.len()));
        }
        if !self.gain.is_finite() || self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("LPC model".into()));
        }
        if let Some((i, k)) = self.reflection_coefficients().iter().enumerate().find(|(_, k)| k.abs() >= T::one()) {
            return Err(Error::UnstableModel(format!("reflection coefficient {i} = {k}")));
        }
        Ok(())
    }

    /// `|gain / A(e^{jw})|` at `freq_hz`.
    pub fn magnitude_response(&self, freq_hz: f64, sample_rate: u32) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate as f64;
        let mut a = Complex::new(1.0, 0.0);
        for (k, c) in self.coefficients.iter().enumerate() {
            a += Complex::from_polar(c.to_f64_(), -w * (k + 1) as f64);
        }
        self.gain.to_f64_().abs() / a.norm()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.check_stable()?;
        Ok(m)
    }
}

/// Levinson-Durbin recursion. Returns predictor polynomial and final error.
fn levinson<T: Real>(r: &[T]) -> Result<(Vec<T>, T)> {
    let p = r.len() - 1;
    let mut a = vec![T::zero(); p];
    let mut err = r[0];
    for i in 0..p {
        let mut acc = r[i + 1];
        for j in 0..i {
            acc += a[j] * r[i - j];
        }
        let k = -acc / err;
        if !k.is_finite() || k.abs() >= T::one() {
            return Err(Error::UnstableModel(format!("reflection coefficient {i} = {k}")));
        }
        let prev = a.clone();
        a[i] = k;
        for j in 0..i {
            a[j] = prev[j] + k * prev[i - 1 - j];
        }
        err *= T::one() - k * k;
    }
    Ok((a, err))
}

/// Fits an all-pole model to pooled, Hamming-windowed reference frames
/// using the autocorrelation method.
pub fn fit_lpc<T: Real>(reference: &[Waveform<T>], order: usize) -> Result<LpcModel<T>> {
    if order == 0 {
        return Err(Error::InvalidArgument("LPC order must be at least 1".into()));
    }
    let total_s: f64 = reference.iter().map(|w| w.duration_s()).sum();
    if total_s < 1.0 {
        return Err(Error::InvalidArgument(format!("need at least 1 s of reference audio, got {total_s:.3} s")));
    }
    let window: Vec<T> = hamming_periodic(FRAME);
    let window_energy: T = window.iter().map(|&w| w * w).sum();
    let mut r = vec![T::zero(); order + 1];
    let mut frames = 0usize;
    let mut buf = vec![T::zero(); FRAME];
    for w in reference {
        let x = w.samples();
        if x.len() < FRAME {
            continue;
        }
        for start in (0..=x.len() - FRAME).step_by(HOP) {
            for (b, (&s, &wn)) in buf.iter_mut().zip(x[start..start + FRAME].iter().zip(&window)) {
                *b = s * wn;
            }
            for (lag, rl) in r.iter_mut().enumerate() {
                let mut acc = T::zero();
                for n in lag..FRAME {
                    acc += buf[n] * buf[n - lag];
                }
                *rl += acc;
            }
            frames += 1;
        }
    }
    if frames == 0 || r[0] <= T::zero() {
        return Err(Error::Degenerate("reference autocorrelation is zero".into()));
    }
    let norm = window_energy * T::from_usize_(frames);
    for v in r.iter_mut() {
        *v /= norm;
    }
    let (coefficients, err) = levinson(&r)?;
    LpcModel::new(coefficients, err.max(T::zero()).sqrt())
}

/// Seeded unit-variance Gaussian noise through the all-pole model.
pub fn generate_ssn<T: Real>(model: &LpcModel<T>, duration_s: f64, seed: u64, sample_rate: u32) -> Result<Waveform<T>> {
    if !(duration_s > 0.0) {
        return Err(Error::InvalidArgument("duration must be positive".into()));
    }
    model.check_stable()?;
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = model.order;
    let mut hist = vec![T::zero(); p];
    let mut out = Vec::with_capacity(n);
    for i in 0..n + WARMUP {
        let e: f64 = StandardNormal.sample(&mut rng);
        let mut y = model.gain * T::lit(e);
        for k in 0..p {
            y -= model.coefficients[k] * hist[k];
        }
        if p > 0 {
            hist.rotate_right(1);
            hist[0] = y;
        }
        if i >= WARMUP {
            out.push(y);
        }
    }
    Waveform::new(out, sample_rate)
}
