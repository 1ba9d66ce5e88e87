//! Autocorrelation pitch estimation with window correction and an octave
//! cost, in the style of the classic short-term autocorrelation method.

use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Config {
    pub floor_hz: f64,
    pub ceiling_hz: f64,
    pub frame_s: f64,
    pub hop_s: f64,
    pub voicing_threshold: f64,
    /// Frames whose peak is below this fraction of the global peak are silent.
    pub silence_threshold: f64,
    pub octave_cost: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            floor_hz: 75.0,
            ceiling_hz: 600.0,
            frame_s: 0.04,
            hop_s: 0.01,
            voicing_threshold: 0.45,
            silence_threshold: 0.03,
            octave_cost: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum F0Estimate {
    Voiced { mean_hz: f64, voiced_frames: usize, total_frames: usize },
    Unvoiced,
}

impl F0Estimate {
    pub fn hz(&self) -> Option<f64> {
        match *self {
            F0Estimate::Voiced { mean_hz, .. } => Some(mean_hz),
            F0Estimate::Unvoiced => None,
        }
    }
}

fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|lag| x[lag..].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Mean F0 over voiced frames.
pub fn estimate_f0<T: Real>(w: &Waveform<T>, cfg: &F0Config) -> Result<F0Estimate> {
    if !(cfg.floor_hz > 0.0 && cfg.ceiling_hz > cfg.floor_hz) {
        return Err(Error::InvalidArgument("need 0 < floor < ceiling".into()));
    }
    let fs = w.sample_rate() as f64;
    let min_len = (0.1 * fs).round() as usize;
    if w.len() < min_len {
        return Err(Error::TooShort { needed: min_len, got: w.len() });
    }
    let frame = (cfg.frame_s * fs).round() as usize;
    let hop = ((cfg.hop_s * fs).round() as usize).max(1);
    let min_lag = (fs / cfg.ceiling_hz).floor().max(1.0) as usize;
    let max_lag = ((fs / cfg.floor_hz).ceil() as usize).min(frame - 2);
    if min_lag + 1 >= max_lag {
        return Err(Error::InvalidArgument("pitch search range is empty for this frame size".into()));
    }
    let x: Vec<f64> = w.samples().iter().map(|s| s.to_f64_()).collect();
    let global_peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if global_peak == 0.0 || x.len() < frame {
        return Ok(F0Estimate::Unvoiced);
    }

    let window: Vec<f64> = (0..frame)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / frame as f64).cos())
        .collect();
    let rw = autocorrelation(&window, max_lag + 1);

    let mut sum = 0.0;
    let mut voiced = 0usize;
    let total = (x.len() - frame) / hop + 1;
    let mut buf = vec![0.0; frame];
    for f in 0..total {
        let seg = &x[f * hop..f * hop + frame];
        let local_peak = seg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if local_peak < cfg.silence_threshold * global_peak {
            continue;
        }
        let mean = seg.iter().sum::<f64>() / frame as f64;
        for ((b, &s), &wn) in buf.iter_mut().zip(seg).zip(&window) {
            *b = (s - mean) * wn;
        }
        let ra = autocorrelation(&buf, max_lag + 1);
        if ra[0] <= 0.0 {
            continue;
        }
        let r: Vec<f64> = (0..=max_lag + 1).map(|l| (ra[l] / ra[0]) / (rw[l] / rw[0])).collect();

        let mut best: Option<(f64, f64, f64)> = None; // (strength, lag, r)
        for lag in min_lag.max(1)..=max_lag {
            if r[lag] > r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] > 0.0 {
                let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
                let denom = a - 2.0 * b + c;
                let shift = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
                let peak_r = b - 0.25 * (a - c) * shift;
                let tau = lag as f64 + shift;
                // log2(floor / f) <= 0, so shorter lags gain a small bonus.
                let strength = peak_r.min(1.0) - cfg.octave_cost * (cfg.floor_hz * tau / fs).log2();
                if best.is_none_or(|(s, _, _)| strength > s) {
                    best = Some((strength, tau, peak_r));
                }
            }
        }
        if let Some((_, tau, peak_r)) = best {
            if peak_r > cfg.voicing_threshold {
                sum += fs / tau;
                voiced += 1;
            }
        }
    }
    Ok(if voiced == 0 {
        F0Estimate::Unvoiced
    } else {
        F0Estimate::Voiced { mean_hz: sum / voiced as f64, voiced_frames: voiced, total_frames: total }
    })
}
