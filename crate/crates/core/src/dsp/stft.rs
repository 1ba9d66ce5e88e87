use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Waveform;
use crate::{Error, Real, Result};

/// Periodic Hamming window of length `n`.
pub fn hamming_periodic<T: Real>(n: usize) -> Vec<T> {
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let len = T::from_usize_(n);
    (0..n)
        .map(|i| T::lit(0.54) - T::lit(0.46) * (two_pi * T::from_usize_(i) / len).cos())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig<T = f64> {
    pub fft_size: usize,
    pub window_length: usize,
    pub hop: usize,
    pub window: Vec<T>,
}

impl<T: Real> StftConfig<T> {
    pub fn new(fft_size: usize, window_length: usize, hop: usize) -> Result<Self> {
        let cfg = Self { fft_size, window_length, hop, window: hamming_periodic(window_length) };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 640-point FFT, 640-sample Hamming window, 160-sample hop (16 kHz).
    pub fn speech_16k() -> Self {
        Self::new(640, 640, 160).expect("static config is valid")
    }

    pub fn retained_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_length || self.window_length > self.fft_size {
            return Err(Error::InvalidArgument(format!(
                "need 0 < hop <= window_length <= fft_size, got hop={} window={} fft={}",
                self.hop, self.window_length, self.fft_size
            )));
        }
        if self.window.len() != self.window_length {
            return Err(Error::shape(self.window_length, self.window.len()));
        }
        Ok(())
    }

    /// Number of frames produced for `n` samples (no edge padding).
    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.window_length {
            0
        } else {
            (n - self.window_length) / self.hop + 1
        }
    }

    /// Signal length covered by `frames` frames.
    pub fn signal_length(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window_length
        }
    }
}

impl<T: Real> Default for StftConfig<T> {
    fn default() -> Self {
        Self::speech_16k()
    }
}

/// Positive-frequency STFT coefficients, stored frame-major (`frame * F + bin`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram<T = f64> {
    bins: Vec<Complex<T>>,
    num_bins: usize,
    num_frames: usize,
    config: StftConfig<T>,
    sample_rate: u32,
}

impl<T: Real> ComplexSpectrogram<T> {
    pub fn from_frames(
        bins: Vec<Complex<T>>,
        num_frames: usize,
        config: StftConfig<T>,
        sample_rate: u32,
    ) -> Result<Self> {
        let num_bins = config.retained_bins();
        if bins.len() != num_bins * num_frames {
            return Err(Error::shape(format!("{num_bins}x{num_frames}"), bins.len()));
        }
        if bins.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram".into()));
        }
        Ok(Self { bins, num_bins, num_frames, config, sample_rate })
    }

    pub fn zeros(num_frames: usize, config: StftConfig<T>, sample_rate: u32) -> Self {
        let num_bins = config.retained_bins();
        Self {
            bins: vec![Complex::new(T::zero(), T::zero()); num_bins * num_frames],
            num_bins,
            num_frames,
            config,
            sample_rate,
        }
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn config(&self) -> &StftConfig<T> {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex<T> {
        self.bins[frame * self.num_bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex<T>] {
        &self.bins[frame * self.num_bins..(frame + 1) * self.num_bins]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.bins
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.bins
    }

    /// Magnitudes in the same frame-major layout.
    pub fn magnitudes(&self) -> Vec<T> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.num_bins == other.num_bins && self.num_frames == other.num_frames
    }

    /// Frames `[start, start + len)` as a new spectrogram.
    pub fn frames(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.num_frames {
            return Err(Error::shape(format!("frames < {}", self.num_frames), start + len));
        }
        Ok(Self {
            bins: self.bins[start * self.num_bins..(start + len) * self.num_bins].to_vec(),
            num_bins: self.num_bins,
            num_frames: len,
            config: self.config.clone(),
            sample_rate: self.sample_rate,
        })
    }
}

/// Hamming-windowed STFT without edge padding.
pub fn stft<T: Real>(w: &Waveform<T>, cfg: &StftConfig<T>) -> Result<ComplexSpectrogram<T>> {
    cfg.validate()?;
    let x = w.samples();
    if x.len() < cfg.window_length {
        return Err(Error::TooShort { needed: cfg.window_length, got: x.len() });
    }
    let frames = cfg.frame_count(x.len());
    let num_bins = cfg.retained_bins();
    let fft = FftPlanner::<T>::new().plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); cfg.fft_size];
    let mut bins = Vec::with_capacity(frames * num_bins);
    for l in 0..frames {
        let start = l * cfg.hop;
        for c in buf.iter_mut() {
            *c = Complex::new(T::zero(), T::zero());
        }
        for (n, (&s, &wn)) in x[start..start + cfg.window_length].iter().zip(&cfg.window).enumerate() {
            buf[n] = Complex::new(s * wn, T::zero());
        }
        fft.process(&mut buf);
        bins.extend_from_slice(&buf[..num_bins]);
    }
    Ok(ComplexSpectrogram { bins, num_bins, num_frames: frames, config: cfg.clone(), sample_rate: w.sample_rate() })
}

/// Weighted overlap-add inverse normalised by the summed squared window.
pub fn istft<T: Real>(s: &ComplexSpectrogram<T>, cfg: &StftConfig<T>) -> Result<Waveform<T>> {
    cfg.validate()?;
    if s.num_frames == 0 {
        return Err(Error::Degenerate("empty spectrogram".into()));
    }
    if s.num_bins != cfg.retained_bins() {
        return Err(Error::shape(cfg.retained_bins(), s.num_bins));
    }
    let n_fft = cfg.fft_size;
    let len = cfg.signal_length(s.num_frames);
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(n_fft);
    let mut out = vec![T::zero(); len];
    let mut norm = vec![T::zero(); len];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    let scale = T::one() / T::from_usize_(n_fft);
    for l in 0..s.num_frames {
        let frame = s.frame(l);
        buf[..s.num_bins].copy_from_slice(frame);
        for k in s.num_bins..n_fft {
            buf[k] = frame[n_fft - k].conj();
        }
        // DC and Nyquist must be real for a real-valued inverse.
        buf[0].im = T::zero();
        if n_fft % 2 == 0 {
            buf[n_fft / 2].im = T::zero();
        }
        ifft.process(&mut buf);
        let start = l * cfg.hop;
        for n in 0..cfg.window_length {
            let wn = cfg.window[n];
            out[start + n] += buf[n].re * scale * wn;
            norm[start + n] += wn * wn;
        }
    }
    let eps = T::lit(1e-10);
    for (o, &d) in out.iter_mut().zip(&norm) {
        *o = if d > eps { *o / d } else { T::zero() };
    }
    Waveform::new(out, s.sample_rate)
}
