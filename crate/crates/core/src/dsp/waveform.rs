use crate::{Error, Real, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono sampled audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T = f64> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("waveform sample {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Builds a waveform at the canonical 16 kHz rate.
    pub fn from_samples(samples: Vec<T>) -> Result<Self> {
        Self::new(samples, DEFAULT_SAMPLE_RATE)
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self { samples: vec![T::zero(); len], sample_rate }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.abs()))
    }

    /// Mean power over the full signal.
    pub fn power(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        self.samples.iter().map(|&s| s * s).sum::<T>() / T::from_usize_(self.samples.len())
    }

    pub fn scaled(&self, gain: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Sub-range copy `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.samples.len() {
            return Err(Error::TooShort { needed: start + len, got: self.samples.len() });
        }
        Ok(Self { samples: self.samples[start..start + len].to_vec(), sample_rate: self.sample_rate })
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        Self { samples: self.samples.iter().map(|&s| f(s)).collect(), sample_rate: self.sample_rate }
    }

    pub fn cast<U: Real>(&self) -> Waveform<U> {
        Waveform {
            samples: self.samples.iter().map(|&s| U::lit(s.to_f64_())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Scales the waveform so that its largest absolute sample is exactly one.
pub fn peak_normalize<T: Real>(w: &Waveform<T>) -> Result<Waveform<T>> {
    let peak = w.peak();
    if peak <= T::zero() {
        return Err(Error::Degenerate("cannot peak-normalize an all-zero signal".into()));
    }
    Ok(w.map(|s| s / peak))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn peak_normalize_scales_linearly() {
        let w = Waveform::from_samples(vec![0.5, -0.25]).unwrap();
        assert_eq!(peak_normalize(&w).unwrap().samples(), &[1.0, -0.5]);
    }

    #[test]
    fn peak_one_is_identity() {
        let w = Waveform::from_samples(vec![0.1, -1.0, 0.3]).unwrap();
        assert_eq!(peak_normalize(&w).unwrap(), w);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let w = Waveform::<f64>::zeros(10, 16_000);
        assert!(matches!(peak_normalize(&w), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rejects_non_finite_samples() {
        assert!(Waveform::from_samples(vec![0.0, f64::NAN]).is_err());
        assert!(Waveform::new(vec![0.0f64], 0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let w = Waveform::<f32>::from_samples(vec![0.25, -0.5]).unwrap();
        assert_eq!(peak_normalize(&w).unwrap().samples(), &[0.5f32, -1.0]);
    }

    proptest! {
        #[test]
        fn normalized_peak_is_one(xs in prop::collection::vec(-10.0f64..10.0, 1..200)) {
            prop_assume!(xs.iter().any(|x| x.abs() > 1e-9));
            let w = Waveform::from_samples(xs).unwrap();
            let n = peak_normalize(&w).unwrap();
            prop_assert!((n.peak() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(n.len(), w.len());
        }

        #[test]
        fn peak_normalize_is_idempotent(xs in prop::collection::vec(-10.0f64..10.0, 1..200)) {
            prop_assume!(xs.iter().any(|x| x.abs() > 1e-9));
            let once = peak_normalize(&Waveform::from_samples(xs).unwrap()).unwrap();
            let twice = peak_normalize(&once).unwrap();
            for (a, b) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
