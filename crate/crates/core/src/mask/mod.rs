//! Time-frequency amplitude masks and segment-wise utterance enhancement.

mod enhance;

pub use enhance::{
    enhance_utterance, pad_to_frames, pair_segments, segment_layout, EnhanceOptions, IdealMaskEstimator, MaskEstimator, Modality, SegmentInput,
    SegmentLayout, UnitMaskEstimator, SEGMENT_FRAMES, VIDEO_FRAMES_PER_SEGMENT,
};

use crate::dsp::ComplexSpectrogram;
use crate::{Error, Real, Result};

pub const DEFAULT_CEILING: f64 = 10.0;

/// Real-valued gains over an F x T grid, stored frame-major like
/// [`ComplexSpectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMask<T = f64> {
    values: Vec<T>,
    num_bins: usize,
    num_frames: usize,
    ceiling: T,
}

impl<T: Real> AmplitudeMask<T> {
    pub fn new(values: Vec<T>, num_bins: usize, num_frames: usize, ceiling: T) -> Result<Self> {
        if values.len() != num_bins * num_frames {
            return Err(Error::shape(format!("{num_bins}x{num_frames}"), values.len()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidArgument("mask values must be finite and nonnegative".into()));
        }
        Ok(Self { values, num_bins, num_frames, ceiling })
    }

    pub fn filled(num_bins: usize, num_frames: usize, value: T) -> Self {
        Self { values: vec![value; num_bins * num_frames], num_bins, num_frames, ceiling: T::lit(DEFAULT_CEILING) }
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn ceiling(&self) -> T {
        self.ceiling
    }

    pub fn get(&self, bin: usize, frame: usize) -> T {
        self.values[frame * self.num_bins + bin]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn clipped(mut self, ceiling: T) -> Self {
        for v in &mut self.values {
            *v = v.min(ceiling);
        }
        self.ceiling = ceiling;
        self
    }

    /// Frames `[0, len)`.
    pub fn truncated(mut self, len: usize) -> Self {
        let len = len.min(self.num_frames);
        self.values.truncate(len * self.num_bins);
        self.num_frames = len;
        self
    }

    /// Joins masks along time. All parts must share the bin count.
    pub fn concat(parts: Vec<Self>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Degenerate("no masks to concatenate".into()))?;
        let (num_bins, ceiling) = (first.num_bins, first.ceiling);
        let mut values = Vec::new();
        let mut num_frames = 0;
        for p in parts {
            if p.num_bins != num_bins {
                return Err(Error::shape(num_bins, p.num_bins));
            }
            num_frames += p.num_frames;
            values.extend(p.values);
        }
        Ok(Self { values, num_bins, num_frames, ceiling })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.num_bins != other.num_bins || self.num_frames != other.num_frames {
            return Err(Error::shape(
                format!("{}x{}", self.num_bins, self.num_frames),
                format!("{}x{}", other.num_bins, other.num_frames),
            ));
        }
        Ok(())
    }
}

/// `min(|X| / |Y|, ceiling)` per cell. Cells with `|Y| = 0` get the
/// ceiling, or 1 when `|X| = 0` as well.
pub fn ideal_amplitude_mask<T: Real>(
    clean: &ComplexSpectrogram<T>,
    noisy: &ComplexSpectrogram<T>,
    ceiling: T,
) -> Result<AmplitudeMask<T>> {
    if !clean.same_shape(noisy) {
        return Err(Error::shape(
            format!("{}x{}", clean.num_bins(), clean.num_frames()),
            format!("{}x{}", noisy.num_bins(), noisy.num_frames()),
        ));
    }
    if !(ceiling > T::zero()) {
        return Err(Error::InvalidArgument("mask ceiling must be positive".into()));
    }
    let values = clean
        .as_slice()
        .iter()
        .zip(noisy.as_slice())
        .map(|(x, y)| {
            let den = y.norm();
            if den == T::zero() {
                if x.norm() == T::zero() { T::one() } else { ceiling }
            } else {
                (x.norm() / den).min(ceiling)
            }
        })
        .collect();
    Ok(AmplitudeMask { values, num_bins: clean.num_bins(), num_frames: clean.num_frames(), ceiling })
}

/// Mean squared difference over all cells.
pub fn mask_loss<T: Real>(target: &AmplitudeMask<T>, estimate: &AmplitudeMask<T>) -> Result<T> {
    target.same_shape(estimate)?;
    if target.values.is_empty() {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let sum: T = target.values.iter().zip(&estimate.values).map(|(&m, &e)| (m - e) * (m - e)).sum();
    Ok(sum / T::from_usize_(target.values.len()))
}

/// Scales each noisy coefficient by its gain, keeping the noisy phase.
pub fn apply_mask<T: Real>(mask: &AmplitudeMask<T>, noisy: &ComplexSpectrogram<T>) -> Result<ComplexSpectrogram<T>> {
    if mask.num_bins != noisy.num_bins() || mask.num_frames != noisy.num_frames() {
        return Err(Error::shape(
            format!("{}x{}", noisy.num_bins(), noisy.num_frames()),
            format!("{}x{}", mask.num_bins, mask.num_frames),
        ));
    }
    let mut out = noisy.clone();
    for (c, &g) in out.as_mut_slice().iter_mut().zip(&mask.values) {
        *c = c.scale(g);
    }
    Ok(out)
}
