use serde::{Deserialize, Serialize};

use super::{ideal_amplitude_mask, AmplitudeMask};
use crate::dsp::{istft, stft, ComplexSpectrogram, StftConfig, Waveform};
use crate::features::{FrameSequence, GrayImage};
use crate::{Error, Real, Result};

/// Audio frames per segment (200 ms at a 10 ms hop).
pub const SEGMENT_FRAMES: usize = 20;
/// Video frames per segment (200 ms at 25 fps).
pub const VIDEO_FRAMES_PER_SEGMENT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Vo,
    Ao,
    Av,
}

impl Modality {
    pub fn uses_audio(self) -> bool {
        matches!(self, Modality::Ao | Modality::Av)
    }

    pub fn uses_video(self) -> bool {
        matches!(self, Modality::Vo | Modality::Av)
    }

    pub fn label(self) -> &'static str {
        match self {
            Modality::Vo => "VO",
            Modality::Ao => "AO",
            Modality::Av => "AV",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vo" => Ok(Modality::Vo),
            "ao" => Ok(Modality::Ao),
            "av" => Ok(Modality::Av),
            other => Err(Error::InvalidArgument(format!("unknown modality {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentLayout {
    pub full_segments: usize,
    /// Frames in the trailing partial segment, 0 if none.
    pub tail_frames: usize,
}

impl SegmentLayout {
    pub fn total_segments(&self) -> usize {
        self.full_segments + usize::from(self.tail_frames > 0)
    }
}

pub fn segment_layout(num_frames: usize) -> SegmentLayout {
    SegmentLayout { full_segments: num_frames / SEGMENT_FRAMES, tail_frames: num_frames % SEGMENT_FRAMES }
}

/// One fixed-size segment handed to an estimator. A trailing partial segment
/// is zero-padded to [`SEGMENT_FRAMES`] frames and its video repeats the last
/// available frame.
#[derive(Debug, Clone)]
pub struct SegmentInput<'a, T = f64> {
    pub index: usize,
    pub start_frame: usize,
    /// Frames that carry signal; the rest is padding.
    pub valid_frames: usize,
    pub noisy: ComplexSpectrogram<T>,
    pub video: Option<Vec<&'a GrayImage>>,
}

pub trait MaskEstimator<T: Real> {
    fn modality(&self) -> Modality;

    /// One [`SEGMENT_FRAMES`]-frame mask per input segment.
    fn estimate(&self, segments: &[SegmentInput<'_, T>]) -> Result<Vec<AmplitudeMask<T>>>;
}

/// Returns a mask of ones; enhancement with it reproduces the input.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitMaskEstimator;

impl<T: Real> MaskEstimator<T> for UnitMaskEstimator {
    fn modality(&self) -> Modality {
        Modality::Ao
    }

    fn estimate(&self, segments: &[SegmentInput<'_, T>]) -> Result<Vec<AmplitudeMask<T>>> {
        Ok(segments.iter().map(|s| AmplitudeMask::filled(s.noisy.num_bins(), SEGMENT_FRAMES, T::one())).collect())
    }
}

/// Knows the clean utterance and returns its ideal amplitude mask.
#[derive(Debug, Clone)]
pub struct IdealMaskEstimator<T = f64> {
    clean: ComplexSpectrogram<T>,
    ceiling: T,
}

impl<T: Real> IdealMaskEstimator<T> {
    pub fn new(clean: &Waveform<T>, cfg: &StftConfig<T>, ceiling: T) -> Result<Self> {
        Ok(Self { clean: stft(&pad_to_frames(clean, cfg), cfg)?, ceiling })
    }
}

impl<T: Real> MaskEstimator<T> for IdealMaskEstimator<T> {
    fn modality(&self) -> Modality {
        Modality::Ao
    }

    fn estimate(&self, segments: &[SegmentInput<'_, T>]) -> Result<Vec<AmplitudeMask<T>>> {
        segments
            .iter()
            .map(|s| {
                let clean = self.clean.frames(s.start_frame, s.valid_frames)?;
                let noisy = s.noisy.frames(0, s.valid_frames)?;
                let mut values = ideal_amplitude_mask(&clean, &noisy, self.ceiling)?.into_values();
                values.resize(SEGMENT_FRAMES * s.noisy.num_bins(), T::zero());
                AmplitudeMask::new(values, s.noisy.num_bins(), SEGMENT_FRAMES, self.ceiling)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceOptions {
    /// Upper limit applied to estimated gains before masking; `None` keeps
    /// raw estimator output.
    pub clip: Option<f64>,
}

impl Default for EnhanceOptions {
    fn default() -> Self {
        Self { clip: None }
    }
}

/// Zero-pads `w` so that the last frame ends exactly at the signal end.
pub fn pad_to_frames<T: Real>(w: &Waveform<T>, cfg: &StftConfig<T>) -> Waveform<T> {
    let n = w.len().max(cfg.window_length);
    let extra = (n - cfg.window_length).div_ceil(cfg.hop) * cfg.hop + cfg.window_length - w.len();
    let mut s = w.samples().to_vec();
    s.resize(w.len() + extra, T::zero());
    Waveform::new(s, w.sample_rate()).expect("padding keeps samples finite")
}

/// Splits a spectrogram into consecutive non-overlapping segments of
/// [`SEGMENT_FRAMES`] frames, pairing segment `i` with video frames
/// `[5i, 5i + 5)`. The video may deviate from the expected length by at most
/// one segment's worth of frames; missing trailing frames repeat the last one.
pub fn pair_segments<'a, T: Real>(
    spec: &ComplexSpectrogram<T>,
    video: Option<&'a FrameSequence>,
) -> Result<Vec<SegmentInput<'a, T>>> {
    let layout = segment_layout(spec.num_frames());
    let needed = layout.total_segments() * VIDEO_FRAMES_PER_SEGMENT;
    if let Some(v) = video {
        if v.is_empty() {
            return Err(Error::Modality("empty video frame sequence".into()));
        }
        if v.len().abs_diff(needed) > VIDEO_FRAMES_PER_SEGMENT {
            return Err(Error::shape(format!("{needed} video frames (+/- {VIDEO_FRAMES_PER_SEGMENT})"), v.len()));
        }
    }
    let nb = spec.num_bins();
    let mut segments = Vec::with_capacity(layout.total_segments());
    for i in 0..layout.total_segments() {
        let start = i * SEGMENT_FRAMES;
        let valid = SEGMENT_FRAMES.min(spec.num_frames() - start);
        let mut seg = ComplexSpectrogram::zeros(SEGMENT_FRAMES, spec.config().clone(), spec.sample_rate());
        seg.as_mut_slice()[..valid * nb].copy_from_slice(&spec.as_slice()[start * nb..(start + valid) * nb]);
        let frames = video.map(|v| {
            (0..VIDEO_FRAMES_PER_SEGMENT)
                .map(|k| &v.frames[(i * VIDEO_FRAMES_PER_SEGMENT + k).min(v.len() - 1)])
                .collect()
        });
        segments.push(SegmentInput { index: i, start_frame: start, valid_frames: valid, noisy: seg, video: frames });
    }
    Ok(segments)
}

/// Splits the noisy spectrogram into non-overlapping 20-frame segments,
/// estimates a mask per segment, concatenates, applies it with the noisy
/// phase and resynthesises. The output has the input's length.
pub fn enhance_utterance<T: Real, E: MaskEstimator<T> + ?Sized>(
    estimator: &E,
    noisy: &Waveform<T>,
    video: Option<&FrameSequence>,
    opts: &EnhanceOptions,
) -> Result<Waveform<T>> {
    let modality = estimator.modality();
    if modality.uses_video() && video.is_none() {
        return Err(Error::Modality(format!("{modality} estimator needs video frames")));
    }
    let cfg = StftConfig::<T>::speech_16k();
    let spec = stft(&pad_to_frames(noisy, &cfg), &cfg)?;
    let segments = pair_segments(&spec, video.filter(|_| modality.uses_video()))?;

    let masks = estimator.estimate(&segments)?;
    if masks.len() != segments.len() {
        return Err(Error::shape(segments.len(), masks.len()));
    }
    let mut mask = AmplitudeMask::concat(masks)?.truncated(spec.num_frames());
    if let Some(c) = opts.clip {
        mask = mask.clipped(T::lit(c));
    }
    let out = istft(&super::apply_mask(&mask, &spec)?, &cfg)?;
    out.slice(0, noisy.len())
}
