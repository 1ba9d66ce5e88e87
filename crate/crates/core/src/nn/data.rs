use serde::{Deserialize, Serialize};

use super::arch::{ArchitectureConfig, MASK_BINS};
use super::network::SegmentBatch;
use super::Tensor;
use crate::dsp::ComplexSpectrogram;
use crate::features::GrayImage;
use crate::mask::{AmplitudeMask, SEGMENT_FRAMES, VIDEO_FRAMES_PER_SEGMENT};
use crate::{Error, Real, Result};

const LOG_FLOOR: f64 = 1e-5;

/// One training example: raw (unstandardised) features and the target mask,
/// all in `[bin][frame]` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainingSegment<T = f64> {
    pub audio: Vec<T>,
    pub video: Option<Vec<T>>,
    pub target: Vec<T>,
}

/// Log magnitudes of a 20-frame spectrogram, `[bin][frame]`.
pub fn audio_features<T: Real>(seg: &ComplexSpectrogram<T>) -> Result<Vec<T>> {
    if seg.num_bins() != MASK_BINS || seg.num_frames() != SEGMENT_FRAMES {
        return Err(Error::shape(format!("{MASK_BINS}x{SEGMENT_FRAMES}"), format!("{}x{}", seg.num_bins(), seg.num_frames())));
    }
    let floor = T::lit(LOG_FLOOR);
    let mut out = vec![T::zero(); MASK_BINS * SEGMENT_FRAMES];
    for t in 0..SEGMENT_FRAMES {
        for (f, c) in seg.frame(t).iter().enumerate() {
            out[f * SEGMENT_FRAMES + t] = (c.norm() + floor).ln();
        }
    }
    Ok(out)
}

/// Five mouth crops box-downsampled to `size x size`, as pixel values.
pub fn video_features<T: Real>(frames: &[&GrayImage], size: usize) -> Result<Vec<T>> {
    if frames.len() != VIDEO_FRAMES_PER_SEGMENT {
        return Err(Error::shape(VIDEO_FRAMES_PER_SEGMENT, frames.len()));
    }
    let mut out = Vec::with_capacity(VIDEO_FRAMES_PER_SEGMENT * size * size);
    for f in frames {
        if f.height != f.width || size == 0 || f.height % size != 0 {
            return Err(Error::shape(format!("square crop, a multiple of {size}"), format!("{}x{}", f.height, f.width)));
        }
        let small = if f.height == size { (*f).clone() } else { f.downsample(f.height / size)? };
        out.extend(small.pixels.iter().map(|&p| T::from_usize_(p as usize)));
    }
    Ok(out)
}

/// Converts a `[bin][frame]` mask into an [`AmplitudeMask`].
pub fn mask_from_network<T: Real>(values: &[T], ceiling: T) -> Result<AmplitudeMask<T>> {
    let mut fm = vec![T::zero(); values.len()];
    for f in 0..MASK_BINS {
        for t in 0..SEGMENT_FRAMES {
            fm[t * MASK_BINS + f] = values[f * SEGMENT_FRAMES + t];
        }
    }
    AmplitudeMask::new(fm, MASK_BINS, SEGMENT_FRAMES, ceiling)
}

/// `[bin][frame]` values of a 321 x 20 mask.
pub fn mask_to_network<T: Real>(mask: &AmplitudeMask<T>) -> Result<Vec<T>> {
    if mask.num_bins() != MASK_BINS || mask.num_frames() != SEGMENT_FRAMES {
        return Err(Error::shape(format!("{MASK_BINS}x{SEGMENT_FRAMES}"), format!("{}x{}", mask.num_bins(), mask.num_frames())));
    }
    let mut out = vec![T::zero(); MASK_BINS * SEGMENT_FRAMES];
    for t in 0..SEGMENT_FRAMES {
        for f in 0..MASK_BINS {
            out[f * SEGMENT_FRAMES + t] = mask.get(f, t);
        }
    }
    Ok(out)
}

/// Training-set feature statistics: per-bin for audio, global for video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Standardizer<T = f64> {
    pub audio_mean: Vec<T>,
    pub audio_std: Vec<T>,
    pub video_mean: T,
    pub video_std: T,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(segments: &[TrainingSegment<T>]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Degenerate("no training segments".into()));
        }
        let floor = T::lit(1e-6);
        let mut audio_mean = vec![T::zero(); MASK_BINS];
        let mut audio_std = vec![T::zero(); MASK_BINS];
        let per_bin = T::from_usize_(segments.len() * SEGMENT_FRAMES);
        for s in segments {
            for f in 0..MASK_BINS {
                audio_mean[f] += s.audio[f * SEGMENT_FRAMES..(f + 1) * SEGMENT_FRAMES].iter().copied().sum::<T>();
            }
        }
        audio_mean.iter_mut().for_each(|m| *m /= per_bin);
        for s in segments {
            for f in 0..MASK_BINS {
                for &v in &s.audio[f * SEGMENT_FRAMES..(f + 1) * SEGMENT_FRAMES] {
                    audio_std[f] += (v - audio_mean[f]) * (v - audio_mean[f]);
                }
            }
        }
        audio_std.iter_mut().for_each(|v| *v = (*v / per_bin).sqrt().max(floor));

        let (mut sum, mut sq, mut n) = (T::zero(), T::zero(), 0usize);
        for v in segments.iter().filter_map(|s| s.video.as_ref()) {
            sum += v.iter().copied().sum::<T>();
            n += v.len();
        }
        let video_mean = if n > 0 { sum / T::from_usize_(n) } else { T::zero() };
        for v in segments.iter().filter_map(|s| s.video.as_ref()) {
            sq += v.iter().map(|&p| (p - video_mean) * (p - video_mean)).sum::<T>();
        }
        let video_std = if n > 0 { (sq / T::from_usize_(n)).sqrt().max(floor) } else { T::one() };
        Ok(Self { audio_mean, audio_std, video_mean, video_std })
    }

    pub fn audio(&self, raw: &[T]) -> Vec<T> {
        raw.iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = i / SEGMENT_FRAMES;
                (v - self.audio_mean[f]) / self.audio_std[f]
            })
            .collect()
    }

    pub fn video(&self, raw: &[T]) -> Vec<T> {
        raw.iter().map(|&v| (v - self.video_mean) / self.video_std).collect()
    }
}

/// Standardised network inputs (and targets) for a set of segments.
pub fn make_batch<T: Real>(
    cfg: &ArchitectureConfig,
    std: &Standardizer<T>,
    segments: &[&TrainingSegment<T>],
) -> Result<SegmentBatch<T>> {
    let b = segments.len();
    let plane = MASK_BINS * SEGMENT_FRAMES;
    let audio = if cfg.modality.uses_audio() {
        let mut data = Vec::with_capacity(b * plane);
        for s in segments {
            if s.audio.len() != plane {
                return Err(Error::shape(plane, s.audio.len()));
            }
            data.extend(std.audio(&s.audio));
        }
        Some(Tensor::from_vec(&[b, MASK_BINS, SEGMENT_FRAMES], data)?)
    } else {
        None
    };
    let video = if cfg.modality.uses_video() {
        let vlen = VIDEO_FRAMES_PER_SEGMENT * cfg.video_size * cfg.video_size;
        let mut data = Vec::with_capacity(b * vlen);
        for s in segments {
            let v = s.video.as_ref().ok_or_else(|| Error::Modality("segment without video".into()))?;
            if v.len() != vlen {
                return Err(Error::shape(vlen, v.len()));
            }
            data.extend(std.video(v));
        }
        Some(Tensor::from_vec(&[b, VIDEO_FRAMES_PER_SEGMENT, cfg.video_size, cfg.video_size], data)?)
    } else {
        None
    };
    let mut target = Vec::with_capacity(b * plane);
    for s in segments {
        if s.target.len() != plane {
            return Err(Error::shape(plane, s.target.len()));
        }
        target.extend_from_slice(&s.target);
    }
    Ok(SegmentBatch { audio, video, target: Some(Tensor::from_vec(&[b, MASK_BINS, SEGMENT_FRAMES], target)?) })
}
