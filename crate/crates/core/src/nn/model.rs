//! Trained-network checkpoints and the network-backed mask estimator.
//!
//! A checkpoint is one JSON document:
//!
//! ```text
//! { "format": "avse-checkpoint", "version": 1,
//!   "architecture": {...}, "parameters": {...},
//!   "standardizer": {...}, "training_log": {...} | null }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::ArchitectureConfig;
use super::data::{audio_features, mask_from_network, mask_to_network, video_features, Standardizer, TrainingSegment};
use super::network::{forward, Mode, NetworkParameters};
use super::train::TrainingLog;
use crate::dsp::{stft, StftConfig, Waveform};
use crate::features::FrameSequence;
use crate::mask::{
    ideal_amplitude_mask, pad_to_frames, pair_segments, AmplitudeMask, MaskEstimator, Modality, SegmentInput, DEFAULT_CEILING, SEGMENT_FRAMES,
};
use crate::{Error, Real, Result};

pub const CHECKPOINT_FORMAT: &str = "avse-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Checkpoint<T = f64> {
    pub format: String,
    pub version: u32,
    pub architecture: ArchitectureConfig,
    pub parameters: NetworkParameters<T>,
    pub standardizer: Standardizer<T>,
    pub training_log: Option<TrainingLog>,
}

impl<T: Real> Checkpoint<T> {
    pub fn new(
        architecture: ArchitectureConfig,
        parameters: NetworkParameters<T>,
        standardizer: Standardizer<T>,
        training_log: Option<TrainingLog>,
    ) -> Result<Self> {
        parameters.check_against(&architecture)?;
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture,
            parameters,
            standardizer,
            training_log,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck: Self = serde_json::from_reader(f)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint {} v{}", ck.format, ck.version)));
        }
        ck.parameters.check_against(&ck.architecture)?;
        Ok(ck)
    }
}

/// Builds a training example from the inputs of one enhancement segment and
/// its target mask.
pub fn training_segment<T: Real>(
    cfg: &ArchitectureConfig,
    seg: &SegmentInput<'_, T>,
    target: Vec<T>,
) -> Result<TrainingSegment<T>> {
    let video = match (&seg.video, cfg.modality.uses_video()) {
        (Some(v), true) => Some(video_features(v, cfg.video_size)?),
        (None, true) => return Err(Error::Modality("segment without video".into())),
        (_, false) => None,
    };
    Ok(TrainingSegment { audio: audio_features(&seg.noisy)?, video, target })
}

/// Training examples from the complete 20-frame segments of one utterance,
/// with ideal amplitude masks as targets. The zero-padded tail segment is
/// skipped because its padding has no meaningful target.
pub fn utterance_segments<T: Real>(
    cfg: &ArchitectureConfig,
    clean: &Waveform<T>,
    noisy: &Waveform<T>,
    video: Option<&FrameSequence>,
    stft_cfg: &StftConfig<T>,
) -> Result<Vec<TrainingSegment<T>>> {
    if clean.len() != noisy.len() {
        return Err(Error::shape(clean.len(), noisy.len()));
    }
    let video = if cfg.modality.uses_video() {
        Some(video.ok_or_else(|| Error::Modality(format!("{} training needs video", cfg.modality)))?)
    } else {
        None
    };
    let cs = stft(&pad_to_frames(clean, stft_cfg), stft_cfg)?;
    let ns = stft(&pad_to_frames(noisy, stft_cfg), stft_cfg)?;
    let ceiling = T::lit(DEFAULT_CEILING);
    pair_segments(&ns, video)?
        .iter()
        .filter(|s| s.valid_frames == SEGMENT_FRAMES)
        .map(|s| {
            let mask = ideal_amplitude_mask(&cs.frames(s.start_frame, SEGMENT_FRAMES)?, &s.noisy, ceiling)?;
            training_segment(cfg, s, mask_to_network(&mask)?)
        })
        .collect()
}

pub struct NetworkEstimator<T = f64> {
    pub checkpoint: Checkpoint<T>,
    pub batch_size: usize,
}

impl<T: Real> NetworkEstimator<T> {
    pub fn new(checkpoint: Checkpoint<T>) -> Self {
        Self { checkpoint, batch_size: 32 }
    }
}

impl<T: Real> MaskEstimator<T> for NetworkEstimator<T> {
    fn modality(&self) -> Modality {
        self.checkpoint.architecture.modality
    }

    fn estimate(&self, segments: &[SegmentInput<'_, T>]) -> Result<Vec<AmplitudeMask<T>>> {
        let ck = &self.checkpoint;
        let cfg = &ck.architecture;
        let plane = super::MASK_BINS * SEGMENT_FRAMES;
        let mut out = Vec::with_capacity(segments.len());
        for chunk in segments.chunks(self.batch_size.max(1)) {
            let examples = chunk
                .iter()
                .map(|s| training_segment(cfg, s, vec![T::zero(); plane]))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&TrainingSegment<T>> = examples.iter().collect();
            let batch = super::data::make_batch(cfg, &ck.standardizer, &refs)?;
            let (y, _) = forward(&ck.parameters, cfg, &batch, Mode::Eval, 0)?;
            for b in y.data().chunks(plane) {
                out.push(mask_from_network(b, T::lit(DEFAULT_CEILING))?);
            }
        }
        Ok(out)
    }
}
