use serde::{Deserialize, Serialize};

use super::ops::ConvGeometry;
use crate::mask::{Modality, SEGMENT_FRAMES, VIDEO_FRAMES_PER_SEGMENT};
use crate::{Error, Result};

pub const MASK_BINS: usize = 321;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub geometry: ConvGeometry,
    /// 2x2 max pooling after the activation (video encoder only).
    #[serde(default)]
    pub pool: bool,
}

impl ConvLayerSpec {
    const fn new(out_channels: usize, kernel: [usize; 2], stride: [usize; 2], padding: [usize; 2], pool: bool) -> Self {
        Self { out_channels, geometry: ConvGeometry { kernel, stride, padding }, pool }
    }
}

/// Which hidden layers are followed by batch normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BatchNormPlacement {
    /// Audio and video encoder layers only.
    #[default]
    Encoders,
    /// Every hidden layer, including the dense and decoder layers.
    AllHidden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub modality: Modality,
    /// Frequency extent after zero-padding the 321 mask bins.
    pub padded_bins: usize,
    pub audio_encoder: Vec<ConvLayerSpec>,
    pub video_encoder: Vec<ConvLayerSpec>,
    /// Side of the square mouth crop fed to the video encoder.
    pub video_size: usize,
    pub dropout: f64,
    /// Widths of the three dense layers; the last must equal the flattened
    /// size of the deepest audio activation.
    pub fusion: Vec<usize>,
    /// 1-based audio encoder layers whose outputs are concatenated into the
    /// input of the mirroring decoder layer.
    pub skip_links: Vec<usize>,
    pub leaky_slope: f64,
    #[serde(default)]
    pub batch_norm: BatchNormPlacement,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

fn audio_plan(channels: [usize; 6]) -> Vec<ConvLayerSpec> {
    channels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i < 2 {
                ConvLayerSpec::new(c, [4, 4], [2, 2], [1, 1], false)
            } else {
                ConvLayerSpec::new(c, [4, 3], [2, 1], [1, 1], false)
            }
        })
        .collect()
}

fn video_plan(channels: [usize; 6], pools: [bool; 6]) -> Vec<ConvLayerSpec> {
    channels.iter().zip(pools).map(|(&c, p)| ConvLayerSpec::new(c, [3, 3], [1, 1], [1, 1], p)).collect()
}

impl ArchitectureConfig {
    /// 64-256 channel plan with 128x128 mouth crops.
    pub fn full(modality: Modality) -> Self {
        let mut cfg = Self {
            modality,
            padded_bins: 384,
            audio_encoder: audio_plan([64, 128, 256, 256, 256, 256]),
            video_encoder: video_plan([64, 128, 256, 256, 256, 256], [true; 6]),
            video_size: 128,
            dropout: 0.25,
            fusion: vec![1024, 1024, 0],
            skip_links: vec![1, 3, 5],
            leaky_slope: 0.2,
            batch_norm: BatchNormPlacement::Encoders,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        };
        cfg.fusion[2] = cfg.bottleneck_len();
        cfg
    }

    /// 8-32 channel plan with 32x32 crops, small enough for CPU training.
    pub fn desk(modality: Modality) -> Self {
        let mut cfg = Self {
            audio_encoder: audio_plan([8, 16, 32, 32, 32, 32]),
            video_encoder: video_plan([8, 16, 32, 32, 32, 32], [true, true, true, true, true, false]),
            video_size: 32,
            fusion: vec![256, 256, 0],
            ..Self::full(modality)
        };
        cfg.fusion[2] = cfg.bottleneck_len();
        cfg
    }

    /// `[C, F, T]` of the input and of every audio encoder output.
    pub fn audio_shapes(&self) -> Result<Vec<[usize; 3]>> {
        let mut shapes = vec![[1, self.padded_bins, SEGMENT_FRAMES]];
        for l in &self.audio_encoder {
            let [_, f, t] = *shapes.last().unwrap();
            let [fo, to] = l.geometry.conv_out([f, t])?;
            shapes.push([l.out_channels, fo, to]);
        }
        Ok(shapes)
    }

    pub fn video_shapes(&self) -> Result<Vec<[usize; 3]>> {
        let mut shapes = vec![[VIDEO_FRAMES_PER_SEGMENT, self.video_size, self.video_size]];
        for l in &self.video_encoder {
            let [_, h, w] = *shapes.last().unwrap();
            let [mut ho, mut wo] = l.geometry.conv_out([h, w])?;
            if l.pool {
                (ho, wo) = (ho / 2, wo / 2);
            }
            if ho == 0 || wo == 0 {
                return Err(Error::InvalidArgument("video encoder pools the crop away".into()));
            }
            shapes.push([l.out_channels, ho, wo]);
        }
        Ok(shapes)
    }

    pub fn bottleneck_len(&self) -> usize {
        self.audio_shapes().ok().and_then(|s| s.last().map(|[c, f, t]| c * f * t)).unwrap_or(0)
    }

    /// Length of the concatenated encoder outputs entering the dense layers.
    pub fn fusion_input_len(&self) -> Result<usize> {
        let mut n = 0;
        if self.modality.uses_audio() {
            n += self.bottleneck_len();
        }
        if self.modality.uses_video() {
            let [c, h, w] = *self.video_shapes()?.last().unwrap();
            n += c * h * w;
        }
        Ok(n)
    }

    pub fn uses_skip(&self, layer: usize) -> bool {
        self.modality.uses_audio() && self.skip_links.contains(&layer)
    }

    /// Input and output channels of decoder layer `j` (0-based), which
    /// mirrors audio encoder layer `6 - j` (1-based).
    pub fn decoder_channels(&self, j: usize) -> (usize, usize) {
        let k = self.audio_encoder.len() - j;
        let shapes = self.audio_shapes().expect("validated config");
        let mut cin = shapes[k][0];
        if self.uses_skip(k) && k != self.audio_encoder.len() {
            cin += shapes[k][0];
        }
        (cin, shapes[k - 1][0])
    }

    /// Whether the dense and non-final decoder layers are normalised.
    pub fn normalizes_hidden(&self) -> bool {
        self.batch_norm == BatchNormPlacement::AllHidden
    }

    pub fn validate(&self) -> Result<()> {
        if self.audio_encoder.len() != 6 {
            return Err(Error::InvalidArgument(format!("need 6 audio encoder layers, got {}", self.audio_encoder.len())));
        }
        if self.modality.uses_video() && self.video_encoder.len() != 6 {
            return Err(Error::InvalidArgument(format!("need 6 video encoder layers, got {}", self.video_encoder.len())));
        }
        if self.padded_bins < MASK_BINS {
            return Err(Error::InvalidArgument("padded frequency extent below 321 bins".into()));
        }
        if self.fusion.len() != 3 || self.fusion.contains(&0) {
            return Err(Error::InvalidArgument("need three nonzero dense widths".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        let shapes = self.audio_shapes()?;
        for (k, l) in self.audio_encoder.iter().enumerate() {
            let [_, f, t] = shapes[k + 1];
            if l.geometry.transpose_out([f, t])? != [shapes[k][1], shapes[k][2]] {
                return Err(Error::InvalidArgument(format!(
                    "audio layer {} cannot be mirrored exactly: {:?} -> {:?}",
                    k + 1,
                    &shapes[k][1..],
                    [f, t]
                )));
            }
        }
        if self.skip_links.iter().any(|&k| k == 0 || k >= self.audio_encoder.len()) {
            return Err(Error::InvalidArgument("skip links must name encoder layers 1-5".into()));
        }
        if self.fusion[2] != self.bottleneck_len() {
            return Err(Error::shape(self.bottleneck_len(), self.fusion[2]));
        }
        if self.modality.uses_video() {
            self.video_shapes()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_shapes() {
        let c = ArchitectureConfig::desk(Modality::Av);
        c.validate().unwrap();
        let a = c.audio_shapes().unwrap();
        assert_eq!(a[1], [8, 192, 10]);
        assert_eq!(a[2], [16, 96, 5]);
        assert_eq!(a[6], [32, 6, 5]);
        assert_eq!(c.video_shapes().unwrap()[6], [32, 1, 1]);
        assert_eq!(c.fusion_input_len().unwrap(), 960 + 32);
        // Decoder layer mirroring encoder 5 takes its skip: 32 + 32 channels.
        assert_eq!(c.decoder_channels(1), (64, 32));
        assert_eq!(c.decoder_channels(5), (16, 1));
    }

    #[test]
    fn full_scale_validates() {
        for m in [Modality::Vo, Modality::Ao, Modality::Av] {
            ArchitectureConfig::full(m).validate().unwrap();
        }
        assert_eq!(ArchitectureConfig::full(Modality::Av).video_shapes().unwrap()[6], [256, 2, 2]);
    }

    #[test]
    fn video_only_has_no_skips() {
        let c = ArchitectureConfig::desk(Modality::Vo);
        assert_eq!(c.decoder_channels(1), (32, 32));
        assert_eq!(c.fusion_input_len().unwrap(), 32);
    }

    #[test]
    fn broken_mirror_rejected() {
        let mut c = ArchitectureConfig::desk(Modality::Ao);
        c.padded_bins = 321;
        assert!(c.validate().is_err());
    }
}
