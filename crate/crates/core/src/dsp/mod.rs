//! Deterministic signal primitives shared by every downstream stage.

mod loudness;
mod stft;
mod waveform;
pub mod wav;

pub use loudness::{integrated_loudness, loudness_normalize, KWeighting, Loudness, LoudnessReport};
pub use stft::{hamming_periodic, istft, stft, ComplexSpectrogram, StftConfig};
pub use waveform::{peak_normalize, Waveform, DEFAULT_SAMPLE_RATE};
