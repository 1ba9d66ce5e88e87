//! Lombard feature extraction: F0, mouth aperture and spreading, mouth
//! crops, and per-speaker Lombard-minus-plain deltas.

mod deltas;
mod f0;
mod mouth;
pub mod video;

pub use deltas::{speaker_deltas, DeltaInputs, SpeakerFeatureDelta, SystemScore, UtteranceFeatures};
pub use f0::{estimate_f0, F0Config, F0Estimate};
pub use mouth::{mouth_metrics, read_landmarks, write_landmarks, LandmarkFrame, MouthMetrics};
pub use video::{crop_mouth, mouth_radii, render_mouth_frames, FrameSequence, GrayImage, FACE_SIZE, MOUTH_SIZE};
