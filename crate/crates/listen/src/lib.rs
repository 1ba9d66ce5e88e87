//! Listening-test backend: loudness-normalised stimuli, seeded MUSHRA and
//! keyword-intelligibility sessions, validated responses, keyword scoring,
//! nonparametric analysis and a versioned HTTP API.

pub mod analysis;
pub mod api;
pub mod demo;
pub mod responses;
pub mod sessions;
pub mod stimuli;
pub mod store;

pub use analysis::{analyze_sessions, ComparisonRow, ListeningReport, COMPARISONS};
pub use responses::{score_keywords, Answer, KeywordScore, ResponsePayload, StoredResponse};
pub use sessions::{
    build_intelligibility_session, build_mushra_session, build_training_session, IntelligibilityTrial, MushraTrial,
    SessionKind, SessionPlan, Trial,
};
pub use stimuli::{prepare_stimuli, Condition, PrepareOptions, ProcessedSet, Rendering, StimulusStore};
pub use store::{SessionRecord, SessionStore};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("stimulus: {0}")]
    Stimulus(String),
    #[error("insufficient material: {0}")]
    Material(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown trial {0}")]
    UnknownTrial(String),
    #[error("{0}")]
    Duplicate(String),
    #[error("invalid response: {0}")]
    Invalid(String),
    #[error("{0}")]
    Playback(String),
    #[error("analysis: {0}")]
    Analysis(String),
    #[error(transparent)]
    Core(#[from] avse_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Integer key for an SNR in dB, stable under float round trips.
pub(crate) fn snr_key(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

/// SplitMix64 fold of several seed components.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9E37_79B9_7F4A_7C15, |acc, &p| {
        let mut z = (acc ^ p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}
