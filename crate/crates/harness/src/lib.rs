//! Experiment orchestration: corpus manifests, stratified folds, the
//! twelve-system condition matrix, resumable experiment runs and reports.

pub mod config;
pub mod corpus;
pub mod folds;
pub mod manifest;
pub mod report;
pub mod run;
pub mod synthetic;
pub mod systems;

pub use config::RunConfig;
pub use folds::{make_folds, FoldOptions, FoldPlan, SpeakerPlan, Split};
pub use manifest::{load_manifest, parse_manifest, write_manifest, Eligibility, Gender, Manifest, SpeakerInfo, UtteranceRecord};
pub use report::{report, Report};
pub use run::{run_experiment, ResultRecord, ResultsStore, RunSummary, StoredResults};
pub use systems::{condition_matrix, SystemSpec};

use thiserror::Error;

/// Environment variable naming the directory that relative manifest and
/// record paths are resolved against.
pub const DATA_ROOT_ENV: &str = "AVSE_DATA_ROOT";

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("manifest line {line} (record {id}): {reason}")]
    Record { line: usize, id: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fold plan: {0}")]
    Plan(String),

    #[error("results store: {0}")]
    Store(String),

    #[error(transparent)]
    Core(#[from] avse_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

/// Derives an independent seed from a list of integers (SplitMix64 steps).
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9E37_79B9_7F4A_7C15, |acc, &p| {
        let mut z = (acc ^ p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}
