//! Objective intelligibility scoring and score aggregation.

mod aggregate;
mod estoi;
mod external;
mod resample;

pub use aggregate::{aggregate, ConditionAggregate};
pub use estoi::{estoi, ESTOI_MIN_FRAMES, ESTOI_SAMPLE_RATE};
pub use external::{ExternalMetric, ExternalScore};
pub use resample::resample;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Estoi,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub name: MetricName,
    pub value: f64,
    /// Utterance the score belongs to.
    pub pair_id: String,
    /// Tool identity for external metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
}
