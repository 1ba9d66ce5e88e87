//! Nonparametric statistics for feature analysis and listening tests.

mod correlation;
mod effect;
mod summary;
mod wilcoxon;

pub use correlation::{pearson, ranks, spearman, CorrelationReport};
pub use effect::{classify_effect, cliffs_delta, EffectMagnitude, EffectSizeReport};
pub use summary::{boxplot, fit_line, quantile, BoxStats, LineFit};
pub use wilcoxon::{bonferroni_threshold, wilcoxon_signed_rank, TestMethod, TestResult};
