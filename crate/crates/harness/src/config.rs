//! Run configuration, read from one TOML file.
//!
//! ```toml
//! seed = 7
//! folds = 5
//! jobs = 1
//!
//! [data]
//! manifest = "corpus/manifest.jsonl"   # omit for synthetic mode
//!
//! [data.synthetic]
//! speakers = 4
//! sentences = 20
//!
//! [network]
//! scale = "desk"
//!
//! [training]
//! batch_size = 4
//! max_epochs = 10
//!
//! [evaluation]
//! systems = ["AV-L", "AV-NL"]          # default: all twelve
//! ```

use std::path::{Path, PathBuf};

use avse_core::mask::Modality;
use avse_core::nn::{ArchitectureConfig, TrainingConfig};
use avse_core::noise::DEFAULT_LPC_ORDER;
use serde::{Deserialize, Serialize};

use crate::synthetic::SyntheticCorpus;
use crate::systems::{condition_matrix, SystemName, SystemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of cross-validation folds.
    pub folds: usize,
    /// Folds to run in this invocation; all when absent.
    pub run_folds: Option<Vec<usize>>,
    /// Worker threads for independent jobs.
    pub jobs: usize,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub training: TrainingSection,
    pub evaluation: EvaluationConfig,
    pub noise: NoiseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            folds: 5,
            run_folds: None,
            jobs: 1,
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            training: TrainingSection::default(),
            evaluation: EvaluationConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Corpus manifest; synthetic mode when absent.
    pub manifest: Option<PathBuf>,
    /// Directory relative record paths resolve against.
    pub root: Option<PathBuf>,
    pub synthetic: SyntheticCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkScale {
    Full,
    #[default]
    Desk,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub scale: NetworkScale,
}

impl NetworkConfig {
    pub fn architecture(&self, modality: Modality) -> ArchitectureConfig {
        match self.scale {
            NetworkScale::Full => ArchitectureConfig::full(modality),
            NetworkScale::Desk => ArchitectureConfig::desk(modality),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr_init: f64,
    pub lr_factor: f64,
    /// Noisy mixtures drawn per training or validation sentence.
    pub mixtures_per_sentence: usize,
    /// Caps on the number of 20-frame segments; unlimited when absent.
    pub max_train_segments: Option<usize>,
    pub max_validation_segments: Option<usize>,
    /// Keep the trained networks under `checkpoints/` in the store.
    pub save_checkpoints: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::desk(0);
        Self {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            lr_init: t.lr_init,
            lr_factor: t.lr_factor,
            mixtures_per_sentence: 1,
            max_train_segments: None,
            max_validation_segments: None,
            save_checkpoints: true,
        }
    }
}

impl TrainingSection {
    pub fn training_config(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            lr_init: self.lr_init,
            lr_factor: self.lr_factor,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            seed,
            ..TrainingConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub systems: Option<Vec<SystemName>>,
    /// Score the unprocessed mixtures as a reference row.
    pub unprocessed: bool,
    /// Score ideal-amplitude-mask enhancement as an upper-bound row.
    pub oracle: bool,
    /// Test sentences per speaker and fold; all when absent.
    pub max_test_sentences: Option<usize>,
    /// Lombard and plain speech features for the per-speaker scatter.
    pub features: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { systems: None, unprocessed: true, oracle: true, max_test_sentences: None, features: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Saved LPC model; fitted on the corpus when absent.
    pub lpc_model: Option<PathBuf>,
    pub lpc_order: usize,
    /// Utterances pooled for the fitted model.
    pub fit_utterances: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { lpc_model: None, lpc_order: DEFAULT_LPC_ORDER, fit_utterances: 40 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.manifest, &mut cfg.data.root, &mut cfg.noise.lpc_model].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.folds < 2 {
            return bad(format!("folds = {} (need at least 2)", self.folds));
        }
        if let Some(f) = self.run_folds.iter().flatten().find(|&&f| f >= self.folds) {
            return bad(format!("run_folds names fold {f} of {}", self.folds));
        }
        if self.jobs == 0 || self.training.mixtures_per_sentence == 0 {
            return bad("jobs and mixtures_per_sentence must be positive".into());
        }
        if self.evaluation.systems.as_ref().is_some_and(Vec::is_empty) {
            return bad("empty system list".into());
        }
        self.training.training_config(0).validate()?;
        Ok(())
    }

    pub fn systems(&self) -> Vec<SystemSpec> {
        match &self.evaluation.systems {
            Some(list) => list.iter().map(|s| s.0).collect(),
            None => condition_matrix(),
        }
    }

    pub fn active_folds(&self) -> Vec<usize> {
        match &self.run_folds {
            Some(f) => {
                let mut f = f.clone();
                f.sort_unstable();
                f.dedup();
                f
            }
            None => (0..self.folds).collect(),
        }
    }

    /// Settings that must agree between runs sharing one store.
    pub fn fingerprint(&self) -> Self {
        Self { run_folds: None, jobs: 1, ..self.clone() }
    }
}
