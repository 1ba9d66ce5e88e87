//! Speaker-stratified k-fold plans over sentences.
//!
//! Each evaluable speaker's sentences are shuffled and dealt into `k` test
//! chunks of near-equal size. For fold `f` the test set is chunk `f`; the
//! remaining sentences, read starting after chunk `f`, give the validation
//! share first and the training set after it. With 50 sentences this is
//! 35 / 5 / 10 per fold. Train-only speakers put every sentence in training.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::manifest::{Eligibility, Gender, Manifest};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldOptions {
    pub k: usize,
    pub seed: u64,
    /// Share of the non-test sentences used for validation (5 of 40).
    pub validation_share: f64,
}

impl Default for FoldOptions {
    fn default() -> Self {
        Self { k: 5, seed: 0, validation_share: 0.125 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerPlan {
    pub gender: Gender,
    pub eligibility: Eligibility,
    /// One split per fold.
    pub folds: Vec<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub speakers: BTreeMap<String, SpeakerPlan>,
}

impl FoldPlan {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn evaluable_speakers(&self) -> impl Iterator<Item = (&str, &SpeakerPlan)> {
        self.speakers.iter().filter(|(_, p)| p.eligibility == Eligibility::Evaluable).map(|(s, p)| (s.as_str(), p))
    }

    fn items(&self, fold: usize, pick: impl Fn(&Split) -> &Vec<String>) -> Vec<(&str, &str)> {
        self.speakers
            .iter()
            .flat_map(|(s, p)| p.folds.get(fold).map(|f| pick(f).iter().map(move |x| (s.as_str(), x.as_str()))).into_iter().flatten())
            .collect()
    }

    /// `(speaker, sentence)` pairs in the training split of a fold.
    pub fn train_items(&self, fold: usize) -> Vec<(&str, &str)> {
        self.items(fold, |f| &f.train)
    }

    pub fn validation_items(&self, fold: usize) -> Vec<(&str, &str)> {
        self.items(fold, |f| &f.validation)
    }

    pub fn test_items(&self, fold: usize) -> Vec<(&str, &str)> {
        self.items(fold, |f| &f.test)
    }
}

pub fn make_folds(manifest: &Manifest, opts: &FoldOptions) -> Result<FoldPlan> {
    if opts.k < 2 {
        return Err(Error::Plan(format!("need at least 2 folds, got {}", opts.k)));
    }
    if !(0.0..1.0).contains(&opts.validation_share) {
        return Err(Error::Plan(format!("validation share {} outside [0, 1)", opts.validation_share)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut speakers = BTreeMap::new();
    for (name, info) in &manifest.speakers {
        let mut eligibility = info.eligibility;
        if eligibility == Eligibility::Discarded {
            continue;
        }
        let mut items = manifest.usable_sentences(name);
        items.shuffle(&mut rng);
        if eligibility == Eligibility::Evaluable && items.len() < opts.k {
            log::warn!("speaker {name}: {} sentences cannot fill {} test sets; demoted to train-only", items.len(), opts.k);
            eligibility = Eligibility::TrainOnly;
        }
        let folds = match eligibility {
            Eligibility::Evaluable => deal(&items, opts),
            _ => vec![Split { train: items, ..Split::default() }; opts.k],
        };
        speakers.insert(name.clone(), SpeakerPlan { gender: info.gender, eligibility, folds });
    }
    if !speakers.values().any(|p| p.eligibility == Eligibility::Evaluable) {
        return Err(Error::Plan("no evaluable speaker".into()));
    }
    Ok(FoldPlan { k: opts.k, seed: opts.seed, speakers })
}

fn deal(items: &[String], opts: &FoldOptions) -> Vec<Split> {
    let (n, k) = (items.len(), opts.k);
    let bounds: Vec<usize> = (0..=k).map(|f| f * (n / k) + f.min(n % k)).collect();
    (0..k)
        .map(|f| {
            let test = items[bounds[f]..bounds[f + 1]].to_vec();
            let rest: Vec<String> = items[bounds[f + 1]..].iter().chain(&items[..bounds[f]]).cloned().collect();
            let v = (opts.validation_share * rest.len() as f64).round() as usize;
            let v = if rest.len() >= 2 { v.clamp(1, rest.len() - 1) } else { 0 };
            Split { validation: rest[..v].to_vec(), train: rest[v..].to_vec(), test }
        })
        .collect()
}
