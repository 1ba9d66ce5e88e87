//! Seeded session construction.
//!
//! MUSHRA: two sequences of eight trials. Each sequence draws four speakers,
//! and each of them gives one trial at -5 dB and one at 5 dB. A trial rates
//! the seven signals of one sentence, in random order, against the clean
//! reference.
//!
//! Intelligibility: the full factorial of 8 speakers, 4 SNRs and 5
//! conditions, split into two sequences of 80 single-stimulus trials. Cell
//! (speaker i, SNR s, condition c) goes to sequence (i + s + c) mod 2, so
//! each sequence holds every (SNR, condition) pair four times and every
//! speaker ten times. Order within a sequence is random.
//! Training sessions hold 40 stimuli drawn from the same pool.

use std::collections::{BTreeSet, HashSet};

use avse_core::grid::Keywords;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stimuli::{Condition, StimulusStore, INTELLIGIBILITY_SNRS, MUSHRA_SNRS};
use crate::{mix_seed, snr_key, Error, Result};

pub const MUSHRA_SEQUENCES: usize = 2;
pub const MUSHRA_SPEAKERS: usize = 4;
pub const INTELLIGIBILITY_SEQUENCES: usize = 2;
pub const INTELLIGIBILITY_SPEAKERS: usize = 8;
pub const TRAINING_TRIALS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    Mushra,
    Intelligibility,
    /// Familiarisation run; its responses never enter the analysis.
    Training,
}

impl SessionKind {
    fn tag(self) -> u64 {
        match self {
            SessionKind::Mushra => 1,
            SessionKind::Intelligibility => 2,
            SessionKind::Training => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MushraTrial {
    pub id: String,
    pub sequence: usize,
    pub speaker: String,
    pub sentence: String,
    pub snr_db: f64,
    /// Clean stimulus played as the open reference.
    pub reference: String,
    /// Stimulus ids in presentation order; `conditions[i]` names slot `i`.
    pub stimuli: Vec<String>,
    pub conditions: Vec<Condition>,
}

impl MushraTrial {
    /// Presentation slot of a condition.
    pub fn slot_of(&self, c: Condition) -> Option<usize> {
        self.conditions.iter().position(|&x| x == c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntelligibilityTrial {
    pub id: String,
    pub sequence: usize,
    pub speaker: String,
    pub sentence: String,
    pub snr_db: f64,
    pub condition: Condition,
    pub stimulus: String,
    pub keywords: Keywords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trial {
    Mushra(MushraTrial),
    Intelligibility(IntelligibilityTrial),
}

impl Trial {
    pub fn id(&self) -> &str {
        match self {
            Trial::Mushra(t) => &t.id,
            Trial::Intelligibility(t) => &t.id,
        }
    }

    pub fn sequence(&self) -> usize {
        match self {
            Trial::Mushra(t) => t.sequence,
            Trial::Intelligibility(t) => t.sequence,
        }
    }

    /// Every stimulus the trial can play.
    pub fn stimulus_ids(&self) -> Vec<&str> {
        match self {
            Trial::Mushra(t) => std::iter::once(t.reference.as_str()).chain(t.stimuli.iter().map(String::as_str)).collect(),
            Trial::Intelligibility(t) => vec![t.stimulus.as_str()],
        }
    }
}

/// An ordered trial list; sequences follow each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub kind: SessionKind,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

impl SessionPlan {
    pub fn build(kind: SessionKind, store: &StimulusStore, seed: u64) -> Result<Self> {
        match kind {
            SessionKind::Mushra => build_mushra_session(store, seed),
            SessionKind::Intelligibility => build_intelligibility_session(store, seed),
            SessionKind::Training => build_training_session(store, seed),
        }
    }
}

fn rng_for(kind: SessionKind, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(&[seed, kind.tag()]))
}

/// Opaque trial ids; they reveal nothing about the trial content.
fn fresh_id(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let id = format!("t{:016x}", rng.random::<u64>());
        if used.insert(id.clone()) {
            return id;
        }
    }
}

/// Stimulus ids of one sentence's MUSHRA signals in [`Condition::MUSHRA`]
/// order, if all of them exist.
fn mushra_material(store: &StimulusStore, speaker: &str, sentence: &str, snr: f64) -> Option<Vec<String>> {
    Condition::MUSHRA
        .iter()
        .map(|&c| {
            let s = match c {
                Condition::Reference => store.find(speaker, sentence, c, None),
                Condition::Anchor => store.anchor(speaker, sentence),
                _ => store.find(speaker, sentence, c, Some(snr)),
            };
            s.map(|s| s.id.clone())
        })
        .collect()
}

pub fn build_mushra_session(store: &StimulusStore, seed: u64) -> Result<SessionPlan> {
    let mut rng = rng_for(SessionKind::Mushra, seed);
    let candidates: Vec<(&str, Vec<Vec<&str>>)> = store
        .speakers()
        .into_iter()
        .map(|sp| {
            let per_snr = MUSHRA_SNRS
                .iter()
                .map(|&snr| store.sentences(sp).into_iter().filter(|se| mushra_material(store, sp, se, snr).is_some()).collect())
                .collect();
            (sp, per_snr)
        })
        .filter(|(_, per_snr): &(&str, Vec<Vec<&str>>)| per_snr.iter().all(|v| !v.is_empty()))
        .collect();
    if candidates.len() < MUSHRA_SPEAKERS {
        return Err(Error::Material(format!(
            "a MUSHRA sequence needs {MUSHRA_SPEAKERS} speakers with complete material at -5 and 5 dB; found {}",
            candidates.len()
        )));
    }

    let mut used = HashSet::new();
    let mut trials = Vec::new();
    for sequence in 0..MUSHRA_SEQUENCES {
        let mut seq = Vec::new();
        for (speaker, per_snr) in candidates.choose_multiple(&mut rng, MUSHRA_SPEAKERS) {
            let mut taken: Vec<&str> = Vec::new();
            for (&snr, sentences) in MUSHRA_SNRS.iter().zip(per_snr) {
                let fresh: Vec<&str> = sentences.iter().copied().filter(|s| !taken.contains(s)).collect();
                let pool = if fresh.is_empty() { sentences } else { &fresh };
                let sentence = *pool.choose(&mut rng).expect("non-empty sentence pool");
                taken.push(sentence);
                seq.push((speaker.to_string(), sentence.to_owned(), snr));
            }
        }
        seq.shuffle(&mut rng);
        for (speaker, sentence, snr) in seq {
            let ids = mushra_material(store, &speaker, &sentence, snr).expect("checked material");
            let mut order: Vec<usize> = (0..Condition::MUSHRA.len()).collect();
            order.shuffle(&mut rng);
            trials.push(Trial::Mushra(MushraTrial {
                id: fresh_id(&mut rng, &mut used),
                sequence,
                reference: ids[0].clone(),
                stimuli: order.iter().map(|&i| ids[i].clone()).collect(),
                conditions: order.iter().map(|&i| Condition::MUSHRA[i]).collect(),
                speaker,
                sentence,
                snr_db: snr,
            }));
        }
    }
    Ok(SessionPlan { kind: SessionKind::Mushra, seed, trials })
}

fn cell_sentences<'a>(store: &'a StimulusStore, speaker: &'a str, snr: f64, c: Condition) -> Vec<&'a str> {
    store.sentences(speaker).into_iter().filter(|se| store.find(speaker, se, c, Some(snr)).is_some()).collect()
}

fn cells() -> impl Iterator<Item = (f64, Condition)> {
    INTELLIGIBILITY_SNRS.into_iter().flat_map(|snr| Condition::INTELLIGIBILITY.into_iter().map(move |c| (snr, c)))
}

fn intelligibility_trial(
    store: &StimulusStore,
    rng: &mut ChaCha8Rng,
    used: &mut HashSet<String>,
    sequence: usize,
    (speaker, sentence, snr, condition): (&str, &str, f64, Condition),
) -> Trial {
    let s = store.find(speaker, sentence, condition, Some(snr)).expect("checked cell");
    Trial::Intelligibility(IntelligibilityTrial {
        id: fresh_id(rng, used),
        sequence,
        speaker: speaker.into(),
        sentence: sentence.into(),
        snr_db: snr,
        condition,
        stimulus: s.id.clone(),
        keywords: s.transcript.keywords(),
    })
}

pub fn build_intelligibility_session(store: &StimulusStore, seed: u64) -> Result<SessionPlan> {
    let mut rng = rng_for(SessionKind::Intelligibility, seed);
    let speakers: Vec<&str> = store
        .speakers()
        .into_iter()
        .filter(|sp| cells().any(|(snr, c)| !cell_sentences(store, sp, snr, c).is_empty()))
        .collect();
    let mut complete = Vec::new();
    let mut first_gap = None;
    for &sp in &speakers {
        match cells().find(|&(snr, c)| cell_sentences(store, sp, snr, c).is_empty()) {
            None => complete.push(sp),
            Some((snr, c)) => {
                first_gap.get_or_insert(format!("no {c} stimulus for speaker {sp} at {snr} dB"));
            }
        }
    }
    if complete.len() < INTELLIGIBILITY_SPEAKERS {
        let gap = first_gap.map(|g| format!("; missing cell: {g}")).unwrap_or_default();
        return Err(Error::Material(format!(
            "the intelligibility factorial needs {INTELLIGIBILITY_SPEAKERS} speakers with all {} cells; found {}{gap}",
            INTELLIGIBILITY_SNRS.len() * Condition::INTELLIGIBILITY.len(),
            complete.len()
        )));
    }

    let mut sequences: Vec<Vec<(&str, &str, f64, Condition)>> = vec![Vec::new(); INTELLIGIBILITY_SEQUENCES];
    for (i, &speaker) in complete.choose_multiple(&mut rng, INTELLIGIBILITY_SPEAKERS).enumerate() {
        // Spread the speaker's sentences over its 20 cells before reusing any.
        let mut heard: BTreeSet<&str> = BTreeSet::new();
        for (k, (snr, c)) in cells().enumerate() {
            let all = cell_sentences(store, speaker, snr, c);
            let fresh: Vec<&str> = all.iter().copied().filter(|s| !heard.contains(s)).collect();
            let pool = if fresh.is_empty() { &all } else { &fresh };
            let sentence = *pool.choose(&mut rng).expect("complete cell");
            heard.insert(sentence);
            let (s, c_idx) = (k / Condition::INTELLIGIBILITY.len(), k % Condition::INTELLIGIBILITY.len());
            sequences[(i + s + c_idx) % INTELLIGIBILITY_SEQUENCES].push((speaker, sentence, snr, c));
        }
    }
    let mut used = HashSet::new();
    let mut trials = Vec::new();
    for (sequence, mut seq) in sequences.into_iter().enumerate() {
        seq.shuffle(&mut rng);
        for cell in seq {
            trials.push(intelligibility_trial(store, &mut rng, &mut used, sequence, cell));
        }
    }
    Ok(SessionPlan { kind: SessionKind::Intelligibility, seed, trials })
}

pub fn build_training_session(store: &StimulusStore, seed: u64) -> Result<SessionPlan> {
    let mut rng = rng_for(SessionKind::Training, seed);
    let snrs: HashSet<i64> = INTELLIGIBILITY_SNRS.iter().map(|&v| snr_key(v)).collect();
    let mut pool: Vec<(&str, &str, f64, Condition)> = store
        .stimuli()
        .iter()
        .filter(|s| Condition::INTELLIGIBILITY.contains(&s.condition))
        .filter_map(|s| s.snr_db.filter(|v| snrs.contains(&snr_key(*v))).map(|v| (s.speaker.as_str(), s.sentence.as_str(), v, s.condition)))
        .collect();
    if pool.is_empty() {
        return Err(Error::Material("no intelligibility stimuli for a training session".into()));
    }
    let mut used = HashSet::new();
    let mut trials = Vec::with_capacity(TRAINING_TRIALS);
    while trials.len() < TRAINING_TRIALS {
        pool.shuffle(&mut rng);
        for &cell in pool.iter().take(TRAINING_TRIALS - trials.len()) {
            trials.push(intelligibility_trial(store, &mut rng, &mut used, 0, cell));
        }
    }
    Ok(SessionPlan { kind: SessionKind::Training, seed, trials })
}
