#![allow(dead_code)]

use std::sync::OnceLock;

use avse_core::grid::Keywords;
use avse_listen::demo::{demo_processed_set, DemoSpec};
use avse_listen::sessions::{IntelligibilityTrial, MushraTrial, SessionKind, Trial};
use avse_listen::stimuli::{PrepareOptions, ProcessedSet, StimulusStore};
use avse_listen::store::{LoudnessProvenance, SessionHeader, SessionRecord};
use avse_listen::{prepare_stimuli, Condition};
use chrono::{TimeZone, Utc};
use tempfile::TempDir;

pub fn demo_spec() -> DemoSpec {
    DemoSpec { speakers: 8, sentences: 2, duration_s: 1.0, seed: 11 }
}

pub fn processed_set() -> &'static ProcessedSet {
    static SET: OnceLock<ProcessedSet> = OnceLock::new();
    SET.get_or_init(|| demo_processed_set(&demo_spec()).unwrap())
}

/// Prepared demo stimuli shared by the tests of one binary.
pub fn store() -> &'static StimulusStore {
    static STORE: OnceLock<(TempDir, StimulusStore)> = OnceLock::new();
    &STORE
        .get_or_init(|| {
            let dir = TempDir::new().unwrap();
            let store = prepare_stimuli(processed_set(), &PrepareOptions::default(), dir.path()).unwrap();
            (dir, store)
        })
        .1
}

pub fn prepare_variant(set: &ProcessedSet, opts: &PrepareOptions) -> (TempDir, StimulusStore) {
    let dir = TempDir::new().unwrap();
    let store = prepare_stimuli(set, opts, dir.path()).unwrap();
    (dir, store)
}

pub fn header(kind: SessionKind, subject: &str, trials: Vec<Trial>) -> SessionHeader {
    SessionHeader {
        session: format!("session-{subject}-{kind:?}"),
        subject: subject.into(),
        kind,
        seed: 0,
        created_at: Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap(),
        loudness: LoudnessProvenance { target_lufs: -23.0, stimuli: Default::default() },
        trials,
    }
}

/// A MUSHRA trial whose slots follow `Condition::MUSHRA` order.
pub fn mushra_trial(id: &str, snr_db: f64) -> Trial {
    Trial::Mushra(MushraTrial {
        id: id.into(),
        sequence: 0,
        speaker: "s1".into(),
        sentence: "x".into(),
        snr_db,
        reference: "clean".into(),
        stimuli: Condition::MUSHRA.iter().map(|c| if *c == Condition::Reference { "clean".into() } else { c.to_string() }).collect(),
        conditions: Condition::MUSHRA.to_vec(),
    })
}

pub fn keyword_trial(id: &str, snr_db: f64, condition: Condition, truth: Keywords) -> Trial {
    Trial::Intelligibility(IntelligibilityTrial {
        id: id.into(),
        sequence: 0,
        speaker: "s1".into(),
        sentence: "x".into(),
        snr_db,
        condition,
        stimulus: format!("{condition}_{snr_db}"),
        keywords: truth,
    })
}

pub fn at(second: u32) -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, second).unwrap()
}

pub fn record(h: SessionHeader) -> SessionRecord {
    SessionRecord::new(h)
}
