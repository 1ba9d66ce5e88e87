mod common;

use std::collections::{BTreeMap, BTreeSet};

use avse_listen::sessions::{build_intelligibility_session, build_mushra_session, build_training_session, Trial};
use avse_listen::stimuli::PrepareOptions;
use avse_listen::{Condition, Error};
use common::{prepare_variant, processed_set, store};
use proptest::prelude::*;

fn mushra_checks(seed: u64) {
    let s = store();
    let plan = build_mushra_session(s, seed).unwrap();
    assert_eq!(plan.trials.len(), 16);
    for seq in 0..2 {
        let trials: Vec<_> = plan
            .trials
            .iter()
            .filter_map(|t| match t {
                Trial::Mushra(m) if m.sequence == seq => Some(m),
                _ => None,
            })
            .collect();
        assert_eq!(trials.len(), 8);
        let per_snr: BTreeMap<i64, usize> = trials.iter().fold(BTreeMap::new(), |mut m, t| {
            *m.entry(t.snr_db as i64).or_default() += 1;
            m
        });
        assert_eq!(per_snr, BTreeMap::from([(-5, 4), (5, 4)]));
        let speakers: BTreeSet<&str> = trials.iter().map(|t| t.speaker.as_str()).collect();
        assert_eq!(speakers.len(), 4);
        for sp in &speakers {
            let snrs: BTreeSet<i64> = trials.iter().filter(|t| t.speaker == *sp).map(|t| t.snr_db as i64).collect();
            assert_eq!(snrs, BTreeSet::from([-5, 5]));
        }
    }
    for t in &plan.trials {
        let Trial::Mushra(m) = t else { panic!("MUSHRA plan holds MUSHRA trials") };
        let set: BTreeSet<Condition> = m.conditions.iter().copied().collect();
        assert_eq!(set, Condition::MUSHRA.into_iter().collect());
        assert_eq!(m.conditions.len(), 7);
        assert_eq!(m.stimuli[m.slot_of(Condition::Reference).unwrap()], m.reference);
        for (id, &c) in m.stimuli.iter().zip(&m.conditions) {
            let st = s.get(id).unwrap();
            assert_eq!((st.condition, st.speaker.as_str(), st.sentence.as_str()), (c, m.speaker.as_str(), m.sentence.as_str()));
            let expected = match c {
                Condition::Reference => None,
                Condition::Anchor => Some(-10.0),
                _ => Some(m.snr_db),
            };
            assert_eq!(st.snr_db, expected);
        }
    }
}

#[test]
fn mushra_session_has_two_sequences_of_eight_complete_trials() {
    mushra_checks(1);
}

#[test]
fn intelligibility_session_realises_the_factorial() {
    let s = store();
    let plan = build_intelligibility_session(s, 5).unwrap();
    assert_eq!(plan.trials.len(), 160);
    let trials: Vec<_> = plan
        .trials
        .iter()
        .map(|t| match t {
            Trial::Intelligibility(i) => i,
            _ => panic!("intelligibility plan"),
        })
        .collect();
    let cells: BTreeSet<(&str, i64, Condition)> = trials.iter().map(|t| (t.speaker.as_str(), t.snr_db as i64, t.condition)).collect();
    assert_eq!(cells.len(), 160);
    for seq in 0..2 {
        let in_seq: Vec<_> = trials.iter().filter(|t| t.sequence == seq).collect();
        assert_eq!(in_seq.len(), 80);
        let mut per_cell: BTreeMap<(i64, Condition), usize> = BTreeMap::new();
        let mut per_speaker: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &in_seq {
            *per_cell.entry((t.snr_db as i64, t.condition)).or_default() += 1;
            *per_speaker.entry(&t.speaker).or_default() += 1;
        }
        assert_eq!(per_cell.len(), 20);
        assert!(per_cell.values().all(|&n| n == 4), "{per_cell:?}");
        assert_eq!(per_speaker.len(), 8);
        assert!(per_speaker.values().all(|&n| n == 10));
    }
    let mut per_cell: BTreeMap<(i64, Condition), usize> = BTreeMap::new();
    for t in &trials {
        *per_cell.entry((t.snr_db as i64, t.condition)).or_default() += 1;
        let st = s.get(&t.stimulus).unwrap();
        assert_eq!((st.condition, st.snr_db), (t.condition, Some(t.snr_db)));
        assert_eq!(st.transcript.keywords(), t.keywords);
    }
    assert!(per_cell.values().all(|&n| n == 8));
}

#[test]
fn sessions_are_reproducible_from_their_seed() {
    let s = store();
    assert_eq!(build_mushra_session(s, 9).unwrap(), build_mushra_session(s, 9).unwrap());
    assert_ne!(build_mushra_session(s, 9).unwrap(), build_mushra_session(s, 10).unwrap());
    assert_eq!(build_intelligibility_session(s, 9).unwrap(), build_intelligibility_session(s, 9).unwrap());
    assert_ne!(build_intelligibility_session(s, 9).unwrap().trials, build_intelligibility_session(s, 8).unwrap().trials);
    assert_eq!(build_training_session(s, 2).unwrap(), build_training_session(s, 2).unwrap());
}

#[test]
fn training_session_has_forty_stimuli() {
    let plan = build_training_session(store(), 0).unwrap();
    assert_eq!(plan.trials.len(), 40);
    let ids: BTreeSet<&str> = plan.trials.iter().map(Trial::id).collect();
    assert_eq!(ids.len(), 40);
    assert!(plan.trials.iter().all(|t| matches!(t, Trial::Intelligibility(i) if Condition::INTELLIGIBILITY.contains(&i.condition))));
}

#[test]
fn too_few_speakers_is_an_error() {
    let mut set = processed_set().clone();
    set.renderings.retain(|r| ["s1", "s2", "s3"].contains(&r.speaker.as_str()));
    let (_d, s) = prepare_variant(&set, &PrepareOptions::default());
    let e = build_mushra_session(&s, 0).unwrap_err();
    assert!(matches!(e, Error::Material(_)) && e.to_string().contains("found 3"), "{e}");
    assert!(matches!(build_intelligibility_session(&s, 0), Err(Error::Material(_))));
}

#[test]
fn missing_cell_is_named() {
    let mut set = processed_set().clone();
    set.renderings.retain(|r| !(r.speaker == "s4" && r.condition == Condition::AvNl && r.snr_db == Some(-15.0)));
    let (_d, s) = prepare_variant(&set, &PrepareOptions::default());
    let e = build_intelligibility_session(&s, 0).unwrap_err().to_string();
    assert!(e.contains("AV-NL") && e.contains("s4") && e.contains("-15 dB"), "{e}");
    // MUSHRA does not use -15 dB and is unaffected.
    assert!(build_mushra_session(&s, 0).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mushra_invariants_hold_for_any_seed(seed in any::<u64>()) {
        mushra_checks(seed);
    }

    #[test]
    fn trial_ids_are_unique_and_opaque(seed in any::<u64>()) {
        let plan = build_intelligibility_session(store(), seed).unwrap();
        let ids: BTreeSet<&str> = plan.trials.iter().map(Trial::id).collect();
        prop_assert_eq!(ids.len(), plan.trials.len());
        for t in &plan.trials {
            let Trial::Intelligibility(i) = t else { unreachable!() };
            prop_assert!(!t.id().contains(&i.speaker) && !t.id().contains(i.condition.label()));
        }
    }
}
