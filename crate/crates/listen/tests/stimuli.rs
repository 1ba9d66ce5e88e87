mod common;

use std::collections::BTreeMap;

use avse_core::dsp::wav::{read_wav, ReadOptions};
use avse_core::dsp::{integrated_loudness, Loudness};
use avse_core::Waveform;
use avse_listen::stimuli::{PrepareOptions, StimulusStore, LOUDNESS_TOLERANCE_LU};
use avse_listen::{prepare_stimuli, Condition, Error, ProcessedSet};
use common::{prepare_variant, processed_set, store};

fn remeasure(store: &StimulusStore, target: f64) {
    for s in store.stimuli() {
        let w = read_wav::<f64>(store.dir().join(&s.audio), ReadOptions::default()).unwrap();
        let lufs = integrated_loudness(&w).unwrap().integrated.lufs().expect("measurable");
        assert!((lufs - target).abs() <= LOUDNESS_TOLERANCE_LU, "{}: {lufs} LUFS", s.id);
        assert!((s.provenance.normalized_lufs - lufs).abs() < 1e-3, "{} provenance", s.id);
        assert!((s.provenance.measured_lufs + s.provenance.gain_db - target).abs() < 1e-9);
    }
}

#[test]
fn every_stimulus_is_within_half_a_lu_of_target_on_disk() {
    remeasure(store(), -23.0);
    assert_eq!(store().index().target_lufs, -23.0);
}

#[test]
fn target_is_configurable() {
    let mut set = processed_set().clone();
    set.renderings.retain(|r| r.speaker == "s1");
    let (_d, s) = prepare_variant(&set, &PrepareOptions { target_lufs: -30.0, ..PrepareOptions::default() });
    remeasure(&s, -30.0);
}

#[test]
fn one_anchor_per_sentence_at_minus_10_db() {
    let s = store();
    let mut anchors: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for st in s.stimuli().iter().filter(|x| x.condition == Condition::Anchor) {
        assert_eq!(st.snr_db, Some(-10.0));
        *anchors.entry((&st.speaker, &st.sentence)).or_default() += 1;
    }
    let references = s.stimuli().iter().filter(|x| x.condition == Condition::Reference).count();
    assert_eq!(anchors.len(), references);
    assert!(anchors.values().all(|&n| n == 1));
    assert_eq!(references, 16);
}

#[test]
fn anchor_is_the_reference_in_noise_at_minus_10_db() {
    // Undo both normalising gains and compare the residual with the clean signal.
    let s = store();
    let a = s.anchor("s2", "s2_01").unwrap();
    let r = s.find("s2", "s2_01", Condition::Reference, None).unwrap();
    let load = |p| read_wav::<f64>(s.dir().join(p), ReadOptions::default()).unwrap();
    let gain = |g: f64| 10f64.powf(-g / 20.0);
    let anchor = load(&a.audio).scaled(gain(a.provenance.gain_db));
    let clean = load(&r.audio).scaled(gain(r.provenance.gain_db));
    let noise: Vec<f64> = anchor.samples().iter().zip(clean.samples()).map(|(x, c)| x - c).collect();
    let snr = avse_core::noise::measured_snr_db(&clean, &Waveform::from_samples(noise).unwrap());
    assert!((snr + 10.0).abs() < 0.01, "anchor SNR {snr}");
}

#[test]
fn silent_rendering_is_excluded_and_listed() {
    let mut set: ProcessedSet = processed_set().clone();
    set.renderings.retain(|r| r.speaker == "s1");
    let victim = set.renderings.iter_mut().find(|r| r.condition == Condition::AvL && r.snr_db == Some(-5.0)).unwrap();
    victim.audio = Waveform::zeros(victim.audio.len(), 16_000);
    let (sentence, total) = (victim.sentence.clone(), set.renderings.len());
    let (_d, s) = prepare_variant(&set, &PrepareOptions::default());
    assert_eq!(s.index().excluded.len(), 1);
    let e = &s.index().excluded[0];
    assert_eq!((e.condition, e.snr_db, e.sentence.as_str()), (Condition::AvL, Some(-5.0), sentence.as_str()));
    assert!(s.find("s1", &sentence, Condition::AvL, Some(-5.0)).is_none());
    // The other renderings and one anchor per sentence survive.
    assert_eq!(s.stimuli().len(), total - 1 + 2);
    assert!(matches!(integrated_loudness(&Waveform::zeros(16_000, 16_000)).unwrap().integrated, Loudness::Unmeasurable));
}

#[test]
fn supplied_anchor_or_duplicate_is_rejected() {
    let mut set = processed_set().clone();
    set.renderings.truncate(30);
    let mut dup = set.clone();
    dup.renderings.push(dup.renderings[0].clone());
    let dir = tempfile::TempDir::new().unwrap();
    assert!(matches!(prepare_stimuli(&dup, &PrepareOptions::default(), dir.path()), Err(Error::Stimulus(_))));
    let mut anchored = set.clone();
    anchored.renderings[0].condition = Condition::Anchor;
    let e = prepare_stimuli(&anchored, &PrepareOptions::default(), dir.path()).unwrap_err();
    assert!(e.to_string().contains("anchors are generated"), "{e}");
}

#[test]
fn store_reopens_identically_and_shares_video_per_sentence() {
    let s = store();
    let again = StimulusStore::open(s.dir()).unwrap();
    assert_eq!(again.index(), s.index());
    let a = s.find("s3", "s3_00", Condition::AoL, Some(-20.0)).unwrap();
    let b = s.find("s3", "s3_00", Condition::Unprocessed, Some(5.0)).unwrap();
    assert_eq!(a.video, b.video);
    assert!(s.video_bytes(a).unwrap().is_some());
    assert_eq!(s.get(&a.id), Some(a));
}
