#![allow(dead_code)]

use avse_core::noise::{SpeakingStyle, SynthParams};
use avse_harness::{Gender, UtteranceRecord};

pub fn record(speaker: &str, sentence: usize, style: SpeakingStyle, usable: bool) -> UtteranceRecord {
    let gender = if speaker.trim_start_matches('s').parse::<usize>().unwrap_or(0) % 2 == 0 { Gender::F } else { Gender::M };
    UtteranceRecord {
        id: format!("{speaker}_{sentence:03}_{}", style.short().to_lowercase()),
        speaker: speaker.into(),
        gender,
        style,
        sentence: Some(format!("{speaker}_{sentence:03}")),
        transcript: format!("bin blue at f {} now", sentence % 10).parse().unwrap(),
        audio: None,
        video: None,
        landmarks: None,
        usable,
        synthetic: Some(SynthParams::new(sentence as u64, 1.0, 120.0, style)),
    }
}

/// `counts[i]` usable sentences (both readings) for speaker `s{i+1}`.
pub fn records(counts: &[usize]) -> Vec<UtteranceRecord> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| {
            let s = format!("s{}", i + 1);
            (0..n).flat_map(move |j| [SpeakingStyle::NonLombard, SpeakingStyle::Lombard].map(|st| record(&s, j, st, true)))
        })
        .collect()
}
