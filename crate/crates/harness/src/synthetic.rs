//! Synthetic corpus: speakers fabricated from the speech-like generator,
//! each with its own F0 and Lombard shift, every sentence read in both
//! styles. Stands in for the licensed corpus in tests and desk runs.

use avse_core::grid::{self, Transcript};
use avse_core::noise::{LombardShift, SpeakingStyle, SynthParams};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::manifest::{Gender, UtteranceRecord};
use crate::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCorpus {
    pub speakers: usize,
    /// Sentences per speaker, each read in both styles.
    pub sentences: usize,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpus {
    fn default() -> Self {
        Self { speakers: 4, sentences: 20, duration_s: 2.0, seed: 0 }
    }
}

fn random_transcript(rng: &mut ChaCha8Rng) -> Transcript {
    let letters: Vec<char> = grid::letters().collect();
    Transcript::new(
        grid::COMMANDS.choose(rng).unwrap(),
        grid::COLOURS.choose(rng).unwrap(),
        grid::PREPOSITIONS.choose(rng).unwrap(),
        *letters.choose(rng).unwrap(),
        rng.random_range(0..10),
        grid::ADVERBS.choose(rng).unwrap(),
    )
    .expect("grammar words")
}

/// Manifest records for the synthetic corpus. Odd-numbered speakers are
/// male (F0 100-130 Hz, Lombard F0 shift 5-25 Hz), even-numbered female
/// (185-225 Hz, 10-50 Hz).
pub fn synthetic_records(c: &SyntheticCorpus) -> Vec<UtteranceRecord> {
    let mut out = Vec::with_capacity(c.speakers * c.sentences * 2);
    for s in 1..=c.speakers {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[c.seed, s as u64]));
        let gender = if s % 2 == 1 { Gender::M } else { Gender::F };
        let (f0, shift) = match gender {
            Gender::M => (rng.random_range(100.0..130.0), rng.random_range(5.0..25.0)),
            Gender::F => (rng.random_range(185.0..225.0), rng.random_range(10.0..50.0)),
        };
        let lombard = LombardShift {
            f0_offset_hz: shift,
            tilt_db: rng.random_range(3.0..8.0),
            aperture_gain: rng.random_range(0.05..0.4),
        };
        let speaker = format!("s{s}");
        for j in 0..c.sentences {
            let transcript = random_transcript(&mut rng);
            let sentence = format!("{speaker}_{j:03}");
            // Both readings share the articulation plan; only the style differs.
            let seed = mix_seed(&[c.seed, s as u64, j as u64]);
            for style in [SpeakingStyle::NonLombard, SpeakingStyle::Lombard] {
                let params = SynthParams { lombard, ..SynthParams::new(seed, c.duration_s, f0, style) };
                out.push(UtteranceRecord {
                    id: format!("{sentence}_{}", style.short().to_ascii_lowercase()),
                    speaker: speaker.clone(),
                    gender,
                    style,
                    sentence: Some(sentence.clone()),
                    transcript: transcript.clone(),
                    audio: None,
                    video: None,
                    landmarks: None,
                    usable: true,
                    synthetic: Some(params),
                });
            }
        }
    }
    out
}
