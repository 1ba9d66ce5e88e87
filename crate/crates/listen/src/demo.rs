//! A synthetic processed set for exercising the service without trained
//! systems. The four system conditions are ideal-mask enhancements with
//! different mask ceilings: they differ audibly but say nothing about the
//! real systems.

use avse_core::dsp::peak_normalize;
use avse_core::features::{render_mouth_frames, MOUTH_SIZE};
use avse_core::grid::{letters, Transcript, ADVERBS, COLOURS, COMMANDS, PREPOSITIONS};
use avse_core::mask::{enhance_utterance, EnhanceOptions, IdealMaskEstimator};
use avse_core::noise::{fit_lpc, generate_ssn, mix_at_snr, synth_utterance, SpeakingStyle, SynthParams, DEFAULT_LPC_ORDER};
use avse_core::StftConfig;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stimuli::{Condition, ProcessedSet, Rendering, INTELLIGIBILITY_SNRS, MUSHRA_SNRS};
use crate::{mix_seed, Result};

/// Mask ceilings standing in for AV-L, AV-NL, AO-L and AO-NL.
const STAND_INS: [(Condition, f64); 4] =
    [(Condition::AvL, 10.0), (Condition::AvNl, 2.0), (Condition::AoL, 1.5), (Condition::AoNl, 1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSpec {
    pub speakers: usize,
    pub sentences: usize,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for DemoSpec {
    fn default() -> Self {
        Self { speakers: 8, sentences: 3, duration_s: 1.5, seed: 0 }
    }
}

/// SNRs rendered for the demo: the intelligibility grid plus the MUSHRA pair.
pub fn demo_snrs() -> Vec<f64> {
    let mut v: Vec<f64> = INTELLIGIBILITY_SNRS.iter().chain(&MUSHRA_SNRS).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn random_transcript(rng: &mut ChaCha8Rng) -> Transcript {
    let letters: Vec<char> = letters().collect();
    Transcript::new(
        COMMANDS.choose(rng).expect("commands"),
        COLOURS.choose(rng).expect("colours"),
        PREPOSITIONS.choose(rng).expect("prepositions"),
        *letters.choose(rng).expect("letters"),
        rng.random_range(0..10),
        ADVERBS.choose(rng).expect("adverbs"),
    )
    .expect("grammar words")
}

pub fn demo_processed_set(spec: &DemoSpec) -> Result<ProcessedSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut set = ProcessedSet::default();
    let mut clean = Vec::new();
    for k in 0..spec.speakers {
        let speaker = format!("s{}", k + 1);
        let f0 = if k % 2 == 0 { 110.0 + 5.0 * k as f64 } else { 190.0 + 5.0 * k as f64 };
        for j in 0..spec.sentences {
            let sentence = format!("{speaker}_{j:02}");
            let p = SynthParams::new(mix_seed(&[spec.seed, k as u64, j as u64]), spec.duration_s, f0, SpeakingStyle::Lombard);
            let u = synth_utterance::<f64>(&p)?;
            let transcript = random_transcript(&mut rng);
            let audio = peak_normalize(&u.waveform)?;
            set.videos.insert((speaker.clone(), sentence.clone()), render_mouth_frames(&u.mouth_opening, MOUTH_SIZE)?);
            clean.push((speaker.clone(), sentence.clone(), transcript, audio));
        }
    }
    let noise = fit_lpc(&clean.iter().map(|c| c.3.clone()).collect::<Vec<_>>(), DEFAULT_LPC_ORDER)?;
    let cfg = StftConfig::speech_16k();
    for (i, (speaker, sentence, transcript, audio)) in clean.into_iter().enumerate() {
        let render = |condition, snr_db, audio, source: String| Rendering {
            speaker: speaker.clone(),
            sentence: sentence.clone(),
            transcript: transcript.clone(),
            condition,
            snr_db,
            audio,
            source,
        };
        for snr in demo_snrs() {
            let seed = mix_seed(&[spec.seed, i as u64, snr.to_bits()]);
            let n = generate_ssn(&noise, audio.duration_s() + 1.0, seed, audio.sample_rate())?;
            let mix = mix_at_snr(&audio, &n, snr, seed)?;
            for (c, ceiling) in STAND_INS {
                let est = IdealMaskEstimator::new(&audio, &cfg, ceiling)?;
                let out = enhance_utterance(&est, &mix.noisy, None, &EnhanceOptions::default())?;
                set.renderings.push(render(c, Some(snr), out, format!("demo stand-in: ideal mask, ceiling {ceiling}")));
            }
            set.renderings.push(render(Condition::Unprocessed, Some(snr), mix.noisy, "demo: synthetic mixture".into()));
        }
        set.renderings.push(render(Condition::Reference, None, audio, "demo: synthetic speech".into()));
    }
    Ok(set)
}
