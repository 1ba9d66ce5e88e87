//! Stimulus preparation. Every rendering is loudness-normalised to one
//! target, an anchor (the clean sentence in speech-shaped noise at -10 dB) is
//! generated per sentence, and the result is written to a directory:
//!
//! * `stimuli.json`: the index, with per-stimulus loudness provenance
//! * `audio/<id>.wav`: 32-bit float mono WAV
//! * `video/<speaker>_<sentence>.frames`: the sentence's mouth frames

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use avse_core::dsp::wav::{write_wav, WavEncoding};
use avse_core::dsp::{loudness_normalize, Loudness};
use avse_core::features::FrameSequence;
use avse_core::grid::Transcript;
use avse_core::noise::{fit_lpc, generate_ssn, mix_at_snr, DEFAULT_LPC_ORDER};
use avse_core::{LpcModel, Waveform};
use serde::{Deserialize, Serialize};

use crate::{mix_seed, snr_key, Error, Result};

pub const DEFAULT_TARGET_LUFS: f64 = -23.0;
pub const LOUDNESS_TOLERANCE_LU: f64 = 0.5;
pub const ANCHOR_SNR_DB: f64 = -10.0;
pub const MUSHRA_SNRS: [f64; 2] = [-5.0, 5.0];
pub const INTELLIGIBILITY_SNRS: [f64; 4] = [-20.0, -15.0, -10.0, -5.0];

const INDEX_FILE: &str = "stimuli.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    /// Clean speech: the open MUSHRA reference and its hidden copy.
    #[serde(rename = "reference")]
    Reference,
    #[serde(rename = "AO-L")]
    AoL,
    #[serde(rename = "AO-NL")]
    AoNl,
    #[serde(rename = "AV-L")]
    AvL,
    #[serde(rename = "AV-NL")]
    AvNl,
    #[serde(rename = "unprocessed")]
    Unprocessed,
    /// Unprocessed mixture at [`ANCHOR_SNR_DB`].
    #[serde(rename = "anchor")]
    Anchor,
}

impl Condition {
    pub const SYSTEMS: [Condition; 4] = [Condition::AoL, Condition::AoNl, Condition::AvL, Condition::AvNl];
    /// The seven rated signals of a MUSHRA trial.
    pub const MUSHRA: [Condition; 7] = [
        Condition::Reference,
        Condition::AoL,
        Condition::AoNl,
        Condition::AvL,
        Condition::AvNl,
        Condition::Unprocessed,
        Condition::Anchor,
    ];
    pub const INTELLIGIBILITY: [Condition; 5] =
        [Condition::Unprocessed, Condition::AoL, Condition::AoNl, Condition::AvL, Condition::AvNl];

    pub fn label(self) -> &'static str {
        match self {
            Condition::Reference => "reference",
            Condition::AoL => "AO-L",
            Condition::AoNl => "AO-NL",
            Condition::AvL => "AV-L",
            Condition::AvNl => "AV-NL",
            Condition::Unprocessed => "unprocessed",
            Condition::Anchor => "anchor",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One processed (or clean) version of a sentence.
#[derive(Debug, Clone)]
pub struct Rendering {
    pub speaker: String,
    pub sentence: String,
    pub transcript: Transcript,
    pub condition: Condition,
    /// Mixture SNR; `None` for the clean reference.
    pub snr_db: Option<f64>,
    pub audio: Waveform,
    /// Origin of the audio, kept in the provenance record.
    pub source: String,
}

#[derive(Debug, Clone, Default)]
pub struct ProcessedSet {
    pub renderings: Vec<Rendering>,
    /// Mouth frames per (speaker, sentence), shared by all its renderings.
    pub videos: BTreeMap<(String, String), FrameSequence>,
}

#[derive(Debug, Clone)]
pub struct PrepareOptions {
    pub target_lufs: f64,
    pub anchor_snr_db: f64,
    /// Anchor noise model; fitted on the clean references when absent.
    pub noise: Option<LpcModel>,
    pub lpc_order: usize,
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self { target_lufs: DEFAULT_TARGET_LUFS, anchor_snr_db: ANCHOR_SNR_DB, noise: None, lpc_order: DEFAULT_LPC_ORDER, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// Integrated loudness before and after the normalising gain.
    pub measured_lufs: f64,
    pub gain_db: f64,
    pub normalized_lufs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub id: String,
    pub speaker: String,
    pub sentence: String,
    pub transcript: Transcript,
    pub condition: Condition,
    pub snr_db: Option<f64>,
    /// Paths relative to the store directory.
    pub audio: PathBuf,
    pub video: Option<PathBuf>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub speaker: String,
    pub sentence: String,
    pub condition: Condition,
    pub snr_db: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusIndex {
    pub target_lufs: f64,
    pub anchor_snr_db: f64,
    pub noise_model: LpcModel,
    pub stimuli: Vec<Stimulus>,
    pub excluded: Vec<Excluded>,
}

type Key = (String, String, Condition, Option<i64>);

fn key(speaker: &str, sentence: &str, condition: Condition, snr_db: Option<f64>) -> Key {
    (speaker.to_owned(), sentence.to_owned(), condition, snr_db.map(snr_key))
}

/// A prepared stimulus directory.
#[derive(Debug, Clone)]
pub struct StimulusStore {
    dir: PathBuf,
    index: StimulusIndex,
    lookup: HashMap<Key, usize>,
    by_id: HashMap<String, usize>,
}

impl StimulusStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let index: StimulusIndex = serde_json::from_slice(&std::fs::read(dir.join(INDEX_FILE))?)?;
        Self::from_index(dir, index)
    }

    fn from_index(dir: PathBuf, index: StimulusIndex) -> Result<Self> {
        let mut lookup = HashMap::new();
        let mut by_id = HashMap::new();
        for (i, s) in index.stimuli.iter().enumerate() {
            if lookup.insert(key(&s.speaker, &s.sentence, s.condition, s.snr_db), i).is_some() || by_id.insert(s.id.clone(), i).is_some() {
                return Err(Error::Stimulus(format!("duplicate stimulus {}", s.id)));
            }
        }
        Ok(Self { dir, index, lookup, by_id })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn index(&self) -> &StimulusIndex {
        &self.index
    }

    pub fn stimuli(&self) -> &[Stimulus] {
        &self.index.stimuli
    }

    pub fn get(&self, id: &str) -> Option<&Stimulus> {
        self.by_id.get(id).map(|&i| &self.index.stimuli[i])
    }

    pub fn find(&self, speaker: &str, sentence: &str, condition: Condition, snr_db: Option<f64>) -> Option<&Stimulus> {
        self.lookup.get(&key(speaker, sentence, condition, snr_db)).map(|&i| &self.index.stimuli[i])
    }

    /// The anchor of a sentence.
    pub fn anchor(&self, speaker: &str, sentence: &str) -> Option<&Stimulus> {
        self.find(speaker, sentence, Condition::Anchor, Some(self.index.anchor_snr_db))
    }

    pub fn speakers(&self) -> BTreeSet<&str> {
        self.index.stimuli.iter().map(|s| s.speaker.as_str()).collect()
    }

    pub fn sentences(&self, speaker: &str) -> BTreeSet<&str> {
        self.index.stimuli.iter().filter(|s| s.speaker == speaker).map(|s| s.sentence.as_str()).collect()
    }

    pub fn audio_bytes(&self, s: &Stimulus) -> Result<Vec<u8>> {
        Ok(std::fs::read(self.dir.join(&s.audio))?)
    }

    pub fn video_bytes(&self, s: &Stimulus) -> Result<Option<Vec<u8>>> {
        s.video.as_ref().map(|v| Ok(std::fs::read(self.dir.join(v))?)).transpose()
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn stimulus_id(speaker: &str, sentence: &str, condition: Condition, snr_db: Option<f64>) -> String {
    let snr = match snr_db {
        None => "clean".to_owned(),
        Some(v) if v < 0.0 => format!("m{}", -v),
        Some(v) => format!("p{v}"),
    };
    format!("{}_{}_{}_{}", sanitize(speaker), sanitize(sentence), condition.label().to_ascii_lowercase().replace('-', ""), snr.replace('.', "d"))
}

fn check(set: &ProcessedSet) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in &set.renderings {
        let what = format!("{} {} {}", r.speaker, r.sentence, r.condition);
        match (r.condition, r.snr_db) {
            (Condition::Anchor, _) => return Err(Error::Stimulus(format!("{what}: anchors are generated, not supplied"))),
            (Condition::Reference, Some(_)) => return Err(Error::Stimulus(format!("{what}: the clean reference has no SNR"))),
            (Condition::Reference, None) => {}
            (_, Some(v)) if v.is_finite() => {}
            _ => return Err(Error::Stimulus(format!("{what}: a finite SNR is required"))),
        }
        if !seen.insert(key(&r.speaker, &r.sentence, r.condition, r.snr_db)) {
            return Err(Error::Stimulus(format!("{what} at {:?} dB supplied twice", r.snr_db)));
        }
    }
    Ok(())
}

/// Normalises every rendering to `opts.target_lufs`, adds one anchor per
/// clean reference and writes the store to `dir`. Renderings whose loudness
/// cannot be measured are left out, logged and listed in the index.
pub fn prepare_stimuli(set: &ProcessedSet, opts: &PrepareOptions, dir: impl AsRef<Path>) -> Result<StimulusStore> {
    let dir = dir.as_ref();
    check(set)?;
    let references: Vec<&Rendering> = set.renderings.iter().filter(|r| r.condition == Condition::Reference).collect();
    if references.is_empty() {
        return Err(Error::Stimulus("no clean references to derive anchors from".into()));
    }
    let noise = match &opts.noise {
        Some(m) => m.clone(),
        None => fit_lpc(&references.iter().map(|r| r.audio.clone()).collect::<Vec<_>>(), opts.lpc_order)?,
    };
    let mut anchors = Vec::with_capacity(references.len());
    for (i, r) in references.iter().enumerate() {
        let seed = mix_seed(&[opts.seed, i as u64]);
        let n = generate_ssn(&noise, r.audio.duration_s() + 1.0, seed, r.audio.sample_rate())?;
        let mix = mix_at_snr(&r.audio, &n, opts.anchor_snr_db, seed)?;
        anchors.push(Rendering {
            condition: Condition::Anchor,
            snr_db: Some(opts.anchor_snr_db),
            audio: mix.noisy,
            source: format!("{} in speech-shaped noise at {} dB", r.source, opts.anchor_snr_db),
            ..(*r).clone()
        });
    }

    std::fs::create_dir_all(dir.join("audio"))?;
    std::fs::create_dir_all(dir.join("video"))?;
    let mut videos: HashMap<(String, String), PathBuf> = HashMap::new();
    let mut stimuli = Vec::new();
    let mut excluded = Vec::new();
    for r in set.renderings.iter().chain(&anchors) {
        let normalized = match loudness_normalize(&r.audio, opts.target_lufs) {
            Ok((w, rep)) => match rep.integrated {
                Loudness::Measured(after) => Ok((w, rep.gain_applied_db, after)),
                Loudness::Unmeasurable => Err("unmeasurable after normalisation".to_owned()),
            },
            Err(e @ (avse_core::Error::Unmeasurable | avse_core::Error::TooShort { .. })) => Err(e.to_string()),
            Err(e) => return Err(e.into()),
        };
        let (w, gain_db, after) = match normalized {
            Ok(v) => v,
            Err(reason) => {
                log::warn!("excluding {} {} {} at {:?} dB: {reason}", r.speaker, r.sentence, r.condition, r.snr_db);
                excluded.push(Excluded {
                    speaker: r.speaker.clone(),
                    sentence: r.sentence.clone(),
                    condition: r.condition,
                    snr_db: r.snr_db,
                    reason,
                });
                continue;
            }
        };
        let id = stimulus_id(&r.speaker, &r.sentence, r.condition, r.snr_db);
        let audio = PathBuf::from("audio").join(format!("{id}.wav"));
        write_wav(dir.join(&audio), &w, WavEncoding::Float32)?;
        let vkey = (r.speaker.clone(), r.sentence.clone());
        let video = match (videos.get(&vkey), set.videos.get(&vkey)) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(frames)) => {
                let p = PathBuf::from("video").join(format!("{}_{}.frames", sanitize(&r.speaker), sanitize(&r.sentence)));
                frames.save(dir.join(&p))?;
                videos.insert(vkey, p.clone());
                Some(p)
            }
            (None, None) => None,
        };
        stimuli.push(Stimulus {
            id,
            speaker: r.speaker.clone(),
            sentence: r.sentence.clone(),
            transcript: r.transcript.clone(),
            condition: r.condition,
            snr_db: r.snr_db,
            audio,
            video,
            provenance: Provenance { source: r.source.clone(), measured_lufs: opts.target_lufs - gain_db, gain_db, normalized_lufs: after },
        });
    }
    let index = StimulusIndex { target_lufs: opts.target_lufs, anchor_snr_db: opts.anchor_snr_db, noise_model: noise, stimuli, excluded };
    let store = StimulusStore::from_index(dir.to_path_buf(), index)?;
    std::fs::write(dir.join(INDEX_FILE), serde_json::to_vec_pretty(store.index())?)?;
    log::info!("{} stimuli written to {}, {} excluded", store.stimuli().len(), dir.display(), store.index().excluded.len());
    Ok(store)
}
