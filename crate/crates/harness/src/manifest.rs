//! Line-delimited JSON corpus manifests.
//!
//! One record per line:
//!
//! ```text
//! {"id": "s2_l_bbaf2n", "speaker": "s2", "gender": "f", "style": "lombard",
//!  "sentence": "bbaf2n", "transcript": "bin blue at f 2 now",
//!  "audio": "s2/lombard/bbaf2n.wav", "video": "s2/lombard/bbaf2n.frames",
//!  "landmarks": "s2/lombard/bbaf2n.jsonl", "usable": true}
//! ```
//!
//! `sentence` links the Lombard and plain readings of one sentence and
//! defaults to the transcript. Paths are relative to the data root.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use avse_core::grid::Transcript;
use avse_core::noise::{SpeakingStyle, SynthParams};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Share of the largest per-speaker sentence count a speaker must have to
/// take part in evaluation (45 of 50).
pub const EVALUABLE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    M,
    F,
}

impl Gender {
    pub fn label(self) -> &'static str {
        match self {
            Gender::M => "m",
            Gender::F => "f",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub speaker: String,
    pub gender: Gender,
    pub style: SpeakingStyle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    pub transcript: Transcript,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<PathBuf>,
    #[serde(default = "usable_default")]
    pub usable: bool,
    /// Generator settings for records fabricated in synthetic mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SynthParams>,
}

fn usable_default() -> bool {
    true
}

impl UtteranceRecord {
    pub fn sentence_key(&self) -> String {
        self.sentence.clone().unwrap_or_else(|| self.transcript.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eligibility {
    Evaluable,
    /// Too little usable data for a full fold share; used for training only.
    TrainOnly,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerInfo {
    pub gender: Gender,
    pub usable_sentences: usize,
    pub eligibility: Eligibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<UtteranceRecord>,
    pub speakers: BTreeMap<String, SpeakerInfo>,
    /// Directory relative record paths are resolved against.
    pub root: Option<PathBuf>,
    readings: HashMap<(String, String, SpeakingStyle), usize>,
}

impl Manifest {
    pub fn from_records(records: Vec<UtteranceRecord>) -> Result<Self> {
        Self::with_fraction(records, EVALUABLE_FRACTION)
    }

    pub fn with_fraction(records: Vec<UtteranceRecord>, fraction: f64) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut genders: BTreeMap<&str, Gender> = BTreeMap::new();
        let mut readings = HashSet::new();
        let mut texts: BTreeMap<(&str, String), &Transcript> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let bad = |reason: String| Error::Record { line: i + 1, id: r.id.clone(), reason };
            if r.id.is_empty() || r.speaker.is_empty() {
                return Err(bad("empty id or speaker".into()));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(bad("duplicate record id".into()));
            }
            if let Some(g) = genders.insert(&r.speaker, r.gender) {
                if g != r.gender {
                    return Err(bad(format!("speaker {} was listed as {} earlier", r.speaker, g.label())));
                }
            }
            let key = r.sentence_key();
            if !readings.insert((r.speaker.as_str(), key.clone(), r.style)) {
                return Err(bad(format!("second {} reading of sentence {key}", r.style.short())));
            }
            if let Some(t) = texts.insert((&r.speaker, key.clone()), &r.transcript) {
                if *t != r.transcript {
                    return Err(bad(format!("sentence {key} has transcripts {t:?} and {:?}", r.transcript.to_string())));
                }
            }
            if r.usable && r.audio.is_none() && r.synthetic.is_none() {
                return Err(bad("usable record without audio".into()));
            }
        }

        let mut usable: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
        for r in &records {
            let set = usable.entry(&r.speaker).or_default();
            if r.usable {
                set.insert(r.sentence_key());
            }
        }
        let nominal = usable.values().map(BTreeSet::len).max().unwrap_or(0);
        let needed = ((fraction * nominal as f64).ceil() as usize).max(1);
        let speakers = usable
            .iter()
            .map(|(&s, set)| {
                let n = set.len();
                let eligibility = match n {
                    0 => Eligibility::Discarded,
                    n if n < needed => Eligibility::TrainOnly,
                    _ => Eligibility::Evaluable,
                };
                if eligibility != Eligibility::Evaluable {
                    log::info!("speaker {s}: {n} usable sentences (need {needed}), {eligibility:?}");
                }
                (s.to_string(), SpeakerInfo { gender: genders[s], usable_sentences: n, eligibility })
            })
            .collect();
        let readings = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.usable)
            .map(|(i, r)| ((r.speaker.clone(), r.sentence_key(), r.style), i))
            .collect();
        Ok(Self { records, speakers, root: None, readings })
    }

    pub fn evaluable_speakers(&self) -> Vec<&str> {
        self.speakers_with(Eligibility::Evaluable)
    }

    pub fn speakers_with(&self, e: Eligibility) -> Vec<&str> {
        self.speakers.iter().filter(|(_, i)| i.eligibility == e).map(|(s, _)| s.as_str()).collect()
    }

    /// Sorted keys of a speaker's sentences with at least one usable reading.
    pub fn usable_sentences(&self, speaker: &str) -> Vec<String> {
        let set: BTreeSet<String> =
            self.records.iter().filter(|r| r.speaker == speaker && r.usable).map(UtteranceRecord::sentence_key).collect();
        set.into_iter().collect()
    }

    /// The usable reading of a sentence in one style.
    pub fn reading(&self, speaker: &str, sentence: &str, style: SpeakingStyle) -> Option<(usize, &UtteranceRecord)> {
        let i = *self.readings.get(&(speaker.to_string(), sentence.to_string(), style))?;
        Some((i, &self.records[i]))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::Record { line: i + 1, id: "?".into(), reason: e.to_string() })?;
        let id = value.get("id").and_then(|v| v.as_str()).unwrap_or("?").to_string();
        let rec: UtteranceRecord =
            serde_json::from_value(value).map_err(|e| Error::Record { line: i + 1, id, reason: e.to_string() })?;
        records.push(rec);
    }
    Manifest::from_records(records)
}

/// Reads and validates a manifest. Relative record paths resolve against
/// `data_root` when given, else against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>, data_root: Option<&Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let mut m = parse_manifest(&std::fs::read_to_string(path)?)?;
    m.root = Some(match data_root {
        Some(r) => r.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    });
    Ok(m)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[UtteranceRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}
