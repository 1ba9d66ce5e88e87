//! Session records and their append-only store.
//!
//! A session is one JSON-lines file `<dir>/<session>.jsonl`: a header event
//! followed by playback and response events. Each event is written as one
//! whole line and synced before it takes effect; a torn line left by a crash
//! is skipped on load. Training sessions are kept in memory only.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::responses::{validate, ResponsePayload, StoredResponse};
use crate::sessions::{SessionKind, SessionPlan, Trial};
use crate::stimuli::{Provenance, StimulusStore};
use crate::{Error, Result};

/// Slot name of the open MUSHRA reference.
pub const REFERENCE_SLOT: &str = "ref";
const SUBJECT_MAX_CHARS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Media {
    Audio,
    Video,
}

impl Media {
    pub fn label(self) -> &'static str {
        match self {
            Media::Audio => "audio",
            Media::Video => "video",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoudnessProvenance {
    pub target_lufs: f64,
    /// Per stimulus used by the session.
    pub stimuli: BTreeMap<String, Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session: String,
    /// Opaque subject token.
    pub subject: String,
    pub kind: SessionKind,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
    pub loudness: LoudnessProvenance,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Session(SessionHeader),
    Playback { trial: String, slot: String, media: Media, at: DateTime<Utc> },
    Response(StoredResponse),
}

/// A session's plan with everything that happened in it.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub header: SessionHeader,
    /// Playback and response events in arrival order.
    pub events: Vec<SessionEvent>,
    trial_index: HashMap<String, usize>,
    responses: HashMap<String, usize>,
    playbacks: HashSet<(String, String, Media)>,
}

impl SessionRecord {
    pub fn new(header: SessionHeader) -> Self {
        let trial_index = header.trials.iter().enumerate().map(|(i, t)| (t.id().to_owned(), i)).collect();
        Self { header, events: Vec::new(), trial_index, responses: HashMap::new(), playbacks: HashSet::new() }
    }

    pub fn id(&self) -> &str {
        &self.header.session
    }

    pub fn kind(&self) -> SessionKind {
        self.header.kind
    }

    pub fn trials(&self) -> &[Trial] {
        &self.header.trials
    }

    pub fn trial(&self, id: &str) -> Option<&Trial> {
        self.trial_index.get(id).map(|&i| &self.header.trials[i])
    }

    pub fn response(&self, trial: &str) -> Option<&StoredResponse> {
        match self.responses.get(trial).map(|&i| &self.events[i]) {
            Some(SessionEvent::Response(r)) => Some(r),
            _ => None,
        }
    }

    pub fn responses(&self) -> impl Iterator<Item = &StoredResponse> {
        self.events.iter().filter_map(|e| match e {
            SessionEvent::Response(r) => Some(r),
            _ => None,
        })
    }

    pub fn answered(&self) -> usize {
        self.responses.len()
    }

    pub fn is_complete(&self) -> bool {
        self.answered() == self.header.trials.len()
    }

    /// First unanswered trial in presentation order, with its position.
    pub fn next_trial(&self) -> Option<(usize, &Trial)> {
        self.header.trials.iter().enumerate().find(|(_, t)| !self.responses.contains_key(t.id()))
    }

    pub fn played(&self, trial: &str, slot: &str, media: Media) -> bool {
        self.playbacks.contains(&(trial.to_owned(), slot.to_owned(), media))
    }

    fn known_trial(&self, trial: &str) -> Result<&Trial> {
        self.trial(trial).ok_or_else(|| Error::UnknownTrial(trial.to_owned()))
    }

    /// Validates a response without storing it.
    pub fn check_response(&self, trial: &str, payload: &ResponsePayload, at: DateTime<Utc>) -> Result<SessionEvent> {
        let t = self.known_trial(trial)?;
        if let Some(r) = self.response(trial) {
            return Err(Error::Duplicate(format!("trial {trial} was already answered at {}", r.received_at.to_rfc3339())));
        }
        let answer = validate(t, payload)?;
        Ok(SessionEvent::Response(StoredResponse { trial: trial.to_owned(), received_at: at, answer }))
    }

    /// The stimulus behind a trial slot: `ref` or `0`-`6` for MUSHRA, `0`
    /// for intelligibility trials.
    pub fn resolve_slot(&self, trial: &str, slot: &str) -> Result<&str> {
        let t = self.known_trial(trial)?;
        let bad = || Error::UnknownTrial(format!("{trial} has no slot {slot:?}"));
        match t {
            Trial::Mushra(m) if slot == REFERENCE_SLOT => Ok(&m.reference),
            Trial::Mushra(m) => slot.parse::<usize>().ok().and_then(|i| m.stimuli.get(i)).map(String::as_str).ok_or_else(bad),
            Trial::Intelligibility(i) if slot == "0" => Ok(&i.stimulus),
            Trial::Intelligibility(_) => Err(bad()),
        }
    }

    /// The event recording a playback, if it needs recording. Intelligibility
    /// stimuli play once per medium; a repeat request is refused.
    pub fn check_playback(&self, trial: &str, slot: &str, media: Media, at: DateTime<Utc>) -> Result<Option<SessionEvent>> {
        self.resolve_slot(trial, slot)?;
        match self.known_trial(trial)? {
            Trial::Mushra(_) => Ok(None),
            Trial::Intelligibility(_) if self.played(trial, slot, media) => {
                Err(Error::Playback(format!("the {} of trial {trial} has already been played", media.label())))
            }
            Trial::Intelligibility(_) => Ok(Some(SessionEvent::Playback { trial: trial.to_owned(), slot: slot.to_owned(), media, at })),
        }
    }

    fn apply(&mut self, e: SessionEvent) {
        match &e {
            SessionEvent::Session(_) => return,
            SessionEvent::Playback { trial, slot, media, .. } => {
                self.playbacks.insert((trial.clone(), slot.clone(), *media));
            }
            SessionEvent::Response(r) => {
                self.responses.insert(r.trial.clone(), self.events.len());
            }
        }
        self.events.push(e);
    }

    /// Validates and stores a response in memory.
    pub fn record_response(&mut self, trial: &str, payload: &ResponsePayload, at: DateTime<Utc>) -> Result<StoredResponse> {
        let e = self.check_response(trial, payload, at)?;
        self.apply(e.clone());
        match e {
            SessionEvent::Response(r) => Ok(r),
            _ => unreachable!("check_response yields responses"),
        }
    }

    /// The session as line-delimited JSON: the header, then its events.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&SessionEvent::Session(self.header.clone()))?;
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Rebuilds a record from its JSON lines. Unreadable lines and events
    /// that do not fit the session are skipped with a warning.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut record: Option<Self> = None;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e: SessionEvent = match serde_json::from_str(line) {
                Ok(e) => e,
                Err(err) => {
                    log::warn!("skipping unreadable session line {}: {err}", n + 1);
                    continue;
                }
            };
            match (&mut record, e) {
                (None, SessionEvent::Session(h)) => record = Some(Self::new(h)),
                (None, _) => return Err(Error::Analysis("session log does not start with a header".into())),
                (Some(_), SessionEvent::Session(_)) => log::warn!("skipping second header on line {}", n + 1),
                (Some(r), e) => {
                    let fits = match &e {
                        SessionEvent::Response(s) => r.trial(&s.trial).is_some() && r.response(&s.trial).is_none(),
                        SessionEvent::Playback { trial, slot, .. } => r.resolve_slot(trial, slot).is_ok(),
                        SessionEvent::Session(_) => false,
                    };
                    if fits {
                        r.apply(e);
                    } else {
                        log::warn!("skipping session line {} that does not fit the session", n + 1);
                    }
                }
            }
        }
        record.ok_or_else(|| Error::Analysis("empty session log".into()))
    }
}

fn append(file: &mut File, e: &SessionEvent) -> Result<()> {
    let mut line = serde_json::to_vec(e)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

struct Entry {
    record: SessionRecord,
    /// `None` for sessions kept in memory only.
    file: Option<File>,
}

impl Entry {
    fn commit(&mut self, e: SessionEvent) -> Result<()> {
        if let Some(f) = &mut self.file {
            append(f, &e)?;
        }
        self.record.apply(e);
        Ok(())
    }
}

/// All sessions of a deployment. Each session has its own lock, so
/// sessions proceed concurrently while one session's events are serialised.
pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
}

fn open_log(path: &Path) -> Result<File> {
    let mut f = OpenOptions::new().read(true).append(true).open(path)?;
    let len = f.seek(SeekFrom::End(0))?;
    if len > 0 {
        let mut last = [0u8];
        f.seek(SeekFrom::Start(len - 1))?;
        f.read_exact(&mut last)?;
        if last[0] != b'\n' {
            f.write_all(b"\n")?;
            f.sync_data()?;
        }
    }
    Ok(f)
}

pub fn valid_subject(s: &str) -> bool {
    !s.is_empty() && s.len() <= SUBJECT_MAX_CHARS && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    /// Opens `dir`, creating it if needed, and loads every session log in it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "jsonl") {
                continue;
            }
            match SessionRecord::from_jsonl(&std::fs::read_to_string(&path)?) {
                Ok(record) => {
                    let file = Some(open_log(&path)?);
                    sessions.insert(record.id().to_owned(), Arc::new(Mutex::new(Entry { record, file })));
                }
                Err(e) => log::warn!("ignoring {}: {e}", path.display()),
            }
        }
        log::info!("{} sessions loaded from {}", sessions.len(), dir.display());
        Ok(Self { dir, sessions: RwLock::new(sessions) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>> {
        self.sessions.read().expect("session map lock").get(id).cloned().ok_or_else(|| Error::UnknownSession(id.to_owned()))
    }

    fn with<R>(&self, id: &str, f: impl FnOnce(&mut Entry) -> Result<R>) -> Result<R> {
        let e = self.entry(id)?;
        let mut guard = e.lock().expect("session lock");
        f(&mut guard)
    }

    /// Starts a session for `plan`. The subject token is generated unless
    /// given.
    pub fn create(&self, plan: SessionPlan, subject: Option<String>, stimuli: &StimulusStore) -> Result<SessionRecord> {
        let subject = match subject {
            Some(s) if valid_subject(&s) => s,
            Some(_) => return Err(Error::Invalid(format!("subject tokens are 1-{SUBJECT_MAX_CHARS} characters of A-Z, a-z, 0-9, - and _"))),
            None => uuid::Uuid::new_v4().simple().to_string(),
        };
        let used: BTreeMap<String, Provenance> = plan
            .trials
            .iter()
            .flat_map(Trial::stimulus_ids)
            .filter_map(|id| stimuli.get(id).map(|s| (id.to_owned(), s.provenance.clone())))
            .collect();
        let header = SessionHeader {
            session: uuid::Uuid::new_v4().simple().to_string(),
            subject,
            kind: plan.kind,
            seed: plan.seed,
            created_at: Utc::now(),
            loudness: LoudnessProvenance { target_lufs: stimuli.index().target_lufs, stimuli: used },
            trials: plan.trials,
        };
        let record = SessionRecord::new(header.clone());
        let file = if header.kind == SessionKind::Training {
            None
        } else {
            let mut f = OpenOptions::new().create_new(true).append(true).open(self.dir.join(format!("{}.jsonl", header.session)))?;
            append(&mut f, &SessionEvent::Session(header.clone()))?;
            Some(f)
        };
        self.sessions
            .write()
            .expect("session map lock")
            .insert(header.session.clone(), Arc::new(Mutex::new(Entry { record: record.clone(), file })));
        Ok(record)
    }

    pub fn snapshot(&self, id: &str) -> Result<SessionRecord> {
        self.with(id, |e| Ok(e.record.clone()))
    }

    pub fn record_response(&self, id: &str, trial: &str, payload: &ResponsePayload) -> Result<StoredResponse> {
        self.with(id, |e| {
            let ev = e.record.check_response(trial, payload, Utc::now())?;
            e.commit(ev.clone())?;
            match ev {
                SessionEvent::Response(r) => Ok(r),
                _ => unreachable!("check_response yields responses"),
            }
        })
    }

    /// Authorises one playback and returns the stimulus id to serve.
    pub fn register_playback(&self, id: &str, trial: &str, slot: &str, media: Media) -> Result<String> {
        self.with(id, |e| {
            if let Some(ev) = e.record.check_playback(trial, slot, media, Utc::now())? {
                e.commit(ev)?;
            }
            Ok(e.record.resolve_slot(trial, slot)?.to_owned())
        })
    }

    pub fn export(&self, id: &str) -> Result<String> {
        self.with(id, |e| e.record.to_jsonl())
    }

    /// Snapshots of every session.
    pub fn records(&self) -> Vec<SessionRecord> {
        let entries: Vec<_> = self.sessions.read().expect("session map lock").values().cloned().collect();
        let mut out: Vec<SessionRecord> = entries.iter().map(|e| e.lock().expect("session lock").record.clone()).collect();
        out.sort_by(|a, b| (a.header.created_at, a.id()).cmp(&(b.header.created_at, b.id())));
        out
    }
}
