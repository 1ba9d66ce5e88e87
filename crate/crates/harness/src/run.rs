//! Cross-validated experiment runs with a resumable results store.
//!
//! A run directory holds `run.json` (configuration, fold plan, versions),
//! `results.jsonl` and, optionally, `checkpoints/`. Each finished job
//! appends a begin line, its score and feature lines and one job-status
//! line in a single write. Lines of a job without a later `done` status are ignored
//! when the store is read, so an interrupted run resumes by re-running
//! exactly the unfinished jobs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use avse_core::dsp::StftConfig;
use avse_core::features::{FrameSequence, estimate_f0, mouth_metrics, F0Config, UtteranceFeatures};
use avse_core::mask::{enhance_utterance, EnhanceOptions, IdealMaskEstimator, DEFAULT_CEILING};
use avse_core::metrics::estoi;
use avse_core::nn::{train, utterance_segments, Checkpoint, NetworkEstimator, TrainingLog, TrainingSegment};
use avse_core::noise::{fit_lpc, generate_ssn, mix_at_snr, LpcModel, SpeakingStyle};
use avse_core::Waveform;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::Corpus;
use crate::folds::{make_folds, FoldOptions, FoldPlan};
use crate::manifest::{load_manifest, Gender, Manifest};
use crate::synthetic::synthetic_records;
use crate::systems::{Condition, SystemSpec};
use crate::{mix_seed, Error, Result, DATA_ROOT_ENV};

pub const UNPROCESSED: &str = "unprocessed";
pub const ORACLE: &str = "oracle-IAM";
pub const ESTOI: &str = "estoi";

const TAG_TRAIN: u64 = 1;
const TAG_VALIDATION: u64 = 2;
const TAG_TEST: u64 = 3;
const TAG_INIT: u64 = 4;
const TAG_NOISE: u64 = 5;

/// One metric value of one system on one test mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub job: String,
    pub fold: usize,
    pub system: String,
    pub speaker: String,
    pub gender: Gender,
    pub sentence: String,
    pub style: SpeakingStyle,
    pub snr_db: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub job: String,
    pub id: String,
    pub gender: Gender,
    #[serde(flatten)]
    pub features: UtteranceFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job: String,
    pub status: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingLog>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StoreLine {
    /// Opens a job's batch; lines of an earlier unfinished attempt are dropped.
    Begin { job: String },
    Score(ResultRecord),
    Feature(FeatureRecord),
    Job(JobStatus),
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    harness_version: String,
    core_version: String,
    config: RunConfig,
    plan: FoldPlan,
    /// LPC model the test and training noise is generated from.
    noise_model: LpcModel,
}

/// Everything committed to a store, in a canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredResults {
    pub config: RunConfig,
    pub plan: FoldPlan,
    pub scores: Vec<ResultRecord>,
    pub features: Vec<FeatureRecord>,
    /// Latest status of every job that has reported one.
    pub jobs: BTreeMap<String, JobStatus>,
}

impl StoredResults {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let run: RunManifest = serde_json::from_slice(&std::fs::read(dir.join("run.json"))?)?;
        let mut pending: BTreeMap<String, (Vec<ResultRecord>, Vec<FeatureRecord>)> = BTreeMap::new();
        let mut committed = pending.clone();
        let mut jobs = BTreeMap::new();
        let text = match std::fs::read_to_string(dir.join("results.jsonl")) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        for (i, line) in lines.iter().enumerate() {
            let parsed: StoreLine = match serde_json::from_str(line) {
                Ok(p) => p,
                // A torn line from an interrupted append; its job has no
                // `done` status after it and will be re-run.
                Err(e) => {
                    log::warn!("skipping unreadable line {} of results.jsonl: {e}", i + 1);
                    continue;
                }
            };
            match parsed {
                StoreLine::Begin { job } => {
                    pending.remove(&job);
                }
                StoreLine::Score(r) => pending.entry(r.job.clone()).or_default().0.push(r),
                StoreLine::Feature(f) => pending.entry(f.job.clone()).or_default().1.push(f),
                StoreLine::Job(s) => {
                    let lines = pending.remove(&s.job).unwrap_or_default();
                    match s.status {
                        JobState::Done => committed.insert(s.job.clone(), lines),
                        JobState::Failed => committed.remove(&s.job),
                    };
                    jobs.insert(s.job.clone(), s);
                }
            }
        }
        let (mut scores, mut features): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
        for (s, f) in committed.into_values() {
            scores.extend(s);
            features.extend(f);
        }
        scores.sort_by(|a, b| {
            (&a.system, a.style, &a.metric, a.fold, &a.speaker, &a.sentence)
                .cmp(&(&b.system, b.style, &b.metric, b.fold, &b.speaker, &b.sentence))
                .then(a.snr_db.total_cmp(&b.snr_db))
        });
        features.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self { config: run.config, plan: run.plan, scores, features, jobs })
    }
}

/// Append-only writer for one run directory.
pub struct ResultsStore {
    dir: PathBuf,
    file: Mutex<std::fs::File>,
}

impl ResultsStore {
    fn open(dir: &Path, manifest: &RunManifest) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let run_path = dir.join("run.json");
        if run_path.exists() {
            let old: RunManifest = serde_json::from_slice(&std::fs::read(&run_path)?)?;
            if old.config.fingerprint() != manifest.config.fingerprint() || old.plan != manifest.plan {
                return Err(Error::Store(format!("{} holds a run with a different configuration", dir.display())));
            }
        } else {
            std::fs::write(&run_path, serde_json::to_vec_pretty(manifest)?)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(dir.join("results.jsonl"))?;
        let len = file.metadata()?.len();
        if len > 0 {
            let mut last = [0u8];
            file.seek(SeekFrom::Start(len - 1))?;
            file.read_exact(&mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }
        Ok(Self { dir: dir.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Jobs whose latest status is `done`.
    pub fn done_jobs(&self) -> Result<HashSet<String>> {
        let r = StoredResults::load(&self.dir)?;
        Ok(r.jobs.into_values().filter(|s| s.status == JobState::Done).map(|s| s.job).collect())
    }

    fn commit(&self, lines: &[StoreLine]) -> Result<()> {
        let mut buf = Vec::new();
        for l in lines {
            serde_json::to_writer(&mut buf, l)?;
            buf.push(b'\n');
        }
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&buf)?;
        f.sync_data()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub completed: Vec<String>,
    /// Jobs already done in the store.
    pub skipped: Vec<String>,
    /// `(job, error)` for jobs that failed in this invocation.
    pub failed: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Job {
    Features,
    Reference { fold: usize },
    System { fold: usize, spec: SystemSpec },
}

impl Job {
    fn id(&self) -> String {
        match self {
            Job::Features => "features".into(),
            Job::Reference { fold } => format!("fold{fold}/reference"),
            Job::System { fold, spec } => format!("fold{fold}/{spec}"),
        }
    }
}

struct JobOutput {
    scores: Vec<ResultRecord>,
    features: Vec<FeatureRecord>,
    training: Option<TrainingLog>,
}

/// Stable 64-bit key of a string (FNV-1a), for seed derivation.
fn key(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn style_key(s: SpeakingStyle) -> u64 {
    match s {
        SpeakingStyle::Lombard => 1,
        SpeakingStyle::NonLombard => 2,
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    corpus: &'a Corpus,
    plan: &'a FoldPlan,
    noise: &'a LpcModel,
    store: &'a ResultsStore,
    /// Union of the evaluation conditions of every configured system.
    conditions: Vec<Condition>,
}

fn load_corpus(cfg: &RunConfig) -> Result<Manifest> {
    match &cfg.data.manifest {
        Some(path) => {
            let root = cfg.data.root.clone().or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from));
            load_manifest(path, root.as_deref())
        }
        None => Manifest::from_records(synthetic_records(&cfg.data.synthetic)),
    }
}

/// Speech the noise model is fitted on: usable readings taken round-robin
/// over speakers in name order.
fn noise_model(cfg: &RunConfig, corpus: &Corpus) -> Result<LpcModel> {
    if let Some(p) = &cfg.noise.lpc_model {
        return Ok(LpcModel::load(p)?);
    }
    let mut by_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.manifest.records.iter().enumerate() {
        if r.usable {
            by_speaker.entry(&r.speaker).or_default().push(i);
        }
    }
    let depth = by_speaker.values().map(Vec::len).max().unwrap_or(0);
    let picks: Vec<usize> =
        (0..depth).flat_map(|d| by_speaker.values().filter_map(move |v| v.get(d).copied())).take(cfg.noise.fit_utterances.max(1)).collect();
    let speech = picks.iter().map(|&i| Ok((*corpus.waveform(i)?).clone())).collect::<Result<Vec<_>>>()?;
    Ok(fit_lpc(&speech, cfg.noise.lpc_order)?)
}

impl Context<'_> {
    fn mixture(&self, clean: &Waveform, snr_db: f64, seed: u64) -> Result<Waveform> {
        let dur = clean.duration_s() + 0.5;
        let noise = generate_ssn(self.noise, dur, mix_seed(&[seed, TAG_NOISE]), clean.sample_rate())?;
        Ok(mix_at_snr(clean, &noise, snr_db, seed)?.noisy)
    }

    fn test_items(&self, fold: usize) -> Vec<(&str, &str)> {
        let mut per_speaker: BTreeMap<&str, usize> = BTreeMap::new();
        let cap = self.cfg.evaluation.max_test_sentences.unwrap_or(usize::MAX);
        self.plan
            .test_items(fold)
            .into_iter()
            .filter(|(s, _)| {
                let n = per_speaker.entry(s).or_default();
                *n += 1;
                *n <= cap
            })
            .collect()
    }

    /// Calls `f` with every scored test mixture of a fold: the record,
    /// the clean and noisy signals, and the condition. Mixture seeds
    /// depend only on the sentence and condition, so all systems are
    /// scored on identical mixtures.
    fn for_each_test_mixture(
        &self,
        fold: usize,
        conditions: &[Condition],
        with_video: bool,
        mut f: impl FnMut(Scored<'_>) -> Result<()>,
    ) -> Result<()> {
        for (speaker, sentence) in self.test_items(fold) {
            for &(style, snr) in conditions {
                let Some((idx, rec)) = self.corpus.manifest.reading(speaker, sentence, style) else {
                    continue;
                };
                let clean = self.corpus.waveform(idx)?;
                let video = if with_video { self.corpus.video(idx)? } else { Default::default() };
                let seed = mix_seed(&[self.cfg.seed, TAG_TEST, key(speaker), key(sentence), style_key(style), snr.to_bits()]);
                let noisy = self.mixture(&clean, snr, seed)?;
                f(Scored { fold, rec, clean: &clean, video: video.as_ref().as_ref(), noisy: &noisy, style, snr })?;
            }
        }
        Ok(())
    }

    fn score(&self, job: &str, s: &Scored<'_>, system: &str, value: f64) -> ResultRecord {
        ResultRecord {
            job: job.to_string(),
            fold: s.fold,
            system: system.to_string(),
            speaker: s.rec.speaker.clone(),
            gender: s.rec.gender,
            sentence: s.rec.sentence_key(),
            style: s.style,
            snr_db: s.snr,
            metric: ESTOI.into(),
            value,
        }
    }

    fn run_job(&self, job: &Job) -> Result<JobOutput> {
        match job {
            Job::Features => self.features_job(),
            Job::Reference { fold } => self.reference_job(*fold),
            Job::System { fold, spec } => self.system_job(*fold, spec),
        }
    }

    fn features_job(&self) -> Result<JobOutput> {
        let evaluable: BTreeSet<&str> = self.plan.evaluable_speakers().map(|(s, _)| s).collect();
        let mut features = Vec::new();
        for (i, r) in self.corpus.manifest.records.iter().enumerate() {
            if !r.usable || !evaluable.contains(r.speaker.as_str()) {
                continue;
            }
            let f0 = estimate_f0(&*self.corpus.waveform(i)?, &F0Config::default())?.hz();
            let mouth = self.corpus.landmarks(i)?.as_deref().map(mouth_metrics).transpose().unwrap_or_else(|e| {
                log::info!("{}: no mouth metrics ({e})", r.id);
                None
            });
            features.push(FeatureRecord {
                job: Job::Features.id(),
                id: r.id.clone(),
                gender: r.gender,
                features: UtteranceFeatures {
                    speaker: r.speaker.clone(),
                    style: r.style,
                    f0_hz: f0,
                    mouth_aperture: mouth.map(|m| m.aperture),
                    mouth_spreading: mouth.map(|m| m.spreading),
                },
            });
        }
        Ok(JobOutput { scores: Vec::new(), features, training: None })
    }

    fn reference_job(&self, fold: usize) -> Result<JobOutput> {
        let id = Job::Reference { fold }.id();
        let stft = StftConfig::speech_16k();
        let mut scores = Vec::new();
        self.for_each_test_mixture(fold, &self.conditions, false, |s| {
            if self.cfg.evaluation.unprocessed {
                scores.push(self.score(&id, &s, UNPROCESSED, estoi(s.clean, s.noisy)?));
            }
            if self.cfg.evaluation.oracle {
                let ideal = IdealMaskEstimator::new(s.clean, &stft, DEFAULT_CEILING)?;
                let out = enhance_utterance(&ideal, s.noisy, None, &EnhanceOptions::default())?;
                scores.push(self.score(&id, &s, ORACLE, estoi(s.clean, &out)?));
            }
            Ok(())
        })?;
        Ok(JobOutput { scores, features: Vec::new(), training: None })
    }

    /// Segments of noisy mixtures of `items` under the system's training
    /// conditions, `mixtures_per_sentence` draws each, visited in a seeded
    /// order until `cap` segments are collected.
    fn segments(&self, fold: usize, spec: &SystemSpec, items: &[(&str, &str)], tag: u64, cap: Option<usize>) -> Result<Vec<TrainingSegment>> {
        let arch = self.cfg.network.architecture(spec.modality);
        let stft = StftConfig::speech_16k();
        let conditions = spec.training_conditions();
        let mut draws: Vec<(&str, &str, usize)> =
            items.iter().flat_map(|&(s, t)| (0..self.cfg.training.mixtures_per_sentence).map(move |d| (s, t, d))).collect();
        draws.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(&[self.cfg.seed, tag, fold as u64])));
        let cap = cap.unwrap_or(usize::MAX);
        let mut out = Vec::new();
        for (speaker, sentence, d) in draws {
            if out.len() >= cap {
                break;
            }
            let seed = mix_seed(&[self.cfg.seed, tag, fold as u64, key(speaker), key(sentence), d as u64]);
            let (style, snr) = conditions[(seed % conditions.len() as u64) as usize];
            let Some((idx, _)) = self.corpus.manifest.reading(speaker, sentence, style) else {
                continue;
            };
            let clean = self.corpus.waveform(idx)?;
            let video = if spec.modality.uses_video() { self.corpus.video(idx)? } else { Default::default() };
            let noisy = self.mixture(&clean, snr, seed)?;
            out.extend(utterance_segments(&arch, &clean, &noisy, video.as_ref().as_ref(), &stft)?);
        }
        out.truncate(cap);
        Ok(out)
    }

    fn system_job(&self, fold: usize, spec: &SystemSpec) -> Result<JobOutput> {
        let id = Job::System { fold, spec: *spec }.id();
        let arch = self.cfg.network.architecture(spec.modality);
        let t = &self.cfg.training;
        let train_set = self.segments(fold, spec, &self.plan.train_items(fold), TAG_TRAIN, t.max_train_segments)?;
        let val_set = self.segments(fold, spec, &self.plan.validation_items(fold), TAG_VALIDATION, t.max_validation_segments)?;
        log::info!("{id}: training on {} segments, validating on {}", train_set.len(), val_set.len());
        let tcfg = t.training_config(mix_seed(&[self.cfg.seed, TAG_INIT, fold as u64]));
        let outcome = train(&arch, &tcfg, &train_set, &val_set)?;
        drop((train_set, val_set));
        let log = outcome.log.clone();
        let ck = Checkpoint::new(arch, outcome.params, outcome.standardizer, Some(outcome.log))?;
        if t.save_checkpoints {
            let dir = self.store.dir().join("checkpoints");
            std::fs::create_dir_all(&dir)?;
            ck.save(dir.join(format!("fold{fold}_{}.json", spec.name().replace("(w)", "_w"))))?;
        }
        let est = NetworkEstimator::new(ck);
        let name = spec.name();
        let mut scores = Vec::new();
        self.for_each_test_mixture(fold, &spec.evaluation_conditions(), spec.modality.uses_video(), |s| {
            let out = enhance_utterance(&est, s.noisy, s.video, &EnhanceOptions::default())?;
            scores.push(self.score(&id, &s, &name, estoi(s.clean, &out)?));
            Ok(())
        })?;
        Ok(JobOutput { scores, features: Vec::new(), training: Some(log) })
    }
}

struct Scored<'a> {
    fold: usize,
    rec: &'a crate::manifest::UtteranceRecord,
    clean: &'a Waveform,
    video: Option<&'a FrameSequence>,
    noisy: &'a Waveform,
    style: SpeakingStyle,
    snr: f64,
}

/// Runs every unfinished job of the configured folds and systems, writing
/// to the store at `dir`. Failed jobs are recorded and the run continues.
pub fn run_experiment(cfg: &RunConfig, dir: impl AsRef<Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let manifest = load_corpus(cfg)?;
    let plan = make_folds(&manifest, &FoldOptions { k: cfg.folds, seed: cfg.seed, ..FoldOptions::default() })?;
    let corpus = Corpus::new(manifest);
    let noise = noise_model(cfg, &corpus)?;
    let run = RunManifest {
        harness_version: env!("CARGO_PKG_VERSION").into(),
        core_version: avse_core::VERSION.into(),
        config: cfg.clone(),
        plan,
        noise_model: noise,
    };
    let store = ResultsStore::open(dir.as_ref(), &run)?;
    let systems = cfg.systems();
    let mut conditions: Vec<Condition> = systems.iter().flat_map(SystemSpec::evaluation_conditions).collect();
    conditions.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    conditions.dedup();

    let mut jobs = Vec::new();
    if cfg.evaluation.features {
        jobs.push(Job::Features);
    }
    for fold in cfg.active_folds() {
        if cfg.evaluation.unprocessed || cfg.evaluation.oracle {
            jobs.push(Job::Reference { fold });
        }
        jobs.extend(systems.iter().map(|&spec| Job::System { fold, spec }));
    }
    let done = store.done_jobs()?;
    let mut summary = RunSummary::default();
    let (skip, todo): (Vec<Job>, Vec<Job>) = jobs.into_iter().partition(|j| done.contains(&j.id()));
    summary.skipped = skip.iter().map(Job::id).collect();

    let ctx = Context { cfg, corpus: &corpus, plan: &run.plan, noise: &run.noise_model, store: &store, conditions };
    let next = AtomicUsize::new(0);
    let outcomes = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..cfg.jobs.min(todo.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = todo.get(i) else { break };
                let id = job.id();
                log::info!("{id}: started");
                let result = ctx.run_job(job).and_then(|out| {
                    let mut lines = vec![StoreLine::Begin { job: id.clone() }];
                    lines.extend(out.scores.into_iter().map(StoreLine::Score));
                    lines.extend(out.features.into_iter().map(StoreLine::Feature));
                    lines.push(StoreLine::Job(JobStatus { job: id.clone(), status: JobState::Done, error: None, training: out.training }));
                    store.commit(&lines)
                });
                let outcome = match result {
                    Ok(()) => Ok(Ok(())),
                    Err(e) => {
                        log::error!("{id}: failed: {e}");
                        let status = JobStatus { job: id.clone(), status: JobState::Failed, error: Some(e.to_string()), training: None };
                        store.commit(&[StoreLine::Job(status)]).map(|_| Err(e.to_string()))
                    }
                };
                outcomes.lock().unwrap_or_else(|p| p.into_inner()).push((i, id, outcome));
            });
        }
    });
    let mut outcomes = outcomes.into_inner().unwrap_or_else(|p| p.into_inner());
    outcomes.sort_by_key(|o| o.0);
    for (_, id, outcome) in outcomes {
        match outcome {
            Ok(Ok(())) => summary.completed.push(id),
            Ok(Err(e)) => summary.failed.push((id, e)),
            Err(store_err) => return Err(store_err),
        }
    }
    Ok(summary)
}
