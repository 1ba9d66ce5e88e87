//! Loading utterance material (audio, mouth frames, landmarks) for manifest
//! records, from disk or from the synthetic generator.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use avse_core::dsp::wav::{read_wav, write_wav, ReadOptions, WavEncoding};
use avse_core::dsp::peak_normalize;
use avse_core::features::{crop_mouth, mouth_radii, read_landmarks, render_mouth_frames, write_landmarks, FrameSequence, LandmarkFrame, FACE_SIZE, MOUTH_SIZE};
use avse_core::noise::synth_utterance;
use avse_core::Waveform;

use crate::manifest::{write_manifest, Manifest, UtteranceRecord};
use crate::synthetic::{synthetic_records, SyntheticCorpus};
use crate::{Error, Result};

/// Landmarks of the synthetic mouth drawn for each opening value.
pub fn synthetic_landmarks(opening: &[f64], size: usize) -> Vec<LandmarkFrame> {
    let c = (size as f64 - 1.0) / 2.0;
    opening
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            let (rx, ry) = mouth_radii(o, size);
            LandmarkFrame::new(i, [c, c - ry], [c, c + ry], [c - rx, c], [c + rx, c])
        })
        .collect()
}

fn mouth_crops(seq: FrameSequence) -> Result<FrameSequence> {
    match (seq.height, seq.width) {
        (MOUTH_SIZE, MOUTH_SIZE) => Ok(seq),
        (FACE_SIZE, FACE_SIZE) => {
            let frames = seq.frames.iter().map(crop_mouth).collect::<avse_core::Result<Vec<_>>>()?;
            Ok(FrameSequence { fps_milli: seq.fps_milli, ..FrameSequence::new(MOUTH_SIZE, MOUTH_SIZE, frames)? })
        }
        (h, w) => Err(Error::Config(format!("frames of {h}x{w}; expected {MOUTH_SIZE}x{MOUTH_SIZE} crops or {FACE_SIZE}x{FACE_SIZE} faces"))),
    }
}

fn with_context<T>(rec: &UtteranceRecord, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Store(format!("record {}: {e}", rec.id)))
}

/// The record's speech; audio from disk is peak-normalised.
pub fn load_waveform(manifest: &Manifest, rec: &UtteranceRecord) -> Result<Waveform> {
    with_context(rec, (|| {
        if let Some(p) = &rec.synthetic {
            return Ok(synth_utterance::<f64>(p)?.waveform);
        }
        let audio = rec.audio.as_ref().ok_or_else(|| Error::Config("no audio path".into()))?;
        Ok(peak_normalize(&read_wav::<f64>(manifest.resolve(audio), ReadOptions::default())?)?)
    })())
}

/// The record's 128x128 mouth crops, if it has video.
pub fn load_video(manifest: &Manifest, rec: &UtteranceRecord) -> Result<Option<FrameSequence>> {
    with_context(rec, (|| {
        if let Some(p) = &rec.synthetic {
            return Ok(Some(render_mouth_frames(&synth_utterance::<f64>(p)?.mouth_opening, MOUTH_SIZE)?));
        }
        rec.video.as_ref().map(|v| mouth_crops(FrameSequence::load(manifest.resolve(v))?)).transpose()
    })())
}

pub fn load_landmarks(manifest: &Manifest, rec: &UtteranceRecord) -> Result<Option<Vec<LandmarkFrame>>> {
    with_context(rec, (|| {
        if let Some(p) = &rec.synthetic {
            return Ok(Some(synthetic_landmarks(&synth_utterance::<f64>(p)?.mouth_opening, MOUTH_SIZE)));
        }
        Ok(rec.landmarks.as_ref().map(|l| read_landmarks(manifest.resolve(l))).transpose()?)
    })())
}

fn cached<T>(cell: &OnceLock<Arc<T>>, load: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    if let Some(v) = cell.get() {
        return Ok(v.clone());
    }
    let v = load()?;
    Ok(cell.get_or_init(|| Arc::new(v)).clone())
}

#[derive(Default)]
struct Slot {
    waveform: OnceLock<Arc<Waveform>>,
    video: OnceLock<Arc<Option<FrameSequence>>>,
    landmarks: OnceLock<Arc<Option<Vec<LandmarkFrame>>>>,
}

/// A manifest with lazily loaded, shared utterance material. Failed loads
/// are not cached.
pub struct Corpus {
    pub manifest: Manifest,
    slots: Vec<Slot>,
}

impl Corpus {
    pub fn new(manifest: Manifest) -> Self {
        let slots = (0..manifest.records.len()).map(|_| Slot::default()).collect();
        Self { manifest, slots }
    }

    pub fn waveform(&self, index: usize) -> Result<Arc<Waveform>> {
        cached(&self.slots[index].waveform, || load_waveform(&self.manifest, &self.manifest.records[index]))
    }

    pub fn video(&self, index: usize) -> Result<Arc<Option<FrameSequence>>> {
        cached(&self.slots[index].video, || load_video(&self.manifest, &self.manifest.records[index]))
    }

    pub fn landmarks(&self, index: usize) -> Result<Arc<Option<Vec<LandmarkFrame>>>> {
        cached(&self.slots[index].landmarks, || load_landmarks(&self.manifest, &self.manifest.records[index]))
    }
}

/// Renders the synthetic corpus to `dir` as WAV, frame and landmark files
/// plus `manifest.jsonl`, and returns the written records.
pub fn write_synthetic_corpus(dir: &Path, spec: &SyntheticCorpus) -> Result<Vec<UtteranceRecord>> {
    let mut out = Vec::new();
    for mut rec in synthetic_records(spec) {
        let p = rec.synthetic.take().expect("synthetic record");
        let u = synth_utterance::<f64>(&p)?;
        let sub = Path::new(&rec.speaker);
        std::fs::create_dir_all(dir.join(sub))?;
        let (audio, video, marks) =
            (sub.join(format!("{}.wav", rec.id)), sub.join(format!("{}.frames", rec.id)), sub.join(format!("{}.landmarks.jsonl", rec.id)));
        write_wav(dir.join(&audio), &u.waveform, WavEncoding::Float32)?;
        render_mouth_frames(&u.mouth_opening, MOUTH_SIZE)?.save(dir.join(&video))?;
        write_landmarks(dir.join(&marks), &synthetic_landmarks(&u.mouth_opening, MOUTH_SIZE))?;
        rec.audio = Some(audio);
        rec.video = Some(video);
        rec.landmarks = Some(marks);
        out.push(rec);
    }
    write_manifest(dir.join("manifest.jsonl"), &out)?;
    Ok(out)
}
