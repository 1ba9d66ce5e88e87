//! Result tables and per-speaker scatter data from a results store.
//!
//! * `snr_table`: mean and 95% CI per system, speaking style and SNR.
//! * `averages`: the same pooled over the low window (Lombard speech,
//!   -20 to 5 dB) and the high window (plain speech, 10 to 30 dB), for all
//!   speakers and split by gender.
//! * `scatter`: per evaluable speaker, Lombard-minus-plain F0, mouth
//!   aperture and spreading against the ESTOI gain of one system over
//!   another in the low window, with least-squares lines and correlations.

use std::collections::BTreeMap;
use std::path::Path;

use avse_core::features::{speaker_deltas, DeltaInputs, SystemScore};
use avse_core::metrics::aggregate;
use avse_core::noise::SpeakingStyle;
use avse_core::stats::{fit_line, pearson, spearman};
use serde::{Deserialize, Serialize};

use crate::run::{StoredResults, ESTOI};
use crate::{Error, Result};

/// System pair whose low-window ESTOI difference forms the scatter's y axis.
pub const SCATTER_PAIR: (&str, &str) = ("AV-L", "AV-NL");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub system: String,
    pub style: SpeakingStyle,
    pub snr_db: f64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub ci95_halfwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Window {
    #[serde(rename = "-20..5")]
    Low,
    #[serde(rename = "10..30")]
    High,
}

impl Window {
    fn of(style: SpeakingStyle, snr: f64) -> Option<Self> {
        match style {
            SpeakingStyle::Lombard if (-20.0..=5.0).contains(&snr) => Some(Window::Low),
            SpeakingStyle::NonLombard if (10.0..=30.0).contains(&snr) => Some(Window::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub system: String,
    pub window: Window,
    /// `all`, `m` or `f`.
    pub gender: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub ci95_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub speaker: String,
    pub gender: String,
    pub delta_f0: Option<f64>,
    pub delta_ma: Option<f64>,
    pub delta_ms: Option<f64>,
    pub delta_estoi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterFit {
    pub feature: String,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub pearson: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub snr_table: Vec<SnrRow>,
    pub averages: Vec<WindowRow>,
    pub scatter_pair: (String, String),
    pub scatter: Vec<ScatterPoint>,
    pub fits: Vec<ScatterFit>,
    /// Jobs whose latest status is a failure.
    pub failed_jobs: Vec<String>,
}

fn snr_key(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

pub fn report(results: &StoredResults) -> Result<Report> {
    if results.scores.is_empty() {
        return Err(Error::Store("no committed results to report".into()));
    }
    let mut cells: BTreeMap<(&str, SpeakingStyle, i64, &str), Vec<f64>> = BTreeMap::new();
    let mut windows: BTreeMap<(&str, Window, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in &results.scores {
        cells.entry((&r.system, r.style, snr_key(r.snr_db), &r.metric)).or_default().push(r.value);
        if let Some(w) = Window::of(r.style, r.snr_db) {
            windows.entry((&r.system, w, "all", &r.metric)).or_default().push(r.value);
            windows.entry((&r.system, w, r.gender.label(), &r.metric)).or_default().push(r.value);
        }
    }
    let snr_table = cells
        .into_iter()
        .map(|((system, style, snr, metric), v)| {
            let a = aggregate(&v)?;
            Ok(SnrRow {
                system: system.into(),
                style,
                snr_db: snr as f64 / 1000.0,
                metric: metric.into(),
                n: a.n,
                mean: a.mean,
                ci95_halfwidth: a.ci95_halfwidth,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let averages = windows
        .into_iter()
        .map(|((system, window, gender, metric), v)| {
            let a = aggregate(&v)?;
            Ok(WindowRow {
                system: system.into(),
                window,
                gender: gender.into(),
                metric: metric.into(),
                n: a.n,
                mean: a.mean,
                ci95_halfwidth: a.ci95_halfwidth,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (scatter, fits) = scatter(results);
    let failed_jobs = results
        .jobs
        .values()
        .filter(|s| s.status == crate::run::JobState::Failed)
        .map(|s| s.job.clone())
        .collect();
    Ok(Report {
        snr_table,
        averages,
        scatter_pair: (SCATTER_PAIR.0.into(), SCATTER_PAIR.1.into()),
        scatter,
        fits,
        failed_jobs,
    })
}

fn scatter(results: &StoredResults) -> (Vec<ScatterPoint>, Vec<ScatterFit>) {
    let features: Vec<_> = results.features.iter().map(|f| f.features.clone()).collect();
    let scores: Vec<SystemScore> = results
        .scores
        .iter()
        .filter(|r| r.metric == ESTOI && Window::of(r.style, r.snr_db) == Some(Window::Low))
        .map(|r| SystemScore { speaker: r.speaker.clone(), system: r.system.clone(), metric: r.metric.clone(), value: r.value })
        .collect();
    let (deltas, _) = speaker_deltas(&DeltaInputs { features: &features, scores: &scores, system_pair: SCATTER_PAIR });
    let genders: BTreeMap<&str, &str> = results.features.iter().map(|f| (f.features.speaker.as_str(), f.gender.label())).collect();
    let points: Vec<ScatterPoint> = deltas
        .into_iter()
        .map(|d| ScatterPoint {
            gender: genders.get(d.speaker.as_str()).copied().unwrap_or("").into(),
            delta_estoi: d.delta_metric.get(ESTOI).copied(),
            speaker: d.speaker,
            delta_f0: d.delta_f0,
            delta_ma: d.delta_ma,
            delta_ms: d.delta_ms,
        })
        .collect();

    let mut fits = Vec::new();
    let axes: [(&str, fn(&ScatterPoint) -> Option<f64>); 3] =
        [("delta_f0", |p| p.delta_f0), ("delta_ma", |p| p.delta_ma), ("delta_ms", |p| p.delta_ms)];
    for (name, pick) in axes {
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| Some((pick(p)?, p.delta_estoi?))).unzip();
        let fit = || -> avse_core::Result<ScatterFit> {
            let line = fit_line(&x, &y)?;
            Ok(ScatterFit { feature: name.into(), n: x.len(), slope: line.slope, intercept: line.intercept, pearson: pearson(&x, &y)?, spearman: spearman(&x, &y)? })
        };
        match fit() {
            Ok(f) => fits.push(f),
            Err(e) => log::info!("no {name} line: {e}"),
        }
    }
    (points, fits)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl Report {
    /// Writes `snr_table.csv`, `averages.csv`, `scatter.csv`, `fits.csv`
    /// and `report.json` to `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("snr_table.csv"), &self.snr_table)?;
        write_csv(&dir.join("averages.csv"), &self.averages)?;
        write_csv(&dir.join("scatter.csv"), &self.scatter)?;
        write_csv(&dir.join("fits.csv"), &self.fits)?;
        std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}
