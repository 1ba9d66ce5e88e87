//! Listening-test statistics over stored sessions.
//!
//! MUSHRA ratings are paired within a trial: all seven signals of a trial
//! carry the same sentence, so each answered trial gives one pair per
//! comparison. Intelligibility scores are paired within a subject: the
//! subject's mean keyword percentage per condition at one SNR. Both use the
//! paired two-sided Wilcoxon signed-rank test, Bonferroni-corrected over the
//! six comparisons, with Cliff's delta on the two samples (positive when the
//! first condition scores higher). Training sessions are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use avse_core::stats::{bonferroni_threshold, boxplot, cliffs_delta, wilcoxon_signed_rank, BoxStats, EffectMagnitude, TestMethod};
use serde::{Deserialize, Serialize};

use crate::responses::{score_keywords, Answer};
use crate::sessions::{SessionKind, Trial};
use crate::stimuli::{Condition, INTELLIGIBILITY_SNRS, MUSHRA_SNRS};
use crate::store::SessionRecord;
use crate::{snr_key, Error, Result};

pub const ALPHA: f64 = 0.05;

/// The six condition pairs tested at every SNR.
pub const COMPARISONS: [(Condition, Condition); 6] = [
    (Condition::AoL, Condition::AoNl),
    (Condition::AvL, Condition::AvNl),
    (Condition::AoL, Condition::AvL),
    (Condition::AoNl, Condition::AvNl),
    (Condition::AoL, Condition::Unprocessed),
    (Condition::AvL, Condition::Unprocessed),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Mushra,
    Intelligibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub snr_db: f64,
    pub condition: Condition,
    pub stats: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub test: TestKind,
    pub snr_db: f64,
    pub a: Condition,
    pub b: Condition,
    pub pairs: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub significant: bool,
    pub d_c: f64,
    pub magnitude: EffectMagnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntelligibilityRow {
    pub snr_db: f64,
    pub condition: Condition,
    pub subjects: usize,
    pub responses: usize,
    /// Percentages of correct keywords, averaged over subjects.
    pub colour_pct: f64,
    pub letter_pct: f64,
    pub digit_pct: f64,
    pub mean_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub test: TestKind,
    pub snr_db: f64,
    pub a: Condition,
    pub b: Condition,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListeningReport {
    pub alpha: f64,
    pub m_comparisons: usize,
    pub threshold: f64,
    pub mushra_sessions: usize,
    pub intelligibility_sessions: usize,
    pub mushra_boxes: Vec<BoxRow>,
    pub mushra_comparisons: Vec<ComparisonRow>,
    pub intelligibility: Vec<IntelligibilityRow>,
    pub intelligibility_comparisons: Vec<ComparisonRow>,
    pub skipped: Vec<Skipped>,
}

fn compare(test: TestKind, snr_db: f64, (a, b): (Condition, Condition), pairs: &[(f64, f64)]) -> Result<ComparisonRow> {
    let w = wilcoxon_signed_rank(pairs, ALPHA, COMPARISONS.len())?;
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let d = cliffs_delta(&x, &y)?;
    Ok(ComparisonRow {
        test,
        snr_db,
        a,
        b,
        pairs: pairs.len(),
        statistic: w.statistic,
        p_value: w.p_value,
        method: w.method,
        significant: w.significant,
        d_c: d.d_c,
        magnitude: d.magnitude,
    })
}

struct Comparisons {
    rows: Vec<ComparisonRow>,
    skipped: Vec<Skipped>,
}

fn run_comparisons(
    test: TestKind,
    snrs: &[f64],
    pairs_for: impl Fn(f64, Condition, Condition) -> Vec<(f64, f64)>,
) -> Result<Comparisons> {
    let mut out = Comparisons { rows: Vec::new(), skipped: Vec::new() };
    for &snr in snrs {
        for pair in COMPARISONS {
            let pairs = pairs_for(snr, pair.0, pair.1);
            if pairs.is_empty() {
                let reason = "no paired observations".to_owned();
                log::warn!("skipping {test:?} {} vs {} at {snr} dB: {reason}", pair.0, pair.1);
                out.skipped.push(Skipped { test, snr_db: snr, a: pair.0, b: pair.1, reason });
                continue;
            }
            out.rows.push(compare(test, snr, pair, &pairs)?);
        }
    }
    Ok(out)
}

/// Per-subject keyword tallies for one (SNR, condition) cell.
#[derive(Default, Clone, Copy)]
struct Tally {
    n: usize,
    colour: usize,
    letter: usize,
    digit: usize,
}

impl Tally {
    fn pct(&self) -> [f64; 3] {
        let p = |k: usize| 100.0 * k as f64 / self.n as f64;
        [p(self.colour), p(self.letter), p(self.digit)]
    }

    fn mean_pct(&self) -> f64 {
        self.pct().iter().sum::<f64>() / 3.0
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Box-plot data, the six comparisons per SNR and keyword percentages from
/// the stored responses. Needs at least one complete session.
pub fn analyze_sessions(records: &[SessionRecord]) -> Result<ListeningReport> {
    let records: Vec<&SessionRecord> = records.iter().filter(|r| r.kind() != SessionKind::Training).collect();
    if !records.iter().any(|r| r.is_complete()) {
        return Err(Error::Analysis("no complete MUSHRA or intelligibility session".into()));
    }
    let of_kind = |k: SessionKind| records.iter().filter(move |r| r.kind() == k);

    // MUSHRA: one condition -> rating map per answered trial.
    let mut trials: Vec<(i64, BTreeMap<Condition, f64>)> = Vec::new();
    for r in of_kind(SessionKind::Mushra) {
        for resp in r.responses() {
            if let (Some(Trial::Mushra(t)), Answer::Mushra(a)) = (r.trial(&resp.trial), &resp.answer) {
                let ratings = t.conditions.iter().zip(&a.ratings).map(|(&c, &v)| (c, v as f64)).collect();
                trials.push((snr_key(t.snr_db), ratings));
            }
        }
    }
    let mut cells: BTreeMap<(i64, Condition), Vec<f64>> = BTreeMap::new();
    for (snr, ratings) in &trials {
        for (&c, &v) in ratings {
            cells.entry((*snr, c)).or_default().push(v);
        }
    }
    let mushra_boxes = cells
        .into_iter()
        .map(|((snr, condition), v)| Ok(BoxRow { snr_db: snr as f64 / 1000.0, condition, stats: boxplot(&v)? }))
        .collect::<Result<Vec<_>>>()?;
    let mushra_sessions = of_kind(SessionKind::Mushra).count();
    let mushra = if mushra_sessions > 0 {
        run_comparisons(TestKind::Mushra, &MUSHRA_SNRS, |snr, a, b| {
            trials
                .iter()
                .filter(|(s, _)| *s == snr_key(snr))
                .filter_map(|(_, m)| Some((*m.get(&a)?, *m.get(&b)?)))
                .collect()
        })?
    } else {
        Comparisons { rows: Vec::new(), skipped: Vec::new() }
    };

    // Intelligibility: keyword tallies per subject and cell.
    let mut tallies: BTreeMap<(i64, Condition), BTreeMap<&str, Tally>> = BTreeMap::new();
    for r in of_kind(SessionKind::Intelligibility) {
        for resp in r.responses() {
            if let (Some(Trial::Intelligibility(t)), Answer::Intelligibility(a)) = (r.trial(&resp.trial), &resp.answer) {
                let s = score_keywords(a, &t.keywords);
                let e = tallies.entry((snr_key(t.snr_db), t.condition)).or_default().entry(r.header.subject.as_str()).or_default();
                e.n += 1;
                e.colour += s.colour as usize;
                e.letter += s.letter as usize;
                e.digit += s.digit as usize;
            }
        }
    }
    let intelligibility = tallies
        .iter()
        .map(|(&(snr, condition), subjects)| {
            let field = |k: usize| mean(subjects.values().map(|t| t.pct()[k]));
            IntelligibilityRow {
                snr_db: snr as f64 / 1000.0,
                condition,
                subjects: subjects.len(),
                responses: subjects.values().map(|t| t.n).sum(),
                colour_pct: field(0),
                letter_pct: field(1),
                digit_pct: field(2),
                mean_pct: mean(subjects.values().map(Tally::mean_pct)),
            }
        })
        .collect();
    let intelligibility_sessions = of_kind(SessionKind::Intelligibility).count();
    let intel = if intelligibility_sessions > 0 {
        run_comparisons(TestKind::Intelligibility, &INTELLIGIBILITY_SNRS, |snr, a, b| {
            let (Some(ta), Some(tb)) = (tallies.get(&(snr_key(snr), a)), tallies.get(&(snr_key(snr), b))) else {
                return Vec::new();
            };
            let subjects: BTreeSet<&str> = ta.keys().chain(tb.keys()).copied().collect();
            let pairs: Vec<(f64, f64)> =
                subjects.iter().filter_map(|s| Some((ta.get(s)?.mean_pct(), tb.get(s)?.mean_pct()))).collect();
            if pairs.len() < subjects.len() {
                log::info!("{a} vs {b} at {snr} dB: {} of {} subjects lack one condition", subjects.len() - pairs.len(), subjects.len());
            }
            pairs
        })?
    } else {
        Comparisons { rows: Vec::new(), skipped: Vec::new() }
    };

    Ok(ListeningReport {
        alpha: ALPHA,
        m_comparisons: COMPARISONS.len(),
        threshold: bonferroni_threshold(ALPHA, COMPARISONS.len())?,
        mushra_sessions,
        intelligibility_sessions,
        mushra_boxes,
        mushra_comparisons: mushra.rows,
        intelligibility,
        intelligibility_comparisons: intel.rows,
        skipped: mushra.skipped.into_iter().chain(intel.skipped).collect(),
    })
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

impl ListeningReport {
    /// Comparisons as rows and SNRs as column pairs of p and d_c; blank
    /// cells mark skipped comparisons.
    pub fn table_csv(&self, test: TestKind) -> Result<String> {
        let (rows, snrs): (&[ComparisonRow], &[f64]) = match test {
            TestKind::Mushra => (&self.mushra_comparisons, &MUSHRA_SNRS),
            TestKind::Intelligibility => (&self.intelligibility_comparisons, &INTELLIGIBILITY_SNRS),
        };
        let mut out = vec![std::iter::once("comparison".to_owned())
            .chain(snrs.iter().flat_map(|s| [format!("p ({s} dB)"), format!("d_c ({s} dB)")]))
            .collect::<Vec<_>>()];
        for (a, b) in COMPARISONS {
            let mut line = vec![format!("{a} vs {b}")];
            for &snr in snrs {
                match rows.iter().find(|r| r.a == a && r.b == b && snr_key(r.snr_db) == snr_key(snr)) {
                    Some(r) => line.extend([r.p_value.to_string(), r.d_c.to_string()]),
                    None => line.extend([String::new(), String::new()]),
                }
            }
            out.push(line);
        }
        csv_string(out)
    }

    pub fn boxes_csv(&self) -> Result<String> {
        let mut out = vec![["snr_db", "condition", "n", "median", "q1", "q3", "whisker_low", "whisker_high", "outliers"]
            .map(String::from)
            .to_vec()];
        for b in &self.mushra_boxes {
            let s = &b.stats;
            out.push(vec![
                b.snr_db.to_string(),
                b.condition.to_string(),
                s.n.to_string(),
                s.median.to_string(),
                s.q1.to_string(),
                s.q3.to_string(),
                s.whisker_low.to_string(),
                s.whisker_high.to_string(),
                s.outliers.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            ]);
        }
        csv_string(out)
    }

    pub fn intelligibility_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.intelligibility {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
    }

    /// Writes `report.json`, `mushra_table.csv`, `intelligibility_table.csv`,
    /// `mushra_boxes.csv` and `intelligibility_scores.csv` to `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(self)?)?;
        std::fs::write(dir.join("mushra_table.csv"), self.table_csv(TestKind::Mushra)?)?;
        std::fs::write(dir.join("intelligibility_table.csv"), self.table_csv(TestKind::Intelligibility)?)?;
        std::fs::write(dir.join("mushra_boxes.csv"), self.boxes_csv()?)?;
        std::fs::write(dir.join("intelligibility_scores.csv"), self.intelligibility_csv()?)?;
        Ok(())
    }
}
