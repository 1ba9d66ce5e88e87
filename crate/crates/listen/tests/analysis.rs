mod common;

use avse_core::grid::Keywords;
use avse_listen::analysis::{analyze_sessions, TestKind};
use avse_listen::responses::{KeywordPayload, RatingsPayload};
use avse_listen::sessions::{SessionKind, Trial};
use avse_listen::store::SessionRecord;
use avse_listen::{Condition, ResponsePayload};
use common::{at, header, keyword_trial, mushra_trial, record};

/// Two-sided exact Wilcoxon p by enumerating all 2^n sign assignments.
fn wilcoxon_oracle(pairs: &[(f64, f64)]) -> f64 {
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        for k in i..=j {
            ranks[order[k]] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    let mean = n as f64 * (n as f64 + 1.0) / 4.0;
    let w: f64 = (0..n).filter(|&k| d[k] > 0.0).map(|k| ranks[k]).sum();
    let extreme = (0..1u64 << n)
        .filter(|mask| {
            let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            (s - mean).abs() >= (w - mean).abs() - 1e-9
        })
        .count();
    extreme as f64 / (1u64 << n) as f64
}

fn cliff_oracle(x: &[f64], y: &[f64]) -> f64 {
    let s: i64 = x.iter().flat_map(|a| y.iter().map(move |b| (a > b) as i64 - (a < b) as i64)).sum();
    s as f64 / (x.len() * y.len()) as f64
}

const AV_GAIN: [f64; 12] = [5.0, 9.0, -2.0, 14.0, 3.0, 11.0, 7.0, 1.0, 13.0, -6.0, 8.0, 4.0];

/// Three MUSHRA subjects; AV-L is rated above AV-NL by construction at
/// -5 dB, AO-L and AO-NL always get the same rating.
fn mushra_subjects() -> (Vec<SessionRecord>, Vec<(f64, f64)>) {
    let mut pairs = Vec::new();
    let mut out = Vec::new();
    for s in 0..3 {
        let trials: Vec<Trial> = (0..8).map(|j| mushra_trial(&format!("m{j}"), if j < 4 { -5.0 } else { 5.0 })).collect();
        let mut r = record(header(SessionKind::Mushra, &format!("subject{s}"), trials));
        for j in 0..8 {
            let base = 30.0 + 5.0 * j as f64 + s as f64;
            let gain = if j < 4 { AV_GAIN[s * 4 + j] } else { 0.0 };
            if j < 4 {
                pairs.push((base + gain, base));
            }
            // Slots in MUSHRA order: reference, AO-L, AO-NL, AV-L, AV-NL, unprocessed, anchor.
            let v = vec![100.0, base - 3.0, base - 3.0, base + gain, base, 20.0 + j as f64, 5.0];
            r.record_response(&format!("m{j}"), &ResponsePayload::Mushra(RatingsPayload { ratings: v }), at(j as u32)).unwrap();
        }
        out.push(r);
    }
    (out, pairs)
}

#[test]
fn constructed_mushra_preference_gives_enumerated_p_and_positive_delta() {
    let (records, pairs) = mushra_subjects();
    let rep = analyze_sessions(&records).unwrap();
    let row = rep.mushra_comparisons.iter().find(|r| r.a == Condition::AvL && r.b == Condition::AvNl && r.snr_db == -5.0).unwrap();
    assert_eq!(row.pairs, 12);
    let p = wilcoxon_oracle(&pairs);
    assert!((row.p_value - p).abs() < 1e-12, "{} vs {p}", row.p_value);
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    assert!(row.d_c > 0.0);
    assert!((row.d_c - cliff_oracle(&x, &y)).abs() < 1e-12);
    assert_eq!(row.significant, p < 0.05 / 6.0);
    assert_eq!(rep.threshold, 0.05 / 6.0);
    assert_eq!(rep.m_comparisons, 6);
}

#[test]
fn identical_ratings_give_zero_delta() {
    let (records, _) = mushra_subjects();
    let rep = analyze_sessions(&records).unwrap();
    for snr in [-5.0, 5.0] {
        let row = rep.mushra_comparisons.iter().find(|r| r.a == Condition::AoL && r.b == Condition::AoNl && r.snr_db == snr).unwrap();
        assert_eq!(row.d_c, 0.0);
        assert_eq!(row.p_value, 1.0);
        assert!(!row.significant);
    }
    assert_eq!(rep.mushra_comparisons.len(), 12);
}

#[test]
fn box_plot_rows_cover_every_condition_and_snr() {
    let (records, _) = mushra_subjects();
    let rep = analyze_sessions(&records).unwrap();
    assert_eq!(rep.mushra_boxes.len(), 14);
    let reference = rep.mushra_boxes.iter().find(|b| b.condition == Condition::Reference && b.snr_db == 5.0).unwrap();
    assert_eq!((reference.stats.n, reference.stats.median), (12, 100.0));
    let anchor = rep.mushra_boxes.iter().find(|b| b.condition == Condition::Anchor && b.snr_db == -5.0).unwrap();
    assert_eq!(anchor.stats.median, 5.0);
    assert!(rep.boxes_csv().unwrap().lines().count() == 15);
}

fn truth(k: usize) -> Keywords {
    Keywords { colour: ["blue", "green", "red", "white"][k % 4].into(), letter: ['A', 'B', 'C', 'D'][k % 4], digit: (k % 10) as u8 }
}

/// Eleven intelligibility subjects at -20 dB: AV-L answers are always
/// right; unprocessed answers get the colour right and the letter right on
/// the first `s % 3` of four trials, never the digit.
fn intelligibility_subjects() -> Vec<SessionRecord> {
    (0..11)
        .map(|s| {
            let mut trials = Vec::new();
            for k in 0..4 {
                trials.push(keyword_trial(&format!("av{k}"), -20.0, Condition::AvL, truth(k)));
                trials.push(keyword_trial(&format!("un{k}"), -20.0, Condition::Unprocessed, truth(k)));
            }
            let mut r = record(header(SessionKind::Intelligibility, &format!("listener{s}"), trials));
            for k in 0..4 {
                let t = truth(k);
                let right = KeywordPayload { colour: t.colour.clone(), digit: t.digit as i64, letter: t.letter.to_ascii_lowercase().to_string() };
                r.record_response(&format!("av{k}"), &ResponsePayload::Intelligibility(right.clone()), at(k as u32)).unwrap();
                let letter = if k < s % 3 { right.letter.clone() } else { "W".into() };
                let partial = KeywordPayload { digit: (t.digit as i64 + 1) % 10, letter, ..right };
                r.record_response(&format!("un{k}"), &ResponsePayload::Intelligibility(partial), at(10 + k as u32)).unwrap();
            }
            r
        })
        .collect()
}

#[test]
fn constructed_listeners_give_exact_p_and_field_percentages() {
    let rep = analyze_sessions(&intelligibility_subjects()).unwrap();
    let row = rep
        .intelligibility_comparisons
        .iter()
        .find(|r| r.a == Condition::AvL && r.b == Condition::Unprocessed && r.snr_db == -20.0)
        .unwrap();
    assert_eq!(row.pairs, 11);
    // All eleven subjects favour AV-L: only the all-positive and all-negative
    // sign assignments are as extreme.
    assert_eq!(row.p_value, 2.0 / 2048.0);
    assert!(row.significant);
    assert_eq!(row.d_c, 1.0);

    let av = rep.intelligibility.iter().find(|r| r.condition == Condition::AvL).unwrap();
    assert_eq!((av.subjects, av.responses, av.colour_pct, av.letter_pct, av.digit_pct, av.mean_pct), (11, 44, 100.0, 100.0, 100.0, 100.0));
    let un = rep.intelligibility.iter().find(|r| r.condition == Condition::Unprocessed).unwrap();
    // Letter right on 0, 1 or 2 of 4 trials for subjects s % 3 = 0, 1, 2 (4, 4 and 3 subjects).
    let letter = (4.0 * 0.0 + 4.0 * 25.0 + 3.0 * 50.0) / 11.0;
    assert!((un.letter_pct - letter).abs() < 1e-9);
    assert_eq!((un.colour_pct, un.digit_pct), (100.0, 0.0));
    assert!((un.mean_pct - (100.0 + letter) / 3.0).abs() < 1e-9);
}

#[test]
fn unpaired_comparisons_are_skipped_and_listed() {
    let rep = analyze_sessions(&intelligibility_subjects()).unwrap();
    assert_eq!(rep.intelligibility_comparisons.len(), 1);
    assert_eq!(rep.skipped.len(), 23);
    assert!(rep.skipped.iter().all(|s| s.test == TestKind::Intelligibility));
    assert!(rep.skipped.iter().any(|s| s.a == Condition::AoL && s.b == Condition::AoNl && s.snr_db == -20.0));
    assert!(rep.mushra_comparisons.is_empty() && rep.mushra_boxes.is_empty());
    let table = rep.table_csv(TestKind::Intelligibility).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "comparison,p (-20 dB),d_c (-20 dB),p (-15 dB),d_c (-15 dB),p (-10 dB),d_c (-10 dB),p (-5 dB),d_c (-5 dB)");
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[6], "AV-L vs unprocessed,0.0009765625,1,,,,,,");
    assert_eq!(lines[1], "AO-L vs AO-NL,,,,,,,,");
}

#[test]
fn training_sessions_are_ignored_and_a_complete_session_is_required() {
    let (mut records, _) = mushra_subjects();
    let base = analyze_sessions(&records).unwrap();
    let mut training = record(header(SessionKind::Training, "trainee", vec![keyword_trial("x", -20.0, Condition::AvL, truth(0))]));
    training
        .record_response("x", &ResponsePayload::Intelligibility(KeywordPayload { colour: "blue".into(), digit: 0, letter: "a".into() }), at(0))
        .unwrap();
    records.push(training.clone());
    assert_eq!(analyze_sessions(&records).unwrap(), base);

    let partial = record(header(SessionKind::Mushra, "late", vec![mushra_trial("m0", 5.0)]));
    assert!(analyze_sessions(&[partial, training]).is_err());
}
