use std::collections::BTreeMap;

use avse_core::features::UtteranceFeatures;
use avse_core::noise::SpeakingStyle;
use avse_harness::report::Window;
use avse_harness::run::FeatureRecord;
use avse_harness::{report, FoldPlan, Gender, ResultRecord, RunConfig, StoredResults};

fn score(system: &str, speaker: &str, style: SpeakingStyle, snr_db: f64, value: f64) -> ResultRecord {
    ResultRecord {
        job: "j".into(),
        fold: 0,
        system: system.into(),
        speaker: speaker.into(),
        gender: if speaker == "s1" { Gender::M } else { Gender::F },
        sentence: format!("{snr_db}"),
        style,
        snr_db,
        metric: "estoi".into(),
        value,
    }
}

fn results(scores: Vec<ResultRecord>, features: Vec<FeatureRecord>) -> StoredResults {
    StoredResults {
        config: RunConfig::default(),
        plan: FoldPlan { k: 2, seed: 0, speakers: BTreeMap::new() },
        scores,
        features,
        jobs: BTreeMap::new(),
    }
}

fn feature(speaker: &str, style: SpeakingStyle, f0: f64, ma: f64) -> FeatureRecord {
    FeatureRecord {
        job: "features".into(),
        id: format!("{speaker}{style:?}"),
        gender: Gender::F,
        features: UtteranceFeatures { speaker: speaker.into(), style, f0_hz: Some(f0), mouth_aperture: Some(ma), mouth_spreading: None },
    }
}

#[test]
fn single_condition_gives_one_row() {
    let r = report(&results(vec![score("AV-L", "s1", SpeakingStyle::Lombard, -5.0, 0.4)], vec![])).unwrap();
    assert_eq!(r.snr_table.len(), 1);
    let row = &r.snr_table[0];
    assert_eq!((row.system.as_str(), row.snr_db, row.n, row.mean, row.ci95_halfwidth), ("AV-L", -5.0, 1, 0.4, 0.0));
    // The low window, overall and for the speaker's gender.
    assert_eq!(r.averages.len(), 2);
    assert!(r.averages.iter().all(|a| a.window == Window::Low && a.mean == 0.4));
}

#[test]
fn averaging_windows() {
    use SpeakingStyle::{Lombard as L, NonLombard as NL};
    let scores = vec![
        score("X", "s1", L, -20.0, 0.1),
        score("X", "s1", L, 5.0, 0.3),
        score("X", "s1", L, 10.0, 0.9),
        score("X", "s1", NL, 0.0, 0.9),
        score("X", "s1", NL, 10.0, 0.6),
        score("X", "s2", NL, 30.0, 0.8),
    ];
    let r = report(&results(scores, vec![])).unwrap();
    assert_eq!(r.snr_table.len(), 6);
    let get = |w: Window, g: &str| r.averages.iter().find(|a| a.window == w && a.gender == g).map(|a| (a.n, a.mean));
    assert_eq!(get(Window::Low, "all"), Some((2, 0.2)));
    assert_eq!(get(Window::High, "all"), Some((2, 0.7)));
    assert_eq!(get(Window::High, "m"), Some((1, 0.6)));
    assert_eq!(get(Window::High, "f"), Some((1, 0.8)));
    assert_eq!(get(Window::Low, "f"), None);
}

#[test]
fn scatter_has_one_point_per_speaker_and_exact_line() {
    use SpeakingStyle::{Lombard as L, NonLombard as NL};
    let mut scores = Vec::new();
    let mut features = Vec::new();
    // Speaker i: F0 rises by 10 i Hz; AV-L gains 0.01 i + 0.02 over AV-NL.
    for i in 1..=4 {
        let s = format!("s{}", i + 1);
        features.push(feature(&s, NL, 120.0, 20.0));
        features.push(feature(&s, L, 120.0 + 10.0 * i as f64, 20.0 + i as f64 * i as f64));
        scores.push(score("AV-NL", &s, L, -5.0, 0.3));
        scores.push(score("AV-L", &s, L, -5.0, 0.3 + 0.01 * i as f64 + 0.02));
        // Outside the low window: ignored by the scatter.
        scores.push(score("AV-L", &s, NL, 20.0, 0.0));
    }
    let r = report(&results(scores, features)).unwrap();
    assert_eq!(r.scatter.len(), 4);
    let f0 = r.fits.iter().find(|f| f.feature == "delta_f0").unwrap();
    assert_eq!(f0.n, 4);
    assert!((f0.slope - 0.001).abs() < 1e-12 && (f0.intercept - 0.02).abs() < 1e-12, "{f0:?}");
    assert!((f0.pearson - 1.0).abs() < 1e-12 && (f0.spearman - 1.0).abs() < 1e-12);
    // Monotone but curved: rank correlation exactly 1, linear below 1.
    let ma = r.fits.iter().find(|f| f.feature == "delta_ma").unwrap();
    assert!((ma.spearman - 1.0).abs() < 1e-12 && ma.pearson < 0.999);
    assert!(r.fits.iter().all(|f| f.feature != "delta_ms"));

    let dir = tempfile::tempdir().unwrap();
    r.write(dir.path().join("a")).unwrap();
    r.write(dir.path().join("b")).unwrap();
    for f in ["snr_table.csv", "averages.csv", "scatter.csv", "fits.csv", "report.json"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let scatter = std::fs::read_to_string(dir.path().join("a/scatter.csv")).unwrap();
    assert!(scatter.starts_with("speaker,gender,delta_f0,delta_ma,delta_ms,delta_estoi\n"));
    assert_eq!(scatter.lines().count(), 5);
}

#[test]
fn empty_results_are_an_error() {
    assert!(report(&results(vec![], vec![])).is_err());
}
