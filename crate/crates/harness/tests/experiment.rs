use std::collections::BTreeMap;
use std::path::Path;

use avse_core::noise::SpeakingStyle;
use avse_harness::corpus::write_synthetic_corpus;
use avse_harness::run::{JobState, ORACLE, UNPROCESSED};
use avse_harness::synthetic::SyntheticCorpus;
use avse_harness::{report, run_experiment, RunConfig, StoredResults};

fn config(systems: &[&str]) -> RunConfig {
    let list = systems.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ");
    RunConfig::from_toml(&format!(
        r#"
seed = 5
folds = 2

[data.synthetic]
speakers = 4
sentences = 8
duration_s = 1.5

[training]
max_epochs = 2
max_train_segments = 24
max_validation_segments = 8
save_checkpoints = false

[evaluation]
systems = [{list}]
max_test_sentences = 1
"#
    ))
    .unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())).collect()
}

fn report_files(run: &Path, out: &Path) -> BTreeMap<String, Vec<u8>> {
    report(&StoredResults::load(run).unwrap()).unwrap().write(out).unwrap();
    files(out)
}

#[test]
fn rerun_and_resume_reproduce_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&["AO-L", "AV-NL(w)"]);
    let a = run_experiment(&cfg, tmp.path().join("a")).unwrap();
    assert_eq!(a.completed.len(), 1 + 2 * 3, "{a:?}");
    assert!(a.failed.is_empty());

    run_experiment(&cfg, tmp.path().join("b")).unwrap();
    let ra = report_files(&tmp.path().join("a"), &tmp.path().join("ra"));
    let rb = report_files(&tmp.path().join("b"), &tmp.path().join("rb"));
    assert_eq!(ra, rb);
    assert_eq!(std::fs::read(tmp.path().join("a/results.jsonl")).unwrap(), std::fs::read(tmp.path().join("b/results.jsonl")).unwrap());

    // Fold 0 alone, then everything: fold 0 is not run twice.
    let c = tmp.path().join("c");
    let first = run_experiment(&RunConfig { run_folds: Some(vec![0]), ..cfg.clone() }, &c).unwrap();
    assert_eq!(first.completed.len(), 4);
    let second = run_experiment(&RunConfig { jobs: 2, ..cfg.clone() }, &c).unwrap();
    assert_eq!(second.skipped.len(), 4);
    assert_eq!(second.completed.len(), 3);
    assert_eq!(report_files(&c, &tmp.path().join("rc")), ra);
    // Nothing left to do.
    assert_eq!(run_experiment(&cfg, &c).unwrap().completed.len(), 0);

    // A store belongs to one configuration.
    assert!(run_experiment(&RunConfig { seed: 6, ..cfg }, &c).is_err());
}

#[test]
fn oracle_bounds_trained_systems() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&["VO-L", "AO-L", "AV-L", "AV-L(w)"]);
    run_experiment(&cfg, tmp.path()).unwrap();
    let res = StoredResults::load(tmp.path()).unwrap();
    let rep = report(&res).unwrap();
    let oracle: BTreeMap<(SpeakingStyle, i64), f64> =
        rep.snr_table.iter().filter(|r| r.system == ORACLE).map(|r| ((r.style, r.snr_db as i64), r.mean)).collect();
    assert_eq!(oracle.len(), 11);
    let mut compared = 0;
    for r in rep.snr_table.iter().filter(|r| r.system != ORACLE) {
        let o = oracle[&(r.style, r.snr_db as i64)];
        assert!(o > r.mean, "{} at {} dB: {} vs oracle {o}", r.system, r.snr_db, r.mean);
        compared += 1;
    }
    assert_eq!(compared, 11 + 6 * 3 + 11);
    assert!(rep.snr_table.iter().any(|r| r.system == UNPROCESSED));
    // Every evaluable speaker gives one scatter point; AV-NL was not run.
    assert_eq!(rep.scatter.len(), 4);
    assert!(rep.scatter.iter().all(|p| p.delta_f0.unwrap() > 0.0 && p.delta_estoi.is_none()));
    let genders: Vec<&str> = rep.averages.iter().map(|r| r.gender.as_str()).collect();
    assert!(genders.contains(&"m") && genders.contains(&"f") && genders.contains(&"all"));
}

/// Corpus files on disk without the mouth frames of one speaker's Lombard
/// readings, which every fold tests on: the video systems fail, the
/// audio-only ones finish.
#[test]
fn failed_jobs_do_not_stop_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let recs = write_synthetic_corpus(&data, &SyntheticCorpus { speakers: 4, sentences: 8, duration_s: 1.5, seed: 0 }).unwrap();
    for r in recs.iter().filter(|r| r.speaker == "s2" && r.style == SpeakingStyle::Lombard) {
        std::fs::remove_file(data.join(r.video.as_ref().unwrap())).unwrap();
    }

    let mut cfg = config(&["AO-NL", "AV-NL"]);
    cfg.data.manifest = Some(data.join("manifest.jsonl"));
    cfg.evaluation.max_test_sentences = None;
    let run = tmp.path().join("run");
    let s = run_experiment(&cfg, &run).unwrap();
    let failed: Vec<&str> = s.failed.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(failed, vec!["fold0/AV-NL", "fold1/AV-NL"], "{s:?}");
    assert!(s.failed.iter().all(|f| f.1.contains("record s2_") && f.1.contains("_l:")), "{s:?}");
    assert_eq!(s.completed.len(), 5);

    let res = StoredResults::load(&run).unwrap();
    assert_eq!(res.jobs["fold1/AV-NL"].status, JobState::Failed);
    assert!(res.scores.iter().all(|r| r.system != "AV-NL"));
    let rep = report(&res).unwrap();
    assert_eq!(rep.failed_jobs, vec!["fold0/AV-NL", "fold1/AV-NL"]);
    assert!(rep.snr_table.iter().any(|r| r.system == "AO-NL"));
}

#[test]
fn torn_lines_are_ignored_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { run_folds: Some(vec![0]), ..config(&["AO-L"]) };
    run_experiment(&cfg, tmp.path()).unwrap();
    let full = StoredResults::load(tmp.path()).unwrap();

    // Drop the final status line and leave half a record behind.
    let path = tmp.path().join("results.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let body = text.trim_end().rsplit_once('\n').unwrap().0;
    std::fs::write(&path, format!("{body}\n{{\"kind\":\"score\",\"job\":")).unwrap();
    let partial = StoredResults::load(tmp.path()).unwrap();
    assert!(partial.jobs.len() < full.jobs.len());

    let s = run_experiment(&cfg, tmp.path()).unwrap();
    assert_eq!(s.completed.len(), 1);
    assert_eq!(StoredResults::load(tmp.path()).unwrap(), full);
}
