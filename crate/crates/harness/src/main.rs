use std::path::PathBuf;
use std::process::ExitCode;

use avse_harness::corpus::write_synthetic_corpus;
use avse_harness::synthetic::SyntheticCorpus;
use avse_harness::{load_manifest, make_folds, report, run_experiment, Eligibility, FoldOptions, RunConfig, StoredResults, DATA_ROOT_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avse", version, about = "Audio-visual speech enhancement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus manifests.
    #[command(subcommand)]
    Manifest(ManifestCmd),
    /// Cross-validation fold plans.
    #[command(subcommand)]
    Folds(FoldsCmd),
    /// Experiment runs.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Reports from a run directory.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Synthetic corpora.
    #[command(subcommand)]
    Corpus(CorpusCmd),
}

#[derive(Subcommand)]
enum ManifestCmd {
    /// Check a manifest and list speaker eligibility.
    Validate {
        manifest: PathBuf,
        #[arg(long, env = DATA_ROOT_ENV)]
        data_root: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FoldsCmd {
    /// Write a stratified fold plan as JSON.
    Make {
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run (or resume) the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run directory; reused runs resume where they stopped.
        #[arg(long)]
        out: PathBuf,
        /// Override the folds to run, e.g. `--fold 0 --fold 1`.
        #[arg(long = "fold")]
        folds: Vec<usize>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Write CSV and JSON tables for a run.
    Make {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Render a synthetic corpus with WAV, frame and landmark files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        speakers: usize,
        #[arg(long, default_value_t = 20)]
        sentences: usize,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> avse_harness::Result<()> {
    match cli.command {
        Command::Manifest(ManifestCmd::Validate { manifest, data_root }) => {
            let m = load_manifest(&manifest, data_root.as_deref())?;
            println!("{} records, {} speakers", m.records.len(), m.speakers.len());
            for e in [Eligibility::Evaluable, Eligibility::TrainOnly, Eligibility::Discarded] {
                let s = m.speakers_with(e);
                println!("{e:?}: {} {}", s.len(), s.join(" "));
            }
        }
        Command::Folds(FoldsCmd::Make { manifest, k, seed, out }) => {
            let m = load_manifest(&manifest, None)?;
            let plan = make_folds(&m, &FoldOptions { k, seed, ..FoldOptions::default() })?;
            plan.save(&out)?;
            println!("{} folds over {} evaluable speakers written to {}", k, plan.evaluable_speakers().count(), out.display());
        }
        Command::Experiment(ExperimentCmd::Run { config, out, folds, jobs }) => {
            let mut cfg = RunConfig::load(&config)?;
            if !folds.is_empty() {
                cfg.run_folds = Some(folds);
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            let s = run_experiment(&cfg, &out)?;
            println!("{} jobs completed, {} already done, {} failed", s.completed.len(), s.skipped.len(), s.failed.len());
            for (job, err) in &s.failed {
                println!("failed {job}: {err}");
            }
        }
        Command::Report(ReportCmd::Make { run, out }) => {
            let r = report(&StoredResults::load(&run)?)?;
            r.write(&out)?;
            println!("{} table rows, {} scatter points written to {}", r.snr_table.len(), r.scatter.len(), out.display());
        }
        Command::Corpus(CorpusCmd::Synth { out, speakers, sentences, duration, seed }) => {
            let recs = write_synthetic_corpus(&out, &SyntheticCorpus { speakers, sentences, duration_s: duration, seed })?;
            println!("{} records written to {}", recs.len(), out.join("manifest.jsonl").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
