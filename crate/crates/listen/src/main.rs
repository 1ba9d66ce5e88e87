use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use avse_core::dsp::wav::{read_wav, ReadOptions};
use avse_core::features::FrameSequence;
use avse_core::grid::Transcript;
use avse_listen::api::{router, AppState};
use avse_listen::demo::{demo_processed_set, DemoSpec};
use avse_listen::stimuli::DEFAULT_TARGET_LUFS;
use avse_listen::{analyze_sessions, prepare_stimuli, Condition, PrepareOptions, ProcessedSet, Rendering, SessionStore, StimulusStore};
use clap::{Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "avse-listen", version, about = "MUSHRA and keyword-intelligibility listening tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalise renderings listed in a JSON-lines file into a stimulus store.
    Prepare {
        #[arg(long)]
        renderings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET_LUFS, allow_hyphen_values = true)]
        target_lufs: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a stimulus store from synthetic speech and stand-in systems.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        speakers: usize,
        #[arg(long, default_value_t = 3)]
        sentences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        stimuli: PathBuf,
        /// Directory of session logs.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Write the statistics report for the stored sessions.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// One line of a renderings file; paths are relative to the file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RenderingLine {
    speaker: String,
    sentence: String,
    transcript: Transcript,
    condition: Condition,
    snr_db: Option<f64>,
    audio: PathBuf,
    video: Option<PathBuf>,
}

fn read_renderings(path: &Path) -> Result<ProcessedSet, Box<dyn std::error::Error>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut set = ProcessedSet::default();
    for (n, line) in std::fs::read_to_string(path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: RenderingLine = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
        let audio = read_wav::<f64>(base.join(&r.audio), ReadOptions::default()).map_err(|e| format!("line {}: {e}", n + 1))?;
        if let Some(v) = &r.video {
            let key = (r.speaker.clone(), r.sentence.clone());
            if !set.videos.contains_key(&key) {
                set.videos.insert(key, FrameSequence::load(base.join(v)).map_err(|e| format!("line {}: {e}", n + 1))?);
            }
        }
        set.renderings.push(Rendering {
            source: r.audio.display().to_string(),
            speaker: r.speaker,
            sentence: r.sentence,
            transcript: r.transcript,
            condition: r.condition,
            snr_db: r.snr_db,
            audio,
        });
    }
    Ok(set)
}

async fn serve(stimuli: PathBuf, data: PathBuf, addr: SocketAddr) -> Result<(), Box<dyn std::error::Error>> {
    let state = AppState { stimuli: Arc::new(StimulusStore::open(&stimuli)?), sessions: Arc::new(SessionStore::open(&data)?) };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Prepare { renderings, out, target_lufs, seed } => {
            let set = read_renderings(&renderings)?;
            let store = prepare_stimuli(&set, &PrepareOptions { target_lufs, seed, ..PrepareOptions::default() }, &out)?;
            println!("{} stimuli, {} excluded, written to {}", store.stimuli().len(), store.index().excluded.len(), out.display());
        }
        Command::Demo { out, speakers, sentences, seed } => {
            let set = demo_processed_set(&DemoSpec { speakers, sentences, seed, ..DemoSpec::default() })?;
            let store = prepare_stimuli(&set, &PrepareOptions { seed, ..PrepareOptions::default() }, &out)?;
            println!("{} demo stimuli written to {}", store.stimuli().len(), out.display());
        }
        Command::Serve { stimuli, data, addr } => {
            tokio::runtime::Runtime::new()?.block_on(serve(stimuli, data, addr))?;
        }
        Command::Analyze { data, out } => {
            let report = analyze_sessions(&SessionStore::open(&data)?.records())?;
            report.write(&out)?;
            println!(
                "{} MUSHRA and {} intelligibility sessions analysed, report written to {}",
                report.mushra_sessions,
                report.intelligibility_sessions,
                out.display()
            );
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
