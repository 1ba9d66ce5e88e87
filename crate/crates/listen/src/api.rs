//! The `/v1` HTTP API. See `docs/listen-api.md` for the wire format.

use std::sync::Arc;

use avse_core::grid::{letters, COLOURS};
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{analyze_sessions, TestKind};
use crate::responses::{ResponsePayload, RATING_MAX};
use crate::sessions::{SessionKind, SessionPlan, Trial};
use crate::stimuli::StimulusStore;
use crate::store::{Media, SessionRecord, SessionStore, REFERENCE_SLOT};
use crate::Error;

pub const API_VERSION: &str = "v1";
/// Media type of the mouth-frame container served as video.
pub const FRAMES_MEDIA_TYPE: &str = "application/vnd.avse.frames";
/// MUSHRA scale band labels, lowest first, each 20 points wide.
pub const RATING_BANDS: [&str; 5] = ["bad", "poor", "fair", "good", "excellent"];

#[derive(Clone)]
pub struct AppState {
    pub stimuli: Arc<StimulusStore>,
    pub sessions: Arc<SessionStore>,
}

pub struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownSession(_) | Error::UnknownTrial(_) => StatusCode::NOT_FOUND,
            Error::Duplicate(_) | Error::Playback(_) => StatusCode::CONFLICT,
            Error::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Material(_) | Error::Analysis(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed request body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{session}", get(session_status))
        .route("/v1/sessions/{session}/next", get(next_trial))
        .route("/v1/sessions/{session}/trials/{trial}/media/{slot}/{media}", get(media))
        .route("/v1/sessions/{session}/trials/{trial}/response", post(respond))
        .route("/v1/sessions/{session}/export", get(export))
        .route("/v1/report", get(report_json))
        .route("/v1/report/{table}", get(report_csv))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "api": API_VERSION, "version": env!("CARGO_PKG_VERSION") }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    kind: SessionKind,
    seed: Option<u64>,
    subject: Option<String>,
}

#[derive(Debug, Serialize)]
struct SessionStatus {
    session: String,
    subject: String,
    kind: SessionKind,
    seed: u64,
    trials: usize,
    answered: usize,
    complete: bool,
}

fn status(r: &SessionRecord) -> SessionStatus {
    SessionStatus {
        session: r.id().to_owned(),
        subject: r.header.subject.clone(),
        kind: r.kind(),
        seed: r.header.seed,
        trials: r.trials().len(),
        answered: r.answered(),
        complete: r.is_complete(),
    }
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionStatus>)> {
    let req: CreateSession = parse_body(&body)?;
    let seed = req.seed.unwrap_or_else(rand::random);
    let plan = SessionPlan::build(req.kind, &st.stimuli, seed)?;
    let record = st.sessions.create(plan, req.subject, &st.stimuli)?;
    log::info!("created {:?} session {} with seed {seed}", record.kind(), record.id());
    Ok((StatusCode::CREATED, Json(status(&record))))
}

async fn session_status(State(st): State<AppState>, Path(session): Path<String>) -> ApiResult<Json<SessionStatus>> {
    Ok(Json(status(&st.sessions.snapshot(&session)?)))
}

#[derive(Debug, Serialize)]
struct MediaLinks {
    slot: String,
    audio: String,
    video: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TrialView {
    Mushra {
        trial: String,
        reference: MediaLinks,
        /// The rated signals in presentation order; conditions are not revealed.
        stimuli: Vec<MediaLinks>,
        scale: serde_json::Value,
    },
    Intelligibility {
        trial: String,
        training: bool,
        stimulus: MediaLinks,
        /// Media already fetched; each plays once.
        played: Vec<Media>,
        colours: Vec<&'static str>,
        digits: Vec<u8>,
        letters: Vec<char>,
    },
}

#[derive(Debug, Serialize)]
struct NextTrial {
    done: bool,
    /// Zero-based position of the trial in the session.
    index: Option<usize>,
    total: usize,
    trial: Option<TrialView>,
}

fn links(st: &AppState, r: &SessionRecord, trial: &str, slot: &str) -> ApiResult<MediaLinks> {
    let id = r.resolve_slot(trial, slot)?;
    let has_video = st.stimuli.get(id).is_some_and(|s| s.video.is_some());
    let base = format!("/v1/sessions/{}/trials/{trial}/media/{slot}", r.id());
    Ok(MediaLinks { slot: slot.to_owned(), audio: format!("{base}/audio"), video: has_video.then(|| format!("{base}/video")) })
}

async fn next_trial(State(st): State<AppState>, Path(session): Path<String>) -> ApiResult<Json<NextTrial>> {
    let r = st.sessions.snapshot(&session)?;
    let total = r.trials().len();
    let Some((index, trial)) = r.next_trial() else {
        return Ok(Json(NextTrial { done: true, index: None, total, trial: None }));
    };
    let view = match trial {
        Trial::Mushra(t) => TrialView::Mushra {
            trial: t.id.clone(),
            reference: links(&st, &r, &t.id, REFERENCE_SLOT)?,
            stimuli: (0..t.stimuli.len()).map(|i| links(&st, &r, &t.id, &i.to_string())).collect::<ApiResult<_>>()?,
            scale: json!({ "min": 0, "max": RATING_MAX, "bands": RATING_BANDS }),
        },
        Trial::Intelligibility(t) => TrialView::Intelligibility {
            trial: t.id.clone(),
            training: r.kind() == SessionKind::Training,
            stimulus: links(&st, &r, &t.id, "0")?,
            played: [Media::Audio, Media::Video].into_iter().filter(|&m| r.played(&t.id, "0", m)).collect(),
            colours: COLOURS.to_vec(),
            digits: (0..10).collect(),
            letters: letters().collect(),
        },
    };
    Ok(Json(NextTrial { done: false, index: Some(index), total, trial: Some(view) }))
}

async fn media(State(st): State<AppState>, Path((session, trial, slot, media)): Path<(String, String, String, String)>) -> ApiResult<Response> {
    let media = match media.as_str() {
        "audio" => Media::Audio,
        "video" => Media::Video,
        other => return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown media {other:?}; use audio or video"))),
    };
    {
        // Refuse before consuming the one playback when there is nothing to serve.
        let r = st.sessions.snapshot(&session)?;
        let id = r.resolve_slot(&trial, &slot)?;
        let s = st.stimuli.get(id).ok_or_else(|| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("stimulus {id} missing from the store")))?;
        if media == Media::Video && s.video.is_none() {
            return Err(ApiError(StatusCode::NOT_FOUND, "this stimulus has no video".into()));
        }
    }
    let id = st.sessions.register_playback(&session, &trial, &slot, media)?;
    let s = st.stimuli.get(&id).expect("resolved stimulus");
    let (bytes, content_type) = match media {
        Media::Audio => (st.stimuli.audio_bytes(s)?, "audio/wav"),
        Media::Video => (st.stimuli.video_bytes(s)?.expect("checked video"), FRAMES_MEDIA_TYPE),
    };
    Ok(([(header::CONTENT_TYPE, content_type), (header::CACHE_CONTROL, "no-store")], bytes).into_response())
}

async fn respond(State(st): State<AppState>, Path((session, trial)): Path<(String, String)>, body: Bytes) -> ApiResult<Response> {
    let payload: ResponsePayload = parse_body(&body)?;
    let stored = st.sessions.record_response(&session, &trial, &payload)?;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

async fn export(State(st): State<AppState>, Path(session): Path<String>) -> ApiResult<Response> {
    let body = st.sessions.export(&session)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn report_json(State(st): State<AppState>) -> ApiResult<Response> {
    let report = analyze_sessions(&st.sessions.records())?;
    Ok(Json(report).into_response())
}

async fn report_csv(State(st): State<AppState>, Path(table): Path<String>) -> ApiResult<Response> {
    let report = analyze_sessions(&st.sessions.records())?;
    let body = match table.as_str() {
        "mushra.csv" => report.table_csv(TestKind::Mushra)?,
        "intelligibility.csv" => report.table_csv(TestKind::Intelligibility)?,
        "mushra_boxes.csv" => report.boxes_csv()?,
        "intelligibility_scores.csv" => report.intelligibility_csv()?,
        other => return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown report table {other:?}"))),
    };
    Ok(([(header::CONTENT_TYPE, "text/csv")], body).into_response())
}
