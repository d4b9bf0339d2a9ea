//! JSON/SVG HTTP API over a [`Workspace`]. Reads go straight to the run
//! directory; mutations are serialized behind one lock so journal entries
//! never interleave.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use breadthcloud::concepts::VocabEdit;
use breadthcloud::mapping::AssignmentTable;
use breadthcloud::{compute_breadth, ConceptVocabulary, ScaleMode};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::error::CliError;
use crate::workspace::{CloudParams, Workspace};

pub struct AppState {
    pub workspace: Workspace,
    writes: Mutex<()>,
}

type Shared = Arc<AppState>;

impl IntoResponse for CliError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            CliError::Validation(_) => (StatusCode::BAD_REQUEST, "validation"),
            CliError::Missing(_) => (StatusCode::NOT_FOUND, "missing"),
            CliError::Gateway(_) => (StatusCode::BAD_GATEWAY, "gateway"),
            CliError::Data(_) => (StatusCode::CONFLICT, "data"),
        };
        (
            status,
            Json(json!({ "error": self.to_string(), "kind": kind })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, CliError>;

pub fn router(workspace: Workspace) -> Router {
    let state = Arc::new(AppState {
        workspace,
        writes: Mutex::new(()),
    });
    Router::new()
        .route("/api/conditions", get(conditions))
        .route("/api/vocab/{condition}", get(vocab))
        .route("/api/vocab/{condition}/pin", post(pin))
        .route("/api/vocab/{condition}/seed", post(seed))
        .route("/api/vocab/{condition}/edits", post(edits))
        .route("/api/table/{condition}", get(table))
        .route("/api/table/{condition}/cell", patch(cell))
        .route("/api/cloud/{condition}", get(cloud))
        .route("/api/diff", get(diff))
        .route("/api/transcript/{id}", get(transcript))
        .route("/api/rerun/{stage}/{condition}", post(rerun))
        .with_state(state)
}

/// Runs blocking workspace code on the blocking pool.
async fn blocking<T: Send + 'static>(
    state: &Shared,
    f: impl FnOnce(&Workspace) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state.workspace))
        .await
        .map_err(|e| CliError::Data(format!("worker failed: {e}")))?
}

/// Like [`blocking`], holding the write lock for the duration.
async fn exclusive<T: Send + 'static>(
    state: &Shared,
    f: impl FnOnce(&Workspace) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let _guard = state.writes.lock().await;
    blocking(state, f).await
}

fn vocab_json(vocab: &ConceptVocabulary) -> Value {
    serde_json::from_str(&vocab.to_json()).expect("vocabulary json is valid")
}

fn table_json(table: &AssignmentTable) -> Value {
    let breadth = compute_breadth(table, true).ok();
    let rows: Vec<Value> = table
        .rows()
        .iter()
        .map(|r| {
            json!({
                "transcript_id": r.transcript_id,
                "participant_id": r.participant_id,
                "cells": r.cells.iter().map(|c| json!({
                    "value": c.value,
                    "provenance": c.provenance,
                    "soft_score": c.soft_score,
                    "note": c.note,
                })).collect::<Vec<_>>(),
                "incomplete": r.incomplete,
            })
        })
        .collect();
    json!({
        "condition_id": table.condition_id,
        "vocabulary_version": table.vocabulary_version,
        "run_id": table.run_id,
        "tau": table.tau,
        "mode": table.mode,
        "stale": table.is_stale(),
        "concept_keys": table.concept_keys(),
        "concept_texts": table.concept_texts(),
        "rows": rows,
        "journal_length": table.journal().len(),
        "m_total": breadth.as_ref().map(|b| b.m_total),
        "breadth": breadth.as_ref().map(|b| &b.counts),
        "forced": breadth.as_ref().and_then(|b| b.forced.clone()),
    })
}

fn svg(body: String) -> Response {
    ([(header::CONTENT_TYPE, "image/svg+xml")], body).into_response()
}

async fn conditions(State(state): State<Shared>) -> Json<Value> {
    let sizes = state.workspace.corpus().condition_sizes();
    let list: Vec<Value> = state
        .workspace
        .conditions()
        .iter()
        .map(|c| json!({ "condition_id": c, "m": sizes.get(c.as_str()).copied().unwrap_or(0) }))
        .collect();
    Json(json!({ "run_id": state.workspace.run_id, "conditions": list }))
}

async fn vocab(
    State(state): State<Shared>,
    Path(condition): Path<String>,
) -> ApiResult<Json<Value>> {
    blocking(&state, move |ws| {
        Ok(Json(vocab_json(&ws.load_vocab(&condition)?)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PinBody {
    concept_key: String,
    #[serde(default = "yes")]
    pinned: bool,
}

fn yes() -> bool {
    true
}

async fn pin(
    State(state): State<Shared>,
    Path(condition): Path<String>,
    Json(body): Json<PinBody>,
) -> ApiResult<Json<Value>> {
    exclusive(&state, move |ws| {
        Ok(Json(vocab_json(&ws.pin(
            &condition,
            &body.concept_key,
            body.pinned,
        )?)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedBody {
    phrases: Vec<String>,
    #[serde(default)]
    pin: bool,
}

async fn seed(
    State(state): State<Shared>,
    Path(condition): Path<String>,
    Json(body): Json<SeedBody>,
) -> ApiResult<Json<Value>> {
    exclusive(&state, move |ws| {
        let (vocab, notices) = ws.seed(&condition, &body.phrases, body.pin)?;
        let mut out = vocab_json(&vocab);
        out["notices"] = json!(notices);
        Ok(Json(out))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditsBody {
    edits: Vec<VocabEdit>,
}

async fn edits(
    State(state): State<Shared>,
    Path(condition): Path<String>,
    Json(body): Json<EditsBody>,
) -> ApiResult<Json<Value>> {
    exclusive(&state, move |ws| {
        Ok(Json(vocab_json(&ws.edit(&condition, &body.edits)?)))
    })
    .await
}

async fn table(
    State(state): State<Shared>,
    Path(condition): Path<String>,
) -> ApiResult<Json<Value>> {
    blocking(&state, move |ws| {
        Ok(Json(table_json(&ws.load_table(&condition)?)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CellBody {
    transcript_id: String,
    concept_key: String,
    value: bool,
    #[serde(default)]
    note: Option<String>,
}

async fn cell(
    State(state): State<Shared>,
    Path(condition): Path<String>,
    Json(body): Json<CellBody>,
) -> ApiResult<Json<Value>> {
    exclusive(&state, move |ws| {
        let table = ws.audit(
            &condition,
            &body.transcript_id,
            &body.concept_key,
            body.value,
            body.note.as_deref(),
        )?;
        Ok(Json(table_json(&table)))
    })
    .await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CloudQuery {
    scale: Option<String>,
    seed: Option<u64>,
    top_k: Option<usize>,
    #[serde(default)]
    force: bool,
}

impl CloudQuery {
    fn params(self, ws: &Workspace) -> ApiResult<CloudParams> {
        let defaults = ws.default_cloud_params();
        if self.top_k == Some(0) {
            return Err(CliError::Validation("top_k must be at least 1".into()));
        }
        Ok(CloudParams {
            scale: match self.scale {
                Some(s) => s.parse::<ScaleMode>()?,
                None => defaults.scale,
            },
            seed: self.seed.unwrap_or(defaults.seed),
            top_k: self.top_k.or(defaults.top_k),
            force: self.force,
        })
    }
}

async fn cloud(
    State(state): State<Shared>,
    Path(condition): Path<String>,
    Query(query): Query<CloudQuery>,
) -> ApiResult<Response> {
    blocking(&state, move |ws| {
        let params = query.params(ws)?;
        Ok(svg(ws.cloud(&condition, params)?.svg))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffQuery {
    a: String,
    b: String,
    margin: Option<u32>,
    #[serde(default)]
    separate: bool,
    seed: Option<u64>,
    top_k: Option<usize>,
    #[serde(default)]
    force: bool,
}

async fn diff(State(state): State<Shared>, Query(q): Query<DiffQuery>) -> ApiResult<Response> {
    blocking(&state, move |ws| {
        let params = CloudQuery {
            scale: None,
            seed: q.seed,
            top_k: q.top_k,
            force: q.force,
        }
        .params(ws)?;
        let margin = q.margin.unwrap_or(ws.config.margin);
        Ok(svg(ws.diff(&q.a, &q.b, margin, q.separate, params)?.svg))
    })
    .await
}

async fn transcript(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let t = state.workspace.corpus().get(&id)?;
    Ok(Json(json!({
        "id": t.id,
        "participant_id": t.participant_id,
        "condition_id": t.condition_id,
        "source_ref": t.source_ref,
        "text": t.text,
    })))
}

async fn rerun(
    State(state): State<Shared>,
    Path((stage, condition)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    exclusive(&state, move |ws| match stage.as_str() {
        "elicit" => Ok(Json(vocab_json(
            &ws.elicit(&condition, ws.config.n_topics)?.vocabulary,
        ))),
        "map" => Ok(Json(table_json(&ws.map(
            &condition,
            ws.config.tau,
            ws.config.mode,
        )?))),
        other => Err(CliError::Validation(format!(
            "unknown stage {other:?}; expected elicit or map"
        ))),
    })
    .await
}

/// Serves until the process is stopped.
pub async fn serve(workspace: Workspace, bind: &str) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| CliError::Validation(format!("cannot bind {bind}: {e}")))?;
    tracing::info!(address = %bind, run = %workspace.run_id, "serving");
    axum::serve(listener, router(workspace))
        .await
        .map_err(|e| CliError::Data(format!("server error: {e}")))
}
