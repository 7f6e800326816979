//! HTTP API over a loaded library: graph browsing, runs, steering and
//! synthesis. Runs live in memory; each run is serialized behind its own lock.

use std::collections::{BTreeMap, VecDeque};
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value as JsonValue};
use tokio::sync::watch;

use crate::check::{check_library, check_swap};
use crate::dot::to_dot;
use crate::interp::{Engine, RejectKind, Run, RunError, SteeringCommand, TraceEvent};
use crate::library::{Catalog, GraphLibrary, LibraryDocument};
use crate::model::Slg;
use crate::runtime::lock;
use crate::synth::{materialize, synthesize, SynthError, SynthesisSpec};

/// Upper bound for `step?n=`.
const MAX_STEPS: usize = 100_000;

struct RunSlot {
    graph_id: String,
    run: Mutex<Run>,
    seq: watch::Sender<u64>,
    snapshotted: AtomicBool,
}

pub struct AppState {
    engine: Engine,
    runs: Mutex<BTreeMap<String, Arc<RunSlot>>>,
    snapshot_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(engine: Engine, snapshot_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState { engine, runs: Mutex::new(BTreeMap::new()), snapshot_dir })
    }

    fn lib(&self) -> &GraphLibrary {
        self.engine.library()
    }

    fn slot(&self, id: &str) -> Result<Arc<RunSlot>, ApiError> {
        lock(&self.runs).get(id).cloned().ok_or_else(|| ApiError::not_found(format!("no run `{id}`")))
    }

    /// Publishes new events and writes the audit snapshot of a finished run once.
    fn after_change(&self, slot: &RunSlot, run: &Run) {
        slot.seq.send_replace(run.trace().len() as u64);
        let Some(dir) = &self.snapshot_dir else { return };
        if !run.status().is_terminal() || slot.snapshotted.swap(true, Ordering::SeqCst) {
            return;
        }
        let doc = json!({
            "runId": run.id(),
            "graphId": slot.graph_id,
            "status": run.status(),
            "trace": run.trace(),
        });
        let path = dir.join(format!("{}.json", run.id()));
        let text = serde_json::to_string_pretty(&doc).expect("snapshot serializes");
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, text)) {
            tracing::warn!("cannot write snapshot {}: {e}", path.display());
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: JsonValue,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        ApiError { status, body: json!({ "error": error.into() }) }
    }

    fn bad_request(error: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, error)
    }

    fn not_found(error: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, error)
    }

    fn with(mut self, key: &str, v: impl serde::Serialize) -> Self {
        self.body[key] = serde_json::to_value(v).expect("serializable");
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<RunError> for ApiError {
    fn from(e: RunError) -> Self {
        let msg = e.to_string();
        match e {
            RunError::UnknownGraph(_) => ApiError::not_found(msg),
            RunError::NotRunning(_) => ApiError::new(StatusCode::CONFLICT, msg),
            RunError::Unchecked { diagnostics, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg).with("diagnostics", diagnostics)
            }
            RunError::InputArity { .. } | RunError::InputType { .. } => ApiError::bad_request(msg),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg),
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

type ApiResult<T> = Result<T, ApiError>;
type AppRef = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/library", get(get_library))
        .route("/library/check", post(check_library_doc))
        .route("/graphs", get(list_graphs).post(upload_graph))
        .route("/graphs/{id}", get(get_graph))
        .route("/graphs/{id}/dot", get(get_dot))
        .route("/runs", get(list_runs).post(start_run))
        .route("/runs/{id}", get(run_status))
        .route("/runs/{id}/step", post(step_run))
        .route("/runs/{id}/trace", get(run_trace))
        .route("/runs/{id}/events", get(run_events))
        .route("/runs/{id}/command", post(run_command))
        .route("/synthesize", post(synthesize_spec))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn get_library(State(s): AppRef) -> Json<LibraryDocument> {
    Json(s.lib().to_document())
}

/// Checks the posted library document, or the served one for an empty body.
async fn check_library_doc(State(s): AppRef, body: Bytes) -> ApiResult<Json<JsonValue>> {
    if body.iter().all(u8::is_ascii_whitespace) {
        let diagnostics = check_library(s.lib());
        return Ok(Json(json!({ "ok": diagnostics.is_empty(), "loadErrors": [], "diagnostics": diagnostics })));
    }
    let doc: LibraryDocument = parse(&body)?;
    Ok(Json(match GraphLibrary::from_document(doc) {
        Ok(lib) => {
            let diagnostics = check_library(&lib);
            json!({ "ok": diagnostics.is_empty(), "loadErrors": [], "diagnostics": diagnostics })
        }
        Err(errs) => {
            let errors: Vec<String> = errs.0.iter().map(ToString::to_string).collect();
            json!({ "ok": false, "loadErrors": errors, "diagnostics": [] })
        }
    }))
}

#[derive(Deserialize)]
struct GraphQuery {
    implements: Option<String>,
    run: Option<String>,
}

/// Service graph ids, optionally only those that may stand in for an interface.
async fn list_graphs(State(s): AppRef, Query(q): Query<GraphQuery>) -> ApiResult<Json<Vec<String>>> {
    let slot = q.run.as_deref().map(|r| s.slot(r)).transpose()?;
    let guard = slot.as_ref().map(|slot| lock(&slot.run));
    let cat: &dyn Catalog = match &guard {
        Some(run) => run.catalog(),
        None => s.lib(),
    };
    let ids = cat.service_ids();
    let Some(iface) = q.implements else { return Ok(Json(ids)) };
    if cat.interface(&iface).is_none() {
        return Err(ApiError::not_found(format!("no interface `{iface}`")));
    }
    let ok = ids
        .into_iter()
        .filter(|id| cat.service(id).is_some_and(|g| check_swap(&iface, g, cat).is_ok()))
        .collect();
    Ok(Json(ok))
}

async fn get_graph(State(s): AppRef, Path(id): Path<String>) -> ApiResult<Json<JsonValue>> {
    let lib = s.lib();
    if let Some(g) = lib.service(&id) {
        return Ok(Json(serde_json::to_value(&**g).expect("graphs serialize")));
    }
    if let Some(i) = lib.interface(&id) {
        return Ok(Json(serde_json::to_value(i).expect("interfaces serialize")));
    }
    Err(ApiError::not_found(format!("no graph `{id}`")))
}

async fn get_dot(State(s): AppRef, Path(id): Path<String>) -> ApiResult<Response> {
    let g = s.lib().service(&id).ok_or_else(|| ApiError::not_found(format!("no service graph `{id}`")))?;
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz; charset=utf-8")], to_dot(g)).into_response())
}

#[derive(Deserialize)]
struct UploadQuery {
    run: Option<String>,
}

/// Adds an ad-hoc graph to one run's overlay.
async fn upload_graph(State(s): AppRef, Query(q): Query<UploadQuery>, body: Bytes) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let run_id = q.run.ok_or_else(|| ApiError::bad_request("uploads are run-scoped; pass ?run=<runId>"))?;
    let slot = s.slot(&run_id)?;
    let g: Slg = parse(&body)?;
    let mut run = lock(&slot.run);
    match run.add_graph(g) {
        Ok(g) => Ok((StatusCode::CREATED, Json(json!({ "graphId": g.id, "runId": run_id })))),
        Err(diagnostics) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "graph rejected").with("diagnostics", diagnostics)),
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct StartRequest {
    graph_id: String,
    #[serde(default)]
    inputs: Inputs,
}

/// Inputs by position or by parameter name.
#[derive(Deserialize)]
#[serde(untagged)]
enum Inputs {
    Positional(Vec<JsonValue>),
    Named(BTreeMap<String, JsonValue>),
}

impl Default for Inputs {
    fn default() -> Self {
        Inputs::Positional(Vec::new())
    }
}

async fn list_runs(State(s): AppRef) -> Json<Vec<JsonValue>> {
    let slots: Vec<_> = lock(&s.runs).values().cloned().collect();
    Json(
        slots
            .iter()
            .map(|slot| {
                let run = lock(&slot.run);
                json!({ "runId": run.id(), "graphId": slot.graph_id, "status": run.status() })
            })
            .collect(),
    )
}

async fn start_run(State(s): AppRef, body: Bytes) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let req: StartRequest = parse(&body)?;
    let inputs = match req.inputs {
        Inputs::Positional(v) => v,
        Inputs::Named(mut named) => {
            let g = s.lib().service(&req.graph_id).ok_or_else(|| ApiError::from(RunError::UnknownGraph(req.graph_id.clone())))?;
            let mut out = Vec::new();
            for p in &g.signature.inputs {
                out.push(named.remove(&p.name).ok_or_else(|| ApiError::bad_request(format!("missing input `{}`", p.name)))?);
            }
            if let Some(extra) = named.keys().next() {
                return Err(ApiError::bad_request(format!("`{}` has no input `{extra}`", req.graph_id)));
            }
            out
        }
    };
    let run = s.engine.start_json(&req.graph_id, &inputs)?;
    let id = run.id().to_string();
    let (seq, _) = watch::channel(run.trace().len() as u64);
    let slot = Arc::new(RunSlot { graph_id: req.graph_id, run: Mutex::new(run), seq, snapshotted: AtomicBool::new(false) });
    lock(&s.runs).insert(id.clone(), slot);
    Ok((StatusCode::CREATED, Json(json!({ "runId": id }))))
}

fn status_body(slot: &RunSlot, run: &Run) -> JsonValue {
    json!({
        "runId": run.id(),
        "graphId": slot.graph_id,
        "status": run.status(),
        "lastSeq": run.trace().len(),
        "frames": run.frames(),
    })
}

async fn run_status(State(s): AppRef, Path(id): Path<String>) -> ApiResult<Json<JsonValue>> {
    let slot = s.slot(&id)?;
    let run = lock(&slot.run);
    Ok(Json(status_body(&slot, &run)))
}

#[derive(Deserialize)]
struct StepQuery {
    n: Option<usize>,
}

async fn step_run(State(s): AppRef, Path(id): Path<String>, Query(q): Query<StepQuery>) -> ApiResult<Json<JsonValue>> {
    let slot = s.slot(&id)?;
    let n = q.n.unwrap_or(1);
    if n == 0 || n > MAX_STEPS {
        return Err(ApiError::bad_request(format!("n must be within 1..={MAX_STEPS}")));
    }
    let mut run = lock(&slot.run);
    if !run.status().is_running() {
        return Err(ApiError::from(RunError::NotRunning(run.status().label())).with("status", run.status()));
    }
    let events = run.run_until_blocked(n);
    s.after_change(&slot, &run);
    Ok(Json(json!({ "events": events, "status": run.status() })))
}

#[derive(Deserialize)]
struct TraceQuery {
    since: Option<u64>,
}

async fn run_trace(State(s): AppRef, Path(id): Path<String>, Query(q): Query<TraceQuery>) -> ApiResult<Json<Vec<TraceEvent>>> {
    let slot = s.slot(&id)?;
    let run = lock(&slot.run);
    Ok(Json(run.trace_since(q.since.unwrap_or(0)).to_vec()))
}

/// Server-sent events: every trace event with `seq > since`, then new ones
/// as they are produced. The stream ends once a terminal run is drained.
async fn run_events(
    State(s): AppRef,
    Path(id): Path<String>,
    Query(q): Query<TraceQuery>,
    headers: axum::http::HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let slot = s.slot(&id)?;
    let resume = headers.get("last-event-id").and_then(|v| v.to_str().ok()).and_then(|v| v.parse().ok());
    let since = q.since.or(resume).unwrap_or(0);
    let rx = slot.seq.subscribe();
    let stream = futures::stream::unfold((slot, rx, since, VecDeque::new()), |(slot, mut rx, mut since, mut buf)| async move {
        loop {
            if let Some(ev) = buf.pop_front() {
                return Some((Ok(ev), (slot, rx, since, buf)));
            }
            let (fresh, done) = {
                let run = lock(&slot.run);
                (run.trace_since(since).to_vec(), run.status().is_terminal())
            };
            if let Some(last) = fresh.last() {
                since = last.seq;
                buf.extend(fresh.iter().map(|e| {
                    Event::default().id(e.seq.to_string()).data(e.to_json_line())
                }));
                continue;
            }
            if done || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn run_command(State(s): AppRef, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<JsonValue>> {
    let slot = s.slot(&id)?;
    let cmd: SteeringCommand = parse(&body)?;
    let mut run = lock(&slot.run);
    let res = run.submit(cmd);
    s.after_change(&slot, &run);
    match res {
        Ok(event) => Ok(Json(json!({ "accepted": true, "event": event, "status": run.status() }))),
        Err(rej) => {
            let status = match rej.kind {
                RejectKind::WrongState => StatusCode::CONFLICT,
                RejectKind::UnknownGraph | RejectKind::UnknownVar | RejectKind::Nonconforming => StatusCode::UNPROCESSABLE_ENTITY,
            };
            let mut body = serde_json::to_value(&rej).expect("rejections serialize");
            body["accepted"] = json!(false);
            body["error"] = json!(rej.reason);
            Err(ApiError { status, body })
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SynthQuery {
    graph_id: Option<String>,
}

/// Solves a spec and materializes the first solution against the library.
async fn synthesize_spec(State(s): AppRef, Query(q): Query<SynthQuery>, body: Bytes) -> ApiResult<Json<JsonValue>> {
    let spec: SynthesisSpec = parse(&body)?;
    let solution = synthesize(&spec).map_err(|e| {
        let err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string());
        match e {
            SynthError::NoSolution { unproducible, .. } => err.with("unproducible", unproducible),
            SynthError::Invalid(problems) => err.with("problems", problems),
            SynthError::Materialize(_) => err,
        }
    })?;
    let graph_id = q.graph_id.unwrap_or_else(|| format!("synthesized-{}", spec.interface_id));
    let graph = materialize(&solution.sequences[0], &spec, s.lib(), &graph_id)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(json!({ "solution": solution, "graph": graph })))
}
