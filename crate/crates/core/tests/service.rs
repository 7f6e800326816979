mod support;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use hopm::service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(snapshots: Option<std::path::PathBuf>) -> Router {
    router(AppState::new(support::engine(), snapshots))
}

fn app() -> Router {
    app_with(None)
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = send_raw(app, method, uri, body.map(|b| b.to_string())).await;
    let v = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap_or(Value::String(text)) };
    (status, v)
}

async fn send_raw(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn start(app: &Router, graph: &str, inputs: Value) -> String {
    let (st, v) = send(app, Method::POST, "/runs", Some(json!({ "graphId": graph, "inputs": inputs }))).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["runId"].as_str().unwrap().to_string()
}

async fn step(app: &Router, run: &str) -> Value {
    let (st, v) = send(app, Method::POST, &format!("/runs/{run}/step?n=1000"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    v
}

async fn command(app: &Router, run: &str, cmd: Value) -> (StatusCode, Value) {
    send(app, Method::POST, &format!("/runs/{run}/command"), Some(cmd)).await
}

#[tokio::test]
async fn library_and_graph_queries() {
    let app = app();
    let (st, lib) = send(&app, Method::GET, "/library", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(lib["graphs"].as_array().unwrap().len(), 9);

    let (st, ids) = send(&app, Method::GET, "/graphs?implements=Payment", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(ids, json!(["CreditCardPayment", "InvoicePayment"]));
    let (st, ids) = send(&app, Method::GET, "/graphs?implements=PaperValidation", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(ids, json!(["validate-payment", "validate-payment-flight-hotel"]));
    let (st, _) = send(&app, Method::GET, "/graphs?implements=Nope", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (st, g) = send(&app, Method::GET, "/graphs/InvoicePayment", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(g["implementsId"], "Payment");
    let (st, i) = send(&app, Method::GET, "/graphs/Payment", None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(i["signature"]["branches"].is_object());
    let (st, _) = send(&app, Method::GET, "/graphs/missing", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (st, dot) = send_raw(&app, Method::GET, "/graphs/loose-proceedings-validation/dot", None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(dot.contains("style=dashed"));

    let (st, v) = send(&app, Method::POST, "/library/check", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["ok"], true);
    let broken = json!({ "graphs": [{ "id": "g", "signature": { "inputs": [], "branches": {} }, "nodes": {}, "edges": [] }] });
    let (st, v) = send(&app, Method::POST, "/library/check", Some(broken)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["ok"], false);
    assert!(!v["loadErrors"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn steer_a_run_to_completion() {
    let app = app();
    let run = start(&app, "conference-flow", json!({ "user": "alice", "proceedings": "ocs-2012" })).await;
    let v = step(&app, &run).await;
    assert_eq!(v["status"]["state"], "paused");
    assert_eq!(v["status"]["reason"]["kind"], "awaitingSelection");
    let (_, status) = send(&app, Method::GET, &format!("/runs/{run}"), None).await;
    assert_eq!(status["graphId"], "conference-flow");
    assert!(!status["frames"].as_array().unwrap().is_empty());

    let before = send(&app, Method::GET, &format!("/runs/{run}/trace"), None).await.1;

    // stepping a paused run conflicts; nonconforming selections are refused
    let (st, _) = send(&app, Method::POST, &format!("/runs/{run}/step"), None).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, v) = command(&app, &run, json!({ "command": "selectVariant", "var": "paymentProcess", "graphId": "validate-payment" })).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["accepted"], false);
    assert_eq!(v["kind"], "nonconforming");
    let (st, v) = command(&app, &run, json!({ "command": "resume" })).await;
    assert_eq!(st, StatusCode::CONFLICT, "{v}");

    let (st, v) = command(&app, &run, json!({ "command": "selectVariant", "var": "paymentProcess", "graphId": "InvoicePayment" })).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["event"]["event"], "variantSelected");
    loop {
        let (st, _) = command(&app, &run, json!({ "command": "resume" })).await;
        assert_eq!(st, StatusCode::OK);
        let v = step(&app, &run).await;
        if v["status"]["state"] != "paused" {
            assert_eq!(v["status"]["state"], "finished");
            break;
        }
    }

    // earlier events are never rewritten
    let after = send(&app, Method::GET, &format!("/runs/{run}/trace"), None).await.1;
    let before = before.as_array().unwrap();
    assert_eq!(&after.as_array().unwrap()[..before.len()], &before[..]);
    let (_, tail) = send(&app, Method::GET, &format!("/runs/{run}/trace?since={}", before.len()), None).await;
    assert_eq!(tail[0]["seq"], before.len() + 1);
    assert!(after.as_array().unwrap().iter().any(|e| e["activityId"] == "send invoice"));

    let (st, _) = command(&app, &run, json!({ "command": "abort" })).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (_, runs) = send(&app, Method::GET, "/runs", None).await;
    assert_eq!(runs[0]["runId"], run);
}

#[tokio::test]
async fn uploaded_graph_used_for_an_edit() {
    let app = app();
    let run = start(&app, "prepare-proceedings", json!(["ocs-2012"])).await;
    let v = step(&app, &run).await;
    assert_eq!(v["status"]["reason"]["kind"], "interactive");

    let (_, mut g) = send(&app, Method::GET, "/graphs/validate-payment-flight-hotel", None).await;
    g["id"] = json!("custom-check");
    let (st, v) = send(&app, Method::POST, &format!("/graphs?run={run}"), Some(g.clone())).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    let (st, _) = send(&app, Method::POST, "/graphs", Some(g.clone())).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    // uploads stay in their run
    let (_, visible) = send(&app, Method::GET, &format!("/graphs?implements=PaperValidation&run={run}"), None).await;
    assert!(visible.as_array().unwrap().contains(&json!("custom-check")));
    let (_, global) = send(&app, Method::GET, "/graphs?implements=PaperValidation", None).await;
    assert!(!global.as_array().unwrap().contains(&json!("custom-check")));

    let mut bad = g.clone();
    bad["id"] = json!("bad-check");
    bad["signature"]["branches"]["valid"] = json!([{ "name": "extra", "type": { "type": "string" } }]);
    let (st, v) = send(&app, Method::POST, &format!("/graphs?run={run}"), Some(bad)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert!(!v["diagnostics"].as_array().unwrap().is_empty());

    let (st, v) =
        command(&app, &run, json!({ "command": "applyEdit", "var": "registeredCheck", "replacementGraphId": "custom-check" })).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["event"]["event"], "editApplied");
    let (st, v) = command(&app, &run, json!({ "command": "applyEdit", "var": "nope", "replacementGraphId": "custom-check" })).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["kind"], "unknownVar");
    command(&app, &run, json!({ "command": "resume" })).await;
    step(&app, &run).await;
    let (_, trace) = send(&app, Method::GET, &format!("/runs/{run}/trace"), None).await;
    assert!(trace.as_array().unwrap().iter().any(|e| e["graphId"] == "custom-check" && e["event"] == "enterGraph"));
}

#[tokio::test]
async fn malformed_and_unknown_requests() {
    let app = app();
    let (st, _) = send_raw(&app, Method::POST, "/runs", Some("{not json".into())).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = send(&app, Method::POST, "/runs", Some(json!({ "graphId": "nope" }))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = send(&app, Method::POST, "/runs", Some(json!({ "graphId": "conference-flow", "inputs": ["alice"] }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = send(&app, Method::POST, "/runs", Some(json!({ "graphId": "conference-flow", "inputs": { "user": "alice" } }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = send(&app, Method::POST, "/runs", Some(json!({ "graphId": "conference-flow", "inputs": [true, "ocs-2012"] }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = send(&app, Method::GET, "/runs/run-99", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = send(&app, Method::POST, "/runs/run-99/command", Some(json!({ "command": "resume" }))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let run = start(&app, "register-to-conference", json!(["alice"])).await;
    let (st, _) = command(&app, &run, json!({ "command": "fly" })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = send(&app, Method::POST, &format!("/runs/{run}/step?n=0"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn synthesize_endpoint() {
    let app = app();
    let spec: Value = serde_json::from_str(include_str!("../corpus/ocs/validation-spec.json")).unwrap();
    let (st, v) = send(&app, Method::POST, "/synthesize?graphId=chain", Some(spec.clone())).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["solution"]["length"], 2);
    assert_eq!(v["graph"]["id"], "chain");

    let mut impossible = spec;
    impossible["goals"] = json!(["F \"copyright form?\""]);
    impossible["maxLength"] = json!(1);
    let (st, _) = send(&app, Method::POST, "/synthesize", Some(impossible)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
}

/// Parses an SSE body into `(id, data)` pairs.
fn sse_events(body: &str) -> Vec<(u64, Value)> {
    body.split("\n\n")
        .filter_map(|block| {
            let mut id = None;
            let mut data = None;
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = v.trim().parse().ok();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data = serde_json::from_str(v.trim()).ok();
                }
            }
            Some((id?, data?))
        })
        .collect()
}

#[tokio::test]
async fn event_stream_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(Some(dir.path().to_path_buf()));
    let run = start(&app, "register-to-conference", json!(["alice"])).await;
    step(&app, &run).await;
    command(&app, &run, json!({ "command": "abort" })).await;

    let (st, body) = send_raw(&app, Method::GET, &format!("/runs/{run}/events"), None).await;
    assert_eq!(st, StatusCode::OK);
    let events = sse_events(&body);
    let (_, trace) = send(&app, Method::GET, &format!("/runs/{run}/trace"), None).await;
    assert_eq!(events.len(), trace.as_array().unwrap().len());
    assert!(events.iter().enumerate().all(|(i, (id, data))| *id == i as u64 + 1 && data["seq"] == *id));
    assert_eq!(events.last().unwrap().1["event"], "runAborted");

    let (_, body) = send_raw(&app, Method::GET, &format!("/runs/{run}/events?since=2"), None).await;
    assert_eq!(sse_events(&body)[0].0, 3);

    let snap: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{run}.json"))).unwrap()).unwrap();
    assert_eq!(snap["status"]["state"], "aborted");
    assert_eq!(snap["trace"], trace);
}
