// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use entailsync::server::router;
use entailsync::sim::{RunOptions, Session};

fn app(name: &str) -> Router {
    let opts = RunOptions {
        interactive: true,
        ..Default::default()
    };
    router(Arc::new(Mutex::new(
        Session::new(common::load(name), opts).unwrap(),
    )))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

/// Steps the calendar scenario until Alice holds the conflict.
async fn to_conflict(app: &Router) -> Value {
    for _ in 0..3 {
        let (s, _) = call(app, Method::POST, "/step", None).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, conflicts) = call(app, Method::GET, "/conflicts", None).await;
    assert_eq!(s, StatusCode::OK);
    conflicts
}

#[tokio::test]
async fn state_starts_at_the_first_event() {
    let app = app("calendar");
    let (s, v) = call(&app, Method::GET, "/state", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["cursor"], 0);
    assert_eq!(v["replicas"], json!(["alice", "bob"]));
    assert_eq!(v["registers"], json!(["title", "time", "location"]));
    assert_eq!(v["report"]["states"]["bob"]["location"], "Bambi's");
}

#[tokio::test]
async fn calendar_conflict_then_keep_both_plan() {
    let app = app("calendar");
    let conflicts = to_conflict(&app).await;
    let list = conflicts.as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["replica"], "alice");
    let trigger = list[0]["triggers"][0].clone();
    let local = list[0]["local"][0].clone();

    // overlapping keep/cancel
    let bad = json!({"trigger": trigger, "keep": [local], "cancel": [local, trigger]});
    let (s, v) = call(&app, Method::POST, "/plan", Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert!(v["error"].as_str().unwrap().contains("illegal"));

    // action outside the basis
    let bad = json!({"trigger": trigger, "keep": [local, trigger], "cancel": [],
                     "merged": [{"op": "add", "reg": 1, "value": 1}]});
    let (s, _) = call(&app, Method::POST, "/plan", Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let good = json!({"replica": "alice", "trigger": trigger, "keep": [local, trigger], "cancel": [],
        "merged": [{"op": "mov", "reg": 1, "value": "1pm-2pm"}, {"op": "mov", "reg": 2, "value": "Meadow's"}]});
    let (s, v) = call(&app, Method::POST, "/plan", Some(good)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["states"]["alice"]["time"], "1pm-2pm");
    assert_eq!(v["states"]["alice"]["location"], "Meadow's");
    assert_eq!(v["conflicts"], json!([]));

    let (s, v) = call(&app, Method::POST, "/sync?from=alice&to=bob", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["delivered"], true);
    let (_, st) = call(&app, Method::GET, "/state", None).await;
    assert_eq!(st["report"]["converged"], true);
}

#[tokio::test]
async fn plan_without_pending_conflict_is_409() {
    let app = app("calendar");
    let (s, _) = call(
        &app,
        Method::POST,
        "/plan",
        Some(json!({"trigger": "bob:3", "keep": []})),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn malformed_plan_is_400() {
    let app = app("calendar");
    let (s, _) = call(&app, Method::POST, "/plan", Some(json!({"keep": "nope"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn graph_endpoint_renders_wire_and_dot() {
    let app = app("calendar");
    to_conflict(&app).await;
    let (s, v) = call(&app, Method::GET, "/graph/alice", None).await;
    assert_eq!(s, StatusCode::OK);
    // constructors plus Alice's edit; Bob's is quarantined
    assert_eq!(v["graph"]["nodes"].as_array().unwrap().len(), 4);
    assert!(v["dot"].as_str().unwrap().starts_with("digraph \"alice\""));
    let (s, _) = call(&app, Method::GET, "/graph/carol", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn syncs_in_serve_mode_never_resolve_on_their_own() {
    // arith_merge asks for replay-all, but served sessions hold conflicts for a plan
    let app = app("arith_merge");
    for _ in 0..7 {
        call(&app, Method::POST, "/step", None).await;
    }
    let (_, v) = call(&app, Method::GET, "/conflicts", None).await;
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn stepping_past_the_end_reports_done() {
    let app = app("empty");
    let (s, v) = call(&app, Method::POST, "/step", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"outcome": null, "done": true}));
}

#[tokio::test]
async fn sync_with_unknown_replica_is_404() {
    let app = app("calendar");
    let (s, _) = call(&app, Method::POST, "/sync?from=alice&to=zed", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
