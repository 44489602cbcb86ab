#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use insq_core::geometry::{Point, Rect, Site};
use insq_core::network::{EdgeId, EdgeSpec, Vertex, VertexId};
use insq_core::scenario::{GraphSpec, SiteSet, TrajectorySpec};
use insq_core::{save_scenario, Mode, Scenario};
use insq_service::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub fn app() -> Router {
    router(AppState::new(Duration::from_secs(600)), None)
}

pub fn app_with(state: Arc<AppState>) -> Router {
    router(state, None)
}

/// Sites at (0,0) and (10,0); the query walks (1,1) to (9,1) at unit speed.
pub fn two_site() -> Scenario {
    Scenario {
        mode: Mode::Plane,
        k: 1,
        rho: 1.0,
        speed: 1.0,
        bbox: Rect::new(-1.0, -5.0, 11.0, 5.0),
        sites: SiteSet::Plane(vec![Site::new(0, 0.0, 0.0), Site::new(1, 10.0, 0.0)]),
        graph: None,
        trajectory: TrajectorySpec::Plane(vec![Point::new(1.0, 1.0), Point::new(9.0, 1.0)]),
        seed: 0,
        ticks: None,
    }
}

/// Path v1..v5 with sites at both ends.
pub fn path_network() -> Scenario {
    Scenario {
        mode: Mode::Network,
        k: 1,
        rho: 1.0,
        speed: 0.5,
        bbox: Rect::new(0.0, -1.0, 6.0, 1.0),
        sites: SiteSet::Network(vec![VertexId(1), VertexId(5)]),
        graph: Some(GraphSpec {
            vertices: (1..=5)
                .map(|i| Vertex {
                    id: VertexId(i),
                    pos: Point::new(i as f64, 0.0),
                })
                .collect(),
            edges: (1..=4)
                .map(|i| EdgeSpec {
                    id: EdgeId(i),
                    u: VertexId(i),
                    v: VertexId(i + 1),
                    length: None,
                })
                .collect(),
        }),
        trajectory: TrajectorySpec::Network((1..=5).map(VertexId).collect()),
        seed: 0,
        ticks: None,
    }
}

pub async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Vec<u8>>,
) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap();
    (status, bytes.to_vec())
}

pub async fn call_json(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body.map(|v| v.to_string().into_bytes())).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

pub async fn create(app: &Router) -> String {
    let (status, v) = call_json(app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    v["id"].as_str().unwrap().to_owned()
}

pub async fn put(app: &Router, id: &str, s: &Scenario) {
    let (status, body) = call(
        app,
        Method::PUT,
        &format!("/api/sessions/{id}/scenario"),
        Some(save_scenario(s)),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
}

pub async fn control(app: &Router, id: &str, cmd: Value) -> (StatusCode, Value) {
    call_json(
        app,
        Method::POST,
        &format!("/api/sessions/{id}/control"),
        Some(cmd),
    )
    .await
}

pub async fn edit(app: &Router, id: &str, op: Value) -> (StatusCode, Value) {
    call_json(
        app,
        Method::POST,
        &format!("/api/sessions/{id}/edit"),
        Some(op),
    )
    .await
}

pub async fn status(app: &Router, id: &str) -> Value {
    let (code, v) = call_json(app, Method::GET, &format!("/api/sessions/{id}"), None).await;
    assert_eq!(code, StatusCode::OK);
    v
}

/// Steps until the completion message; returns the tick messages.
pub async fn step_all(app: &Router, id: &str) -> Vec<Value> {
    let mut out = Vec::new();
    loop {
        let (code, v) = control(app, id, serde_json::json!({ "cmd": "step" })).await;
        assert_eq!(code, StatusCode::OK, "{v}");
        if v.get("complete").is_some() {
            return out;
        }
        out.push(v);
        assert!(out.len() < 100_000, "run does not end");
    }
}

/// The stream form of a batch report.
pub fn expected_messages(s: &Scenario) -> Vec<Value> {
    insq_core::run_simulation(s)
        .unwrap()
        .reports
        .iter()
        .map(|r| serde_json::to_value(insq_service::StreamMessage::from(r)).unwrap())
        .collect()
}
