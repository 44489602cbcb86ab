mod common;

use std::net::SocketAddr;
use std::time::Duration;

use common::*;
use futures_util::StreamExt;
use insq_core::scenario::{generate_random, GenerateParams, TrajectorySpec};
use insq_core::{Mode, Point, Scenario};
use insq_service::{AppState, CLOSE_UNKNOWN_SESSION};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::Message;

async fn server() -> (SocketAddr, axum::Router) {
    let app = router_for_tests();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let served = app.clone();
    tokio::spawn(async move { axum::serve(listener, served).await.unwrap() });
    (addr, app)
}

fn router_for_tests() -> axum::Router {
    app_with(AppState::new(Duration::from_secs(600)))
}

type Socket =
    tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: SocketAddr, id: &str, query: &str) -> Socket {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws/sessions/{id}{query}"))
        .await
        .unwrap();
    ws
}

/// Tick messages until the completion notice.
async fn collect(ws: &mut Socket) -> Vec<Value> {
    let mut out = Vec::new();
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next())
            .await
            .expect("stream stalled")
            .expect("stream ended")
            .unwrap();
        let Message::Text(text) = msg else { continue };
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("error").is_none(), "{v}");
        if v.get("complete").is_some() {
            assert_eq!(
                v["t"],
                out.last().map_or(json!(null), |m: &Value| m["t"].clone())
            );
            return out;
        }
        out.push(v);
    }
}

async fn stream_run(s: &Scenario, query: &str) -> Vec<Value> {
    let (addr, app) = server().await;
    let id = create(&app).await;
    put(&app, &id, s).await;
    let mut ws = connect(addr, &id, query).await;
    let (code, _) = control(&app, &id, json!({ "cmd": "start", "interval_ms": 0 })).await;
    assert!(code.is_success());
    collect(&mut ws).await
}

fn generated(mode: Mode, seed: u64) -> Scenario {
    generate_random(&GenerateParams {
        mode,
        n: 30,
        grid: Some((7, 7)),
        k: 3,
        rho: 1.6,
        ticks: 300,
        seed,
    })
    .unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_equals_batch_reports() {
    for s in [
        two_site(),
        path_network(),
        generated(Mode::Plane, 5),
        generated(Mode::Network, 6),
    ] {
        let streamed = stream_run(&s, "").await;
        assert_eq!(streamed, expected_messages(&s), "{}", s.mode);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_site_crossing_streams_one_swap() {
    let msgs = stream_run(&two_site(), "").await;
    let events: Vec<&str> = msgs.iter().map(|m| m["event"].as_str().unwrap()).collect();
    assert_eq!(
        events.iter().filter(|e| **e != "none").collect::<Vec<_>>(),
        vec![&"swap"]
    );
    assert_eq!(msgs.iter().position(|m| m["event"] == "swap"), Some(5));
    for m in &msgs {
        if m["event"] == "none" && !m["red_radius"].is_null() {
            assert!(m["green_radius"].as_f64() <= m["red_radius"].as_f64());
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stationary_query_streams_only_none() {
    let mut s = two_site();
    s.trajectory = TrajectorySpec::Plane(vec![Point::new(2.0, 1.0)]);
    s.ticks = Some(25);
    let msgs = stream_run(&s, "").await;
    assert_eq!(msgs.len(), 25);
    assert!(msgs
        .iter()
        .all(|m| m["event"] == "none" && m["valid"] == true));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn cell_is_sent_only_on_request() {
    let with = stream_run(&two_site(), "?cell=true").await;
    for m in &with {
        let cell = m["cell"].as_array().expect("cell requested");
        assert!(cell.len() >= 3);
    }
    let without = stream_run(&two_site(), "").await;
    assert!(without.iter().all(|m| m.get("cell").is_none()));
    // apart from the cell the messages agree
    let stripped: Vec<Value> = with
        .into_iter()
        .map(|mut m| {
            m.as_object_mut().unwrap().remove("cell");
            m
        })
        .collect();
    assert_eq!(stripped, without);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scene_replacement_is_announced() {
    let (addr, app) = server().await;
    let id = create(&app).await;
    let mut ws = connect(addr, &id, "").await;
    put(&app, &id, &two_site()).await;
    let msg = ws.next().await.unwrap().unwrap();
    assert_eq!(
        serde_json::from_str::<Value>(msg.to_text().unwrap()).unwrap(),
        json!({ "reset": true })
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unknown_session_closes_with_code() {
    let (addr, _) = server().await;
    let mut ws = connect(addr, "missing", "").await;
    let msg = ws.next().await.unwrap().unwrap();
    let Message::Close(Some(frame)) = msg else {
        panic!("expected close, got {msg:?}")
    };
    assert_eq!(frame.code, CloseCode::from(CLOSE_UNKNOWN_SESSION));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serve_rejects_a_taken_port() {
    let taken = std::net::TcpListener::bind("0.0.0.0:0").unwrap();
    let config = insq_service::ServiceConfig {
        port: taken.local_addr().unwrap().port(),
        ..Default::default()
    };
    let err = insq_service::serve(config).await.unwrap_err();
    assert!(
        matches!(err, insq_service::ServiceError::Bind { .. }),
        "{err}"
    );
}
