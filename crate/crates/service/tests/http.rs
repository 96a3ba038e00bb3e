use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use splathead_core::{frame_io, Camera, TemplateMesh};
use splathead_neural::{synthetic_reference, FaceSketch, Model, SketchEdit};
use splathead_service::api::{EditResponse, SessionState, UndoResponse};
use splathead_service::{router, BusyPolicy, Service, ServiceConfig};
use tower::ServiceExt;

const FRAME: u32 = 128;

fn service(configure: impl FnOnce(&mut ServiceConfig)) -> Arc<Service> {
    let mut config = ServiceConfig { frame_size: FRAME, ..ServiceConfig::default() };
    configure(&mut config);
    Arc::new(Service::new(config, Model::toy(3), TemplateMesh::default_head()).unwrap())
}

fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn face(seed: u64) -> FaceSketch {
    FaceSketch::random(seed)
}

fn create_body(seed: u64) -> Value {
    json!({
        "sketch_png": b64(&face(seed).render(256).to_png()),
        "reference_png": b64(&synthetic_reference(seed, 256).to_png()),
    })
}

fn edit_body(seed: u64, edit: SketchEdit) -> Value {
    json!({ "sketch_png": b64(&face(seed).edited(edit).render(256).to_png()) })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, Option<String>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let hash = res.headers().get("x-frame-hash").map(|h| h.to_str().unwrap().to_string());
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, hash)
}

async fn json_call<T: serde::de::DeserializeOwned>(app: &Router, method: &str, uri: &str, body: Option<Value>) -> T {
    let (status, bytes, _) = call(app, method, uri, body).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

fn error_code(bytes: &[u8]) -> String {
    let v: Value = serde_json::from_slice(bytes).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn identical_inputs_give_identical_frames() {
    let app = router(service(|_| {}));
    let a: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(7))).await;
    let b: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(7))).await;
    assert_ne!(a.id, b.id);
    assert_eq!(a.frame_hash, b.frame_hash);
    assert_eq!(a.set_hash, b.set_hash);
    assert_eq!(a.depth, 1);

    let (status, png, hash) = call(&app, "GET", &format!("/sessions/{}/frame", a.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(hash.as_deref(), Some(a.frame_hash.as_str()));
    assert_eq!(&png[1..4], b"PNG");

    let (_, raw, raw_hash) = call(&app, "GET", &format!("/sessions/{}/frame?format=raw", b.id), None).await;
    assert_eq!(raw_hash, hash);
    let frame = frame_io::decode_raw(&raw).unwrap();
    assert_eq!(splathead_edit::frame_hash(&frame), a.frame_hash);
}

#[tokio::test]
async fn frame_from_another_camera() {
    let app = router(service(|_| {}));
    let s: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(8))).await;
    let side = Camera::orbit(glam::Vec3::ZERO, 0.7, 0.1, 3.6, (64, 48)).unwrap();
    let cam = serde_json::to_string(&side).unwrap();
    let uri = format!("/sessions/{}/frame?format=raw&cam={}", s.id, urlencode(&cam));
    let (status, raw, hash) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&raw));
    let frame = frame_io::decode_raw(&raw).unwrap();
    assert_eq!((frame.width(), frame.height()), (64, 48));
    assert_ne!(hash.unwrap(), s.frame_hash);

    let (status, body, _) = call(&app, "GET", &format!("/sessions/{}/frame?cam=%7Bnope", s.id), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "input_error");
}

fn urlencode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

#[tokio::test]
async fn malformed_input_is_an_input_error() {
    let app = router(service(|_| {}));
    let mut body = create_body(1);
    body["sketch_png"] = json!(b64(b"\x89PNG\r\n\x1a\n definitely not a png"));
    let (status, bytes, _) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&bytes), "input_error");

    let mut body = create_body(1);
    body["reference_png"] = json!("***");
    let (status, bytes, _) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&bytes), "input_error");

    let s: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(1))).await;
    let (status, bytes, _) = call(&app, "POST", &format!("/sessions/{}/edits", s.id), Some(json!({"sketch_png": "AAAA"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&bytes), "input_error");
    let after: SessionState = json_call(&app, "GET", &format!("/sessions/{}/state", s.id), None).await;
    assert_eq!(after, s);
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(service(|c| c.session_dir = Some(dir.path().into())));
    for (method, uri) in [
        ("GET", "/sessions/nope/state"),
        ("GET", "/sessions/nope/frame"),
        ("POST", "/sessions/nope/undo"),
        ("GET", "/sessions/..%2F..%2Fetc/state"),
    ] {
        let (status, bytes, _) = call(&app, method, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{method} {uri}");
        assert_eq!(error_code(&bytes), "not_found");
    }
    let (status, bytes, _) = call(&app, "POST", "/sessions/nope/edits", Some(edit_body(1, SketchEdit::Frown))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&bytes), "not_found");
}

#[tokio::test]
async fn edit_then_undo_restores_the_frame() {
    let app = router(service(|_| {}));
    let s: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(3))).await;
    let e: EditResponse =
        json_call(&app, "POST", &format!("/sessions/{}/edits", s.id), Some(edit_body(3, SketchEdit::WidenSmile))).await;
    assert!(!e.summary.no_op);
    assert_eq!(e.state.depth, 2);
    assert_ne!(e.state.set_hash, s.set_hash);

    let u: UndoResponse = json_call(&app, "POST", &format!("/sessions/{}/undo", s.id), None).await;
    assert!(u.undone);
    assert_eq!(u.state, s);
    let u: UndoResponse = json_call(&app, "POST", &format!("/sessions/{}/undo", s.id), None).await;
    assert!(!u.undone);
    assert_eq!(u.state, s);
}

#[tokio::test]
async fn a_second_edit_while_one_runs_is_busy() {
    let svc = service(|_| {});
    let app = router(svc.clone());
    let s: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(4))).await;
    let ticket = svc.write_ticket(&s.id).await.unwrap();
    let (status, bytes, _) = call(&app, "POST", &format!("/sessions/{}/edits", s.id), Some(edit_body(4, SketchEdit::Frown))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&bytes), "busy");
    // Reads are still served while the writer slot is taken.
    let (status, _, hash) = call(&app, "GET", &format!("/sessions/{}/frame", s.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(hash.unwrap(), s.frame_hash);
    drop(ticket);
    let e: EditResponse = json_call(&app, "POST", &format!("/sessions/{}/edits", s.id), Some(edit_body(4, SketchEdit::Frown))).await;
    assert_eq!(e.state.depth, 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_edits_are_serialized() {
    for policy in [BusyPolicy::Reject, BusyPolicy::Queue] {
        let app = router(service(|c| c.busy_policy = policy));
        let s: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(5))).await;
        let mut tasks = Vec::new();
        for (i, edit) in SketchEdit::ALL.into_iter().take(6).enumerate() {
            let (app, id) = (app.clone(), s.id.clone());
            tasks.push(tokio::spawn(async move {
                let body = json!({ "sketch_png": b64(&face(5 + i as u64).edited(edit).render(256).to_png()) });
                call(&app, "POST", &format!("/sessions/{id}/edits"), Some(body)).await
            }));
        }
        let mut ok = 0;
        for t in tasks {
            let (status, bytes, _) = t.await.unwrap();
            match status {
                StatusCode::OK => ok += 1,
                StatusCode::CONFLICT if policy == BusyPolicy::Reject => assert_eq!(error_code(&bytes), "busy"),
                other => panic!("{policy:?}: unexpected {other}: {}", String::from_utf8_lossy(&bytes)),
            }
        }
        if policy == BusyPolicy::Queue {
            assert_eq!(ok, 6);
        }
        assert!(ok >= 1);
        let state: SessionState = json_call(&app, "GET", &format!("/sessions/{}/state", s.id), None).await;
        assert_eq!(state.depth, 1 + ok, "{policy:?}");
        for _ in 0..ok {
            let u: UndoResponse = json_call(&app, "POST", &format!("/sessions/{}/undo", s.id), None).await;
            assert!(u.undone);
        }
        let back: SessionState = json_call(&app, "GET", &format!("/sessions/{}/state", s.id), None).await;
        assert_eq!(back, s);
    }
}

#[tokio::test]
async fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(service(|c| c.session_dir = Some(dir.path().join("sessions"))));
    let s: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(6))).await;
    let e: EditResponse =
        json_call(&app, "POST", &format!("/sessions/{}/edits", s.id), Some(edit_body(6, SketchEdit::RaiseBrows))).await;
    let target = dir.path().join("explicit");
    let saved: Value =
        json_call(&app, "POST", &format!("/sessions/{}/save", s.id), Some(json!({ "path": target }))).await;
    assert_eq!(saved["path"], json!(target));
    // Without a body, the session directory is used.
    let _: Value = json_call(&app, "POST", &format!("/sessions/{}/save", s.id), None).await;
    assert!(dir.path().join("sessions").join(&s.id).join("session.json").is_file());

    let fresh = router(service(|_| {}));
    let loaded: SessionState = json_call(&fresh, "POST", "/sessions/load", Some(json!({ "path": target }))).await;
    assert_eq!(loaded, e.state);
    let u: UndoResponse = json_call(&fresh, "POST", &format!("/sessions/{}/undo", s.id), None).await;
    assert_eq!(u.state, s);

    let (status, bytes, _) =
        call(&fresh, "POST", "/sessions/load", Some(json!({ "path": dir.path().join("missing") }))).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(error_code(&bytes), "storage_error");

    // Saving without a path needs a session directory.
    let (status, bytes, _) = call(&fresh, "POST", &format!("/sessions/{}/save", s.id), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&bytes), "input_error");
}

#[tokio::test]
async fn capacity_without_a_session_dir_is_an_error() {
    let app = router(service(|c| c.capacity = 2));
    for seed in 0..2 {
        let _: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(seed))).await;
    }
    let (status, bytes, _) = call(&app, "POST", "/sessions", Some(create_body(9))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(error_code(&bytes), "capacity");
}

#[tokio::test]
async fn least_recently_used_sessions_are_evicted_and_reloaded() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(|c| {
        c.capacity = 2;
        c.session_dir = Some(dir.path().into());
    });
    let app = router(svc.clone());
    let a: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(10))).await;
    let a: EditResponse =
        json_call(&app, "POST", &format!("/sessions/{}/edits", a.id), Some(edit_body(10, SketchEdit::Frown))).await;
    let a = a.state;
    let b: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(11))).await;
    // Touch a so that b is the least recently used.
    let _: SessionState = json_call(&app, "GET", &format!("/sessions/{}/state", a.id), None).await;
    let c: SessionState = json_call(&app, "POST", "/sessions", Some(create_body(12))).await;
    assert_eq!(svc.live_count(), 2);
    assert!(svc.is_live(&a.id) && svc.is_live(&c.id) && !svc.is_live(&b.id));

    // b comes back from disk, pushing out a (now the oldest).
    let b2: SessionState = json_call(&app, "GET", &format!("/sessions/{}/state", b.id), None).await;
    assert_eq!(b2, b);
    assert!(!svc.is_live(&a.id));
    let u: UndoResponse = json_call(&app, "POST", &format!("/sessions/{}/undo", a.id), None).await;
    assert!(u.undone, "history survives eviction");
    assert_eq!(u.state.depth, 1);

    // A session whose writer slot is held cannot be evicted.
    let _t1 = svc.write_ticket(&a.id).await.unwrap();
    let live: Vec<String> = [&b.id, &c.id].into_iter().filter(|id| svc.is_live(id)).cloned().collect();
    let _t2 = svc.write_ticket(&live[0]).await.unwrap();
    let (status, bytes, _) = call(&app, "POST", "/sessions", Some(create_body(13))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(error_code(&bytes), "capacity");
}
