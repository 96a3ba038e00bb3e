use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use futures_util::{SinkExt, StreamExt};
use splathead_core::{frame_io, Camera, TemplateMesh};
use splathead_neural::{synthetic_reference, FaceSketch, Model, SketchEdit};
use splathead_service::api::{ServerMessage, SessionState};
use splathead_service::{serve_on, Service, ServiceConfig};
use tokio_tungstenite::tungstenite::Message;

type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

async fn next(ws: &mut Socket) -> Message {
    tokio::time::timeout(Duration::from_secs(30), ws.next()).await.expect("timed out").unwrap().unwrap()
}

async fn next_text(ws: &mut Socket) -> ServerMessage {
    match next(ws).await {
        Message::Text(t) => serde_json::from_str(&t).unwrap(),
        other => panic!("expected text, got {other:?}"),
    }
}

async fn next_binary(ws: &mut Socket) -> Vec<u8> {
    match next(ws).await {
        Message::Binary(b) => b.to_vec(),
        other => panic!("expected binary, got {other:?}"),
    }
}

/// Reads a frame announcement and its payload; returns (announced hash, payload hash).
async fn frame(ws: &mut Socket) -> (String, String) {
    let ServerMessage::Frame { frame_hash, .. } = next_text(ws).await else { panic!("expected a frame announcement") };
    let bytes = next_binary(ws).await;
    (frame_hash, splathead_edit::frame_hash(&frame_io::decode_raw(&bytes).unwrap()))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_pushes_edits_undos_and_renders() {
    let config = ServiceConfig { frame_size: 96, ..ServiceConfig::default() };
    let svc = Arc::new(Service::new(config, Model::toy(3), TemplateMesh::default_head()).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_on(listener, svc, async {
        let _ = stopped.await;
    }));

    let client = HttpClient(addr);
    let face = FaceSketch::random(21);
    let created: SessionState = client
        .post(
            "/sessions",
            &serde_json::json!({
                "sketch_png": b64(&face.render(256).to_png()),
                "reference_png": b64(&synthetic_reference(21, 256).to_png()),
            }),
        )
        .await;

    let (mut ws, _) =
        tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{}/stream?encoding=raw", created.id)).await.unwrap();
    let ServerMessage::Hello { state } = next_text(&mut ws).await else { panic!("expected hello") };
    assert_eq!(state, created);
    let (announced, actual) = frame(&mut ws).await;
    assert_eq!(announced, actual);
    assert_eq!(announced, created.frame_hash);

    let edited: serde_json::Value = client
        .post(
            &format!("/sessions/{}/edits", created.id),
            &serde_json::json!({ "sketch_png": b64(&face.edited(SketchEdit::EnlargeEyes).render(256).to_png()) }),
        )
        .await;
    let ServerMessage::Edit { state, summary } = next_text(&mut ws).await else { panic!("expected edit") };
    assert!(!summary.no_op);
    assert_eq!(state, serde_json::from_value::<SessionState>(edited["state"].clone()).unwrap());
    let (announced, actual) = frame(&mut ws).await;
    assert_eq!(announced, actual);
    assert_eq!(announced, state.frame_hash);

    let _: serde_json::Value = client.post(&format!("/sessions/{}/undo", created.id), &serde_json::json!({})).await;
    let ServerMessage::Undo { undone, state } = next_text(&mut ws).await else { panic!("expected undo") };
    assert!(undone);
    assert_eq!(state, created);
    assert_eq!(frame(&mut ws).await.0, created.frame_hash);

    let side = Camera::orbit(glam::Vec3::ZERO, -0.5, 0.0, 3.6, (40, 30)).unwrap();
    ws.send(Message::Text(serde_json::json!({ "type": "render", "camera": side }).to_string().into())).await.unwrap();
    let (announced, actual) = frame(&mut ws).await;
    assert_eq!(announced, actual);
    ws.send(Message::Text("{\"type\":\"zoom\"}".into())).await.unwrap();
    let ServerMessage::Error { code, .. } = next_text(&mut ws).await else { panic!("expected error") };
    assert_eq!(code, splathead_service::ErrorCode::InputError);

    ws.close(None).await.unwrap();
    stop.send(()).unwrap();
    server.await.unwrap().unwrap();
}

#[tokio::test]
async fn stream_for_an_unknown_session_is_refused() {
    let svc = Arc::new(Service::new(ServiceConfig::default(), Model::toy(3), TemplateMesh::default_head()).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_on(listener, svc, std::future::pending()));
    let err = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/none/stream")).await.unwrap_err();
    match err {
        tokio_tungstenite::tungstenite::Error::Http(res) => assert_eq!(res.status(), 404),
        other => panic!("unexpected {other:?}"),
    }
}

/// Minimal HTTP/1.1 JSON client over a raw socket, enough for these tests.
struct HttpClient(std::net::SocketAddr);

impl HttpClient {
    async fn post<T: serde::de::DeserializeOwned>(&self, path: &str, body: &serde_json::Value) -> T {
        use tokio::io::{AsyncReadExt, AsyncWriteExt};
        let body = body.to_string();
        let mut s = tokio::net::TcpStream::connect(self.0).await.unwrap();
        let req = format!(
            "POST {path} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            self.0,
            body.len()
        );
        s.write_all(req.as_bytes()).await.unwrap();
        let mut out = Vec::new();
        s.read_to_end(&mut out).await.unwrap();
        let text = String::from_utf8(out).unwrap();
        let (head, body) = text.split_once("\r\n\r\n").unwrap();
        assert!(head.starts_with("HTTP/1.1 200"), "{head}\n{body}");
        serde_json::from_str(body).unwrap()
    }
}
