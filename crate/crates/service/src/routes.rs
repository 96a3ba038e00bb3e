use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use splathead_core::{frame_io, Camera, RenderedFrame};
use splathead_edit::frame_hash;
use tokio::sync::broadcast::error::RecvError;

use crate::api::{
    ClientMessage, CreateSessionRequest, EditRequest, EditResponse, FrameEncoding, LoadRequest, SaveRequest,
    SaveResponse, ServerMessage, SessionState, UndoResponse,
};
use crate::error::{Result, ServiceError};
use crate::registry::{decode_sketch, Service};

type Shared = State<Arc<Service>>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create))
        .route("/sessions/load", post(load))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/edits", post(edit))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/save", post(save))
        .route("/sessions/{id}/frame", get(frame))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(service)
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn create(State(svc): Shared, body: Json<CreateSessionRequest>) -> Result<Json<SessionState>> {
    blocking(move || svc.create(&body)).await.map(Json)
}

async fn load(State(svc): Shared, Json(req): Json<LoadRequest>) -> Result<Json<SessionState>> {
    blocking(move || svc.load(&req.path).map(|(_, s)| s)).await.map(Json)
}

async fn state(State(svc): Shared, Path(id): Path<String>) -> Result<Json<SessionState>> {
    blocking(move || {
        let h = svc.handle(&id)?;
        Ok(svc.state(&h))
    })
    .await
    .map(Json)
}

async fn edit(State(svc): Shared, Path(id): Path<String>, Json(req): Json<EditRequest>) -> Result<Json<EditResponse>> {
    // Reject malformed input before queueing behind a running edit.
    let sketch = decode_sketch(&req.sketch_png)?;
    let ticket = svc.write_ticket(&id).await?;
    blocking(move || {
        let (summary, state) = svc.edit(&ticket, &sketch, req.camera)?;
        Ok(EditResponse { summary, state })
    })
    .await
    .map(Json)
}

async fn undo(State(svc): Shared, Path(id): Path<String>) -> Result<Json<UndoResponse>> {
    let ticket = svc.write_ticket(&id).await?;
    blocking(move || {
        let (undone, state) = svc.undo(&ticket);
        Ok(UndoResponse { undone, state })
    })
    .await
    .map(Json)
}

async fn save(State(svc): Shared, Path(id): Path<String>, body: Option<Json<SaveRequest>>) -> Result<Json<SaveResponse>> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    blocking(move || {
        let h = svc.handle(&id)?;
        let path = svc.save(&h, req.path.as_deref())?;
        Ok(SaveResponse { path: path.to_string_lossy().into_owned() })
    })
    .await
    .map(Json)
}

#[derive(Debug, Deserialize)]
struct FrameQuery {
    /// Camera as JSON; the session camera when absent.
    cam: Option<String>,
    #[serde(default)]
    format: FrameEncoding,
}

fn parse_camera(json: Option<&str>) -> Result<Option<Camera>> {
    json.map(|s| serde_json::from_str(s).map_err(|e| ServiceError::Input(format!("cam: {e}")))).transpose()
}

fn encode(frame: &RenderedFrame, encoding: FrameEncoding) -> Result<Vec<u8>> {
    match encoding {
        FrameEncoding::Png => frame_io::encode_png_rgba(frame).map_err(|e| ServiceError::Internal(e.to_string())),
        FrameEncoding::Raw => Ok(frame_io::encode_raw(frame)),
    }
}

async fn frame(State(svc): Shared, Path(id): Path<String>, Query(q): Query<FrameQuery>) -> Result<Response> {
    let camera = parse_camera(q.cam.as_deref())?;
    let (hash, bytes) = blocking(move || {
        let h = svc.handle(&id)?;
        let (_, frame) = svc.render(&h, camera);
        Ok((frame_hash(&frame), encode(&frame, q.format)?))
    })
    .await?;
    let content_type = match q.format {
        FrameEncoding::Png => "image/png",
        FrameEncoding::Raw => "application/octet-stream",
    };
    let mut response = bytes.into_response();
    let headers = response.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    headers.insert("x-frame-hash", HeaderValue::from_str(&hash).map_err(|e| ServiceError::Internal(e.to_string()))?);
    Ok(response)
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    #[serde(default)]
    encoding: FrameEncoding,
}

async fn stream(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response> {
    // Resolve the session before upgrading so unknown ids get a plain 404.
    let handle = {
        let svc = svc.clone();
        blocking(move || svc.handle(&id)).await?
    };
    Ok(ws.on_upgrade(move |socket| run_stream(socket, svc, handle, q.encoding)))
}

async fn send_json(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    match serde_json::to_string(msg) {
        Ok(text) => socket.send(Message::Text(text.into())).await.is_ok(),
        Err(_) => false,
    }
}

/// Sends `head`, then a frame announcement and the encoded frame.
async fn send_frame(
    socket: &mut WebSocket,
    head: Option<ServerMessage>,
    camera: Camera,
    frame: &RenderedFrame,
    encoding: FrameEncoding,
) -> bool {
    let bytes = match encode(frame, encoding) {
        Ok(b) => b,
        Err(e) => return send_json(socket, &ServerMessage::Error { code: e.code(), message: e.to_string() }).await,
    };
    if let Some(head) = head {
        if !send_json(socket, &head).await {
            return false;
        }
    }
    let announce = ServerMessage::Frame { camera, frame_hash: frame_hash(frame), encoding };
    send_json(socket, &announce).await && socket.send(Message::Binary(bytes.into())).await.is_ok()
}

async fn run_stream(
    mut socket: WebSocket,
    svc: Arc<Service>,
    handle: Arc<crate::registry::SessionHandle>,
    encoding: FrameEncoding,
) {
    let mut events = handle.subscribe();
    let hello = {
        let (svc, h) = (svc.clone(), handle.clone());
        blocking(move || {
            let state = svc.state(&h);
            let (camera, frame) = svc.render(&h, None);
            Ok((state, camera, frame))
        })
        .await
    };
    let Ok((state, camera, frame)) = hello else { return };
    if !send_frame(&mut socket, Some(ServerMessage::Hello { state }), camera, &frame, encoding).await {
        return;
    }

    loop {
        tokio::select! {
            event = events.recv() => match event {
                Ok(ev) => {
                    if !send_frame(&mut socket, Some(ev.message), ev.camera, &ev.frame, encoding).await {
                        return;
                    }
                }
                // A slow client skips to the newest state.
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return,
            },
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(ClientMessage::Render { camera }) => {
                        let (svc, h) = (svc.clone(), handle.clone());
                        blocking(move || Ok(svc.render(&h, Some(camera)))).await
                    }
                    Err(e) => Err(ServiceError::Input(format!("bad message: {e}"))),
                };
                let ok = match reply {
                    Ok((camera, frame)) => send_frame(&mut socket, None, camera, &frame, encoding).await,
                    Err(e) => send_json(&mut socket, &ServerMessage::Error { code: e.code(), message: e.to_string() }).await,
                };
                if !ok {
                    return;
                }
            }
        }
    }
}
