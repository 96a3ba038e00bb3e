//! Wire types of the HTTP and WebSocket interface.
//!
//! Images travel as base64-encoded PNG inside JSON bodies. Cameras use the
//! field layout of [`splathead_core::CameraFields`].

use serde::{Deserialize, Serialize};
use splathead_core::Camera;
use splathead_edit::{EditConfig, EditSummary};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub sketch_png: String,
    pub reference_png: String,
    #[serde(default)]
    pub camera: Option<Camera>,
    #[serde(default)]
    pub config: Option<EditConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub depth: usize,
    pub gaussians: usize,
    pub camera: Camera,
    /// Hash of the current frame from the session camera.
    pub frame_hash: String,
    pub set_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditRequest {
    pub sketch_png: String,
    #[serde(default)]
    pub camera: Option<Camera>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub summary: EditSummary,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndoResponse {
    /// False when only the initial state was left and nothing changed.
    pub undone: bool,
    pub state: SessionState,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SaveRequest {
    /// Target directory; defaults to `<session dir>/<id>`.
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaveResponse {
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadRequest {
    pub path: String,
}

/// Frame encodings offered on the stream and the frame endpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameEncoding {
    #[default]
    Png,
    Raw,
}

/// Text messages pushed by the server on `/sessions/{id}/stream`. Every
/// message announcing a frame is followed by one binary message carrying it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { state: SessionState },
    Edit { summary: EditSummary, state: SessionState },
    Undo { undone: bool, state: SessionState },
    Frame { camera: Camera, frame_hash: String, encoding: FrameEncoding },
    Error { code: crate::ErrorCode, message: String },
}

/// Text messages accepted from the client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Render the current head from this camera.
    Render { camera: Camera },
}
