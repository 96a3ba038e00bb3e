//! Live sessions, admission under a capacity cap, and eviction to disk.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use base64::Engine;
use serde::{Deserialize, Serialize};
use splathead_core::{rasterize, Camera, RenderedFrame, TemplateMesh};
use splathead_edit::{default_camera, frame_hash, set_hash, EditConfig, EditSession, EditSummary};
use splathead_neural::{Model, ReferenceImage, SketchImage};
use tokio::sync::{broadcast, OwnedMutexGuard};

use crate::api::{CreateSessionRequest, ServerMessage, SessionState};
use crate::error::{Result, ServiceError};

/// What a second edit on a session does while one is running.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusyPolicy {
    /// Answer `busy` immediately.
    #[default]
    Reject,
    /// Wait for the running edit, then apply.
    Queue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Where evicted and saved sessions live. Without it, reaching the
    /// capacity is an error instead of an eviction.
    pub session_dir: Option<PathBuf>,
    pub capacity: usize,
    /// Side of the square default camera frame.
    pub frame_size: u32,
    pub busy_policy: BusyPolicy,
    pub edit: EditConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8087)),
            session_dir: None,
            capacity: 8,
            frame_size: splathead_edit::session::DEFAULT_FRAME_SIZE,
            busy_policy: BusyPolicy::Reject,
            edit: EditConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `SPLATHEAD_LISTEN`, `SPLATHEAD_SESSION_DIR`,
    /// `SPLATHEAD_CAPACITY`, `SPLATHEAD_FRAME_SIZE` and `SPLATHEAD_BUSY`
    /// (`reject` or `queue`).
    pub fn from_env() -> Result<Self, String> {
        let mut c = Self::default();
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        if let Some(v) = var("SPLATHEAD_LISTEN") {
            c.listen = v.parse().map_err(|e| format!("SPLATHEAD_LISTEN: {e}"))?;
        }
        if let Some(v) = var("SPLATHEAD_SESSION_DIR") {
            c.session_dir = Some(v.into());
        }
        if let Some(v) = var("SPLATHEAD_CAPACITY") {
            c.capacity = v.parse().map_err(|e| format!("SPLATHEAD_CAPACITY: {e}"))?;
        }
        if let Some(v) = var("SPLATHEAD_FRAME_SIZE") {
            c.frame_size = v.parse().map_err(|e| format!("SPLATHEAD_FRAME_SIZE: {e}"))?;
        }
        if let Some(v) = var("SPLATHEAD_BUSY") {
            c.busy_policy = serde_json::from_value(serde_json::Value::String(v.clone()))
                .map_err(|_| format!("SPLATHEAD_BUSY: expected reject or queue, got '{v}'"))?;
        }
        Ok(c)
    }
}

/// An update pushed to stream subscribers, with the frame it produced.
#[derive(Debug, Clone)]
pub struct StreamEvent {
    pub message: ServerMessage,
    pub camera: Camera,
    pub frame: Arc<RenderedFrame>,
}

pub struct SessionHandle {
    id: String,
    session: RwLock<EditSession>,
    writer: Arc<tokio::sync::Mutex<()>>,
    evicted: AtomicBool,
    last_used: AtomicU64,
    events: broadcast::Sender<StreamEvent>,
}

impl SessionHandle {
    fn new(session: EditSession, tick: u64) -> Arc<Self> {
        Arc::new(Self {
            id: session.id().to_string(),
            session: RwLock::new(session),
            writer: Arc::new(tokio::sync::Mutex::new(())),
            evicted: AtomicBool::new(false),
            last_used: AtomicU64::new(tick),
            events: broadcast::channel(16).0,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.events.subscribe()
    }

    /// Runs `f` with shared access to the session.
    pub fn read<T>(&self, f: impl FnOnce(&EditSession) -> T) -> T {
        f(&self.session.read().unwrap_or_else(|e| e.into_inner()))
    }
}

/// Exclusive right to change one session.
pub struct WriteTicket {
    handle: Arc<SessionHandle>,
    _guard: OwnedMutexGuard<()>,
}

impl WriteTicket {
    pub fn handle(&self) -> &Arc<SessionHandle> {
        &self.handle
    }
}

pub struct Service {
    config: ServiceConfig,
    model: Arc<Model>,
    mesh: Arc<TemplateMesh>,
    live: Mutex<HashMap<String, Arc<SessionHandle>>>,
    clock: AtomicU64,
}

fn decode_b64(field: &str, data: &str) -> Result<Vec<u8>> {
    base64::engine::general_purpose::STANDARD
        .decode(data.trim())
        .map_err(|e| ServiceError::Input(format!("{field}: invalid base64: {e}")))
}

pub fn decode_sketch(data: &str) -> Result<SketchImage> {
    SketchImage::decode(&decode_b64("sketch_png", data)?).map_err(|e| ServiceError::Input(format!("sketch_png: {e}")))
}

fn decode_reference(data: &str) -> Result<ReferenceImage> {
    ReferenceImage::decode(&decode_b64("reference_png", data)?)
        .map_err(|e| ServiceError::Input(format!("reference_png: {e}")))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Service {
    pub fn new(config: ServiceConfig, model: Model, mesh: TemplateMesh) -> Result<Self> {
        if config.capacity == 0 {
            return Err(ServiceError::Input("capacity must be at least 1".into()));
        }
        model.check_mesh(&mesh).map_err(|e| ServiceError::Input(e.to_string()))?;
        Ok(Self {
            config,
            model: Arc::new(model),
            mesh: Arc::new(mesh),
            live: Mutex::new(HashMap::new()),
            clock: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn mesh(&self) -> &TemplateMesh {
        &self.mesh
    }

    fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub fn default_camera(&self) -> Camera {
        default_camera(self.config.frame_size)
    }

    /// Number of sessions held in memory.
    pub fn live_count(&self) -> usize {
        self.live.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_live(&self, id: &str) -> bool {
        self.live.lock().unwrap_or_else(|e| e.into_inner()).contains_key(id)
    }

    fn saved_path(&self, id: &str) -> Option<PathBuf> {
        self.config.session_dir.as_ref().map(|d| d.join(id))
    }

    /// Makes room (evicting least-recently-used idle sessions to disk) and
    /// registers the handle.
    fn admit(&self, handle: Arc<SessionHandle>) -> Result<()> {
        let mut live = self.live.lock().unwrap_or_else(|e| e.into_inner());
        while live.len() >= self.config.capacity {
            let Some(dir) = &self.config.session_dir else {
                return Err(ServiceError::Capacity(self.config.capacity));
            };
            let victim = live
                .values()
                .filter_map(|h| h.writer.clone().try_lock_owned().ok().map(|g| (h.clone(), g)))
                .min_by_key(|(h, _)| h.last_used.load(Ordering::Relaxed));
            let Some((victim, _guard)) = victim else {
                return Err(ServiceError::Capacity(self.config.capacity));
            };
            victim
                .read(|s| s.save(dir.join(&victim.id), &self.model))
                .map_err(|e| ServiceError::Storage(format!("evicting '{}': {e}", victim.id)))?;
            victim.evicted.store(true, Ordering::SeqCst);
            live.remove(&victim.id);
        }
        live.insert(handle.id.clone(), handle);
        Ok(())
    }

    pub fn create(&self, req: &CreateSessionRequest) -> Result<SessionState> {
        let sketch = decode_sketch(&req.sketch_png)?;
        let reference = decode_reference(&req.reference_png)?;
        let camera = req.camera.unwrap_or_else(|| self.default_camera());
        let config = req.config.unwrap_or(self.config.edit);
        // Fail fast on a full service before spending time on generation.
        if self.config.session_dir.is_none() && self.live_count() >= self.config.capacity {
            return Err(ServiceError::Capacity(self.config.capacity));
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = EditSession::create(id, sketch, reference, camera, config, &self.mesh, &self.model)
            .map_err(ServiceError::from_edit)?;
        let handle = SessionHandle::new(session, self.tick());
        let state = self.state(&handle);
        self.admit(handle)?;
        Ok(state)
    }

    /// Looks a session up, reloading it from disk if it was evicted.
    pub fn handle(&self, id: &str) -> Result<Arc<SessionHandle>> {
        if let Some(h) = self.live.lock().unwrap_or_else(|e| e.into_inner()).get(id) {
            h.last_used.store(self.tick(), Ordering::Relaxed);
            return Ok(h.clone());
        }
        let path = match self.saved_path(id) {
            Some(p) if valid_id(id) && p.join("session.json").is_file() => p,
            _ => return Err(ServiceError::NotFound(id.to_string())),
        };
        self.load(path.to_string_lossy().as_ref()).map(|(h, _)| h)
    }

    /// Loads a saved session under its stored id.
    pub fn load(&self, path: &str) -> Result<(Arc<SessionHandle>, SessionState)> {
        let session = EditSession::load(path, &self.mesh, &self.model).map_err(|e| match e {
            splathead_edit::EditError::Storage(m) => ServiceError::Storage(m),
            other => ServiceError::Storage(format!("{path}: {other}")),
        })?;
        if let Some(h) = self.live.lock().unwrap_or_else(|e| e.into_inner()).get(session.id()) {
            return Ok((h.clone(), self.state(h)));
        }
        let handle = SessionHandle::new(session, self.tick());
        let state = self.state(&handle);
        self.admit(handle.clone())?;
        Ok((handle, state))
    }

    /// Waits for (or, under [`BusyPolicy::Reject`], tries to take) the
    /// session's writer slot. Retries once if the session was evicted while
    /// waiting.
    pub async fn write_ticket(&self, id: &str) -> Result<WriteTicket> {
        for _ in 0..2 {
            let handle = self.handle(id)?;
            let guard = match self.config.busy_policy {
                BusyPolicy::Reject => {
                    handle.writer.clone().try_lock_owned().map_err(|_| ServiceError::Busy(id.to_string()))?
                }
                BusyPolicy::Queue => handle.writer.clone().lock_owned().await,
            };
            if !handle.evicted.load(Ordering::SeqCst) {
                return Ok(WriteTicket { handle, _guard: guard });
            }
        }
        Err(ServiceError::Busy(id.to_string()))
    }

    pub fn state(&self, handle: &SessionHandle) -> SessionState {
        handle.read(|s| SessionState {
            id: s.id().to_string(),
            depth: s.depth(),
            gaussians: s.current_set().len(),
            camera: *s.camera(),
            frame_hash: frame_hash(&s.render(s.camera())),
            set_hash: set_hash(s.current_set()),
        })
    }

    pub fn render(&self, handle: &SessionHandle, camera: Option<Camera>) -> (Camera, RenderedFrame) {
        handle.read(|s| {
            let camera = camera.unwrap_or(*s.camera());
            (camera, rasterize(s.current_set(), &camera))
        })
    }

    /// Applies an edit. The head is edited on a copy so frames keep being
    /// served from the previous state until the new one is swapped in.
    pub fn edit(&self, ticket: &WriteTicket, sketch: &SketchImage, camera: Option<Camera>) -> Result<(EditSummary, SessionState)> {
        let handle = ticket.handle();
        let mut draft = handle.read(EditSession::clone);
        let camera = camera.unwrap_or(*draft.camera());
        let summary = draft.apply_edit(sketch, &camera, &self.mesh, &self.model).map_err(ServiceError::from_edit)?;
        *handle.session.write().unwrap_or_else(|e| e.into_inner()) = draft;
        let state = self.state(handle);
        self.publish(handle, ServerMessage::Edit { summary: summary.clone(), state: state.clone() });
        Ok((summary, state))
    }

    pub fn undo(&self, ticket: &WriteTicket) -> (bool, SessionState) {
        let handle = ticket.handle();
        let undone = handle.session.write().unwrap_or_else(|e| e.into_inner()).undo();
        let state = self.state(handle);
        if undone {
            self.publish(handle, ServerMessage::Undo { undone, state: state.clone() });
        }
        (undone, state)
    }

    pub fn save(&self, handle: &SessionHandle, path: Option<&str>) -> Result<PathBuf> {
        let path = match path {
            Some(p) => PathBuf::from(p),
            None => self
                .saved_path(&handle.id)
                .ok_or_else(|| ServiceError::Input("no session directory configured; pass a path".into()))?,
        };
        handle
            .read(|s| s.save(&path, &self.model))
            .map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn publish(&self, handle: &SessionHandle, message: ServerMessage) {
        if handle.events.receiver_count() == 0 {
            return;
        }
        let (camera, frame) = self.render(handle, None);
        // A send error only means every subscriber left in the meantime.
        let _ = handle.events.send(StreamEvent { message, camera, frame: Arc::new(frame) });
    }
}
