//! Interactive editing state: the current head, its sketch, and an undo stack.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use glam::Vec3;
use serde::{Deserialize, Serialize};
use splathead_core::{
    rasterize, Camera, GaussianSet, NamedTensor, PixelMask, RenderedFrame, TemplateMesh, TensorContainer,
};
use splathead_neural::coarse::appearance_features;
use splathead_neural::fine::{condition_with, generate_from};
use splathead_neural::{AppearanceFeatures, GenerationArtifacts, InputImage, Model, ReferenceImage, SketchImage};

use crate::error::{EditError, Result};
use crate::fusion::fused_generation;
use crate::influence::{compute_influence_weights, select_edited_gaussians, Influence, SelectionStrategy};
use crate::mask::{build_uv_mask, diff_sketches, resample_mask_pyramid, resize_mask, UvMaskPyramid};

pub const DEFAULT_FRAME_SIZE: u32 = 512;
const SESSION_FILE: &str = "session.json";
const SESSION_FORMAT: u32 = 1;

/// Frontal camera framing the template head.
pub fn default_camera(size: u32) -> Camera {
    Camera::orbit(Vec3::ZERO, 0.0, 0.0, 3.6, (size, size)).expect("orbit parameters are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditConfig {
    /// Disk radius, in sketch pixels, applied to the sketch difference.
    pub dilation_radius: usize,
    /// Disk radius, in texels, applied to the UV mask.
    pub uv_dilation: usize,
    pub selection: SelectionStrategy,
    /// Maximum number of retained states, the current one included.
    pub undo_limit: usize,
}

impl Default for EditConfig {
    fn default() -> Self {
        Self { dilation_radius: 4, uv_dilation: 1, selection: SelectionStrategy::default(), undo_limit: 32 }
    }
}

/// One head state: the sketch it answers, its artifacts and decoded set.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub sketch: SketchImage,
    pub artifacts: GenerationArtifacts,
    pub set: GaussianSet,
}

/// Everything an edit derives from the sketch difference, before synthesis.
#[derive(Debug, Clone)]
pub struct EditPlan {
    /// Dilated difference at sketch resolution.
    pub sketch_mask: PixelMask,
    /// The same mask resized to the camera frame.
    pub frame_mask: PixelMask,
    pub influence: Influence,
    pub selected: Vec<usize>,
    pub masks: UvMaskPyramid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub micros: u64,
    /// Time since the edit started, at the end of this stage.
    pub elapsed_micros: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSummary {
    /// True when the sketch did not change and nothing was recomputed.
    pub no_op: bool,
    pub sketch_mask_pixels: usize,
    pub frame_mask_pixels: usize,
    pub selected_gaussians: usize,
    pub uv_mask_texels: usize,
    pub final_level_texels: usize,
    pub undo_depth: usize,
    pub timings: Vec<StageTiming>,
    pub total_micros: u64,
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: Vec<StageTiming>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Self { start: now, last: now, stages: Vec::new() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            micros: (now - self.last).as_micros() as u64,
            elapsed_micros: (now - self.start).as_micros() as u64,
        });
        self.last = now;
    }

    fn total(&self) -> u64 {
        self.stages.last().map_or(0, |s| s.elapsed_micros)
    }
}

/// Single-writer editing state for one head.
#[derive(Debug, Clone)]
pub struct EditSession {
    id: String,
    reference: ReferenceImage,
    appearance: AppearanceFeatures,
    camera: Camera,
    config: EditConfig,
    original: Arc<Snapshot>,
    /// Oldest first; the back is the current state. Never empty.
    history: VecDeque<Arc<Snapshot>>,
}

impl EditSession {
    /// Generates the initial head and opens a session on it.
    pub fn create(
        id: impl Into<String>,
        sketch: SketchImage,
        reference: ReferenceImage,
        camera: Camera,
        config: EditConfig,
        mesh: &TemplateMesh,
        model: &Model,
    ) -> Result<Self> {
        if config.undo_limit == 0 {
            return Err(EditError::Contract("undo limit must keep at least the current state".into()));
        }
        let appearance = appearance_features(&reference, mesh, model)?;
        let (set, artifacts) = generate_from(condition_with(&sketch, &appearance, mesh, model)?, mesh, model)?;
        let original = Arc::new(Snapshot { sketch, artifacts, set });
        Ok(Self {
            id: id.into(),
            reference,
            appearance,
            camera,
            config,
            history: VecDeque::from([original.clone()]),
            original,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn set_camera(&mut self, camera: Camera) {
        self.camera = camera;
    }

    pub fn config(&self) -> &EditConfig {
        &self.config
    }

    /// Replaces the editing parameters. A smaller undo limit drops the
    /// oldest snapshots.
    pub fn with_config(mut self, config: EditConfig) -> Result<Self> {
        if config.undo_limit == 0 {
            return Err(EditError::Contract("undo limit must keep at least the current state".into()));
        }
        self.config = config;
        while self.history.len() > config.undo_limit {
            self.history.pop_front();
        }
        Ok(self)
    }

    pub fn reference(&self) -> &ReferenceImage {
        &self.reference
    }

    /// The state the session was created with.
    pub fn original(&self) -> &Snapshot {
        &self.original
    }

    pub fn current(&self) -> &Snapshot {
        self.history.back().expect("history is never empty")
    }

    pub fn current_set(&self) -> &GaussianSet {
        &self.current().set
    }

    /// Number of retained states, the current one included.
    pub fn depth(&self) -> usize {
        self.history.len()
    }

    pub fn render(&self, camera: &Camera) -> RenderedFrame {
        rasterize(self.current_set(), camera)
    }

    /// Difference mask, influence, selection and UV mask pyramid for a new
    /// sketch seen from `camera`, computed against the current state.
    pub fn plan_edit(&self, new_sketch: &SketchImage, camera: &Camera, model: &Model) -> Result<EditPlan> {
        let current = self.current();
        let sketch_mask = diff_sketches(&current.sketch, new_sketch, self.config.dilation_radius)?;
        let frame_mask = resize_mask(&sketch_mask, camera.width(), camera.height());
        let influence = compute_influence_weights(&current.set, camera, &frame_mask)?;
        let selected = select_edited_gaussians(&influence, &self.config.selection);
        let res = current.artifacts.attributes.resolution() as usize;
        let base = build_uv_mask(&selected, &current.set, res, self.config.uv_dilation)?;
        let masks = resample_mask_pyramid(&base, &model.arch().synthesis.resolutions)?;
        Ok(EditPlan { sketch_mask, frame_mask, influence, selected, masks })
    }

    /// Edits the head toward `new_sketch`. Features outside the UV mask are
    /// taken from the current state at every synthesis layer, so texels
    /// outside the final mask keep their attributes exactly. An unchanged
    /// sketch is a no-op that leaves the undo stack alone.
    pub fn apply_edit(
        &mut self,
        new_sketch: &SketchImage,
        camera: &Camera,
        mesh: &TemplateMesh,
        model: &Model,
    ) -> Result<EditSummary> {
        let mut clock = Stopwatch::new();
        let current = self.current().clone();
        let sketch_mask = diff_sketches(&current.sketch, new_sketch, self.config.dilation_radius)?;
        let frame_mask = resize_mask(&sketch_mask, camera.width(), camera.height());
        clock.lap("diff");
        self.camera = *camera;
        if sketch_mask.is_empty() {
            return Ok(EditSummary {
                no_op: true,
                sketch_mask_pixels: 0,
                frame_mask_pixels: 0,
                selected_gaussians: 0,
                uv_mask_texels: 0,
                final_level_texels: 0,
                undo_depth: self.depth(),
                total_micros: clock.total(),
                timings: clock.stages,
            });
        }
        let influence = compute_influence_weights(&current.set, camera, &frame_mask)?;
        let selected = select_edited_gaussians(&influence, &self.config.selection);
        clock.lap("influence");
        let res = current.artifacts.attributes.resolution() as usize;
        let base = build_uv_mask(&selected, &current.set, res, self.config.uv_dilation)?;
        let masks = resample_mask_pyramid(&base, &model.arch().synthesis.resolutions)?;
        clock.lap("uv_mask");
        let conditioning = condition_with(new_sketch, &self.appearance, mesh, model)?;
        clock.lap("condition");
        let (set, artifacts) = fused_generation(conditioning, &current.artifacts, &masks, mesh, model)?;
        clock.lap("fuse_decode");
        self.push(Snapshot { sketch: new_sketch.clone(), artifacts, set });
        Ok(EditSummary {
            no_op: false,
            sketch_mask_pixels: sketch_mask.count(),
            frame_mask_pixels: frame_mask.count(),
            selected_gaussians: selected.len(),
            uv_mask_texels: masks.base.count(),
            final_level_texels: masks.final_level().count(),
            undo_depth: self.depth(),
            total_micros: clock.total(),
            timings: clock.stages,
        })
    }

    /// Fused synthesis toward `new_sketch` under a caller-supplied mask
    /// pyramid, bypassing the sketch difference and selection.
    pub fn apply_edit_with_mask(
        &mut self,
        new_sketch: &SketchImage,
        masks: &UvMaskPyramid,
        mesh: &TemplateMesh,
        model: &Model,
    ) -> Result<&GaussianSet> {
        let conditioning = condition_with(new_sketch, &self.appearance, mesh, model)?;
        let (set, artifacts) = fused_generation(conditioning, &self.current().artifacts, masks, mesh, model)?;
        self.push(Snapshot { sketch: new_sketch.clone(), artifacts, set });
        Ok(self.current_set())
    }

    fn push(&mut self, snapshot: Snapshot) {
        self.history.push_back(Arc::new(snapshot));
        while self.history.len() > self.config.undo_limit {
            self.history.pop_front();
        }
    }

    /// Restores the previous state. Returns `false` (and changes nothing)
    /// when only the current state is left.
    pub fn undo(&mut self) -> bool {
        if self.history.len() <= 1 {
            return false;
        }
        self.history.pop_back();
        true
    }

    /// Writes the session to `dir`, replacing any previous save there only
    /// once the new one is complete.
    pub fn save(&self, dir: impl AsRef<Path>, model: &Model) -> Result<()> {
        let dir = dir.as_ref();
        let staging = sibling(dir, "partial")?;
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        let meta = SessionFile {
            format: SESSION_FORMAT,
            id: self.id.clone(),
            camera: self.camera,
            config: self.config,
            sketch_resolution: self.current().sketch.resolution(),
            reference_resolution: self.reference.resolution(),
            depth: self.depth(),
            weights_fingerprint: model.weights().fingerprint(),
        };
        fs::write(staging.join(SESSION_FILE), serde_json::to_vec_pretty(&meta)?)?;
        let r = self.reference.resolution();
        let mut c = TensorContainer::new();
        c.push(NamedTensor::new("reference", vec![r, r, 3], self.reference.image().data().to_vec())?);
        c.save(staging.join("reference.bin"))?;
        write_snapshot(&staging.join("original"), &self.original, model)?;
        for (k, s) in self.history.iter().enumerate() {
            write_snapshot(&staging.join(format!("history/{k:03}")), s, model)?;
        }
        let old = sibling(dir, "old")?;
        if dir.exists() {
            if old.exists() {
                fs::remove_dir_all(&old)?;
            }
            fs::rename(dir, &old)?;
        }
        fs::rename(&staging, dir)?;
        if old.exists() {
            fs::remove_dir_all(&old)?;
        }
        Ok(())
    }

    /// Reads a session written by [`EditSession::save`]. The model must be
    /// the one the session was saved with.
    pub fn load(dir: impl AsRef<Path>, mesh: &TemplateMesh, model: &Model) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: SessionFile = serde_json::from_slice(
            &fs::read(dir.join(SESSION_FILE)).map_err(|e| EditError::Storage(format!("{}: {e}", dir.display())))?,
        )?;
        if meta.format != SESSION_FORMAT {
            return Err(EditError::Storage(format!("unsupported session format {}", meta.format)));
        }
        if meta.weights_fingerprint != model.weights().fingerprint() {
            return Err(EditError::Storage("session was saved with different weights".into()));
        }
        let c = TensorContainer::load(dir.join("reference.bin"))?;
        let data = c.require("reference")?.data().to_vec();
        let reference = ReferenceImage::new(InputImage::new(meta.reference_resolution, data)?);
        let original = Arc::new(read_snapshot(&dir.join("original"), meta.sketch_resolution, mesh)?);
        let history = (0..meta.depth)
            .map(|k| read_snapshot(&dir.join(format!("history/{k:03}")), meta.sketch_resolution, mesh).map(Arc::new))
            .collect::<Result<VecDeque<_>>>()?;
        if history.is_empty() {
            return Err(EditError::Storage("session has no states".into()));
        }
        let appearance = appearance_features(&reference, mesh, model)?;
        Ok(Self { id: meta.id, reference, appearance, camera: meta.camera, config: meta.config, original, history })
    }
}

#[derive(Serialize, Deserialize)]
struct SessionFile {
    format: u32,
    id: String,
    camera: Camera,
    config: EditConfig,
    sketch_resolution: usize,
    reference_resolution: usize,
    depth: usize,
    weights_fingerprint: String,
}

fn sibling(dir: &Path, suffix: &str) -> Result<std::path::PathBuf> {
    let name = dir
        .file_name()
        .ok_or_else(|| EditError::Storage(format!("{} is not a directory path", dir.display())))?;
    Ok(dir.with_file_name(format!("{}.{suffix}", name.to_string_lossy())))
}

fn write_snapshot(dir: &Path, s: &Snapshot, model: &Model) -> Result<()> {
    s.artifacts.save_dir(dir, model)?;
    fs::write(dir.join("sketch.png"), s.sketch.to_png())?;
    Ok(())
}

fn read_snapshot(dir: &Path, sketch_resolution: usize, mesh: &TemplateMesh) -> Result<Snapshot> {
    let (artifacts, _) = GenerationArtifacts::load_dir(dir).map_err(|e| EditError::Storage(format!("{}: {e}", dir.display())))?;
    let bytes = fs::read(dir.join("sketch.png"))?;
    let sketch = SketchImage::from_image(InputImage::decode(&bytes, sketch_resolution)?);
    let set = splathead_core::decode_uv_to_gaussians(&artifacts.attributes, mesh)?;
    Ok(Snapshot { sketch, artifacts, set })
}
