//! Seeded edit scenarios comparing fusion with the two baselines.
//!
//! Each scenario generates a head from a jittered face sketch, applies one
//! local sketch edit, and runs three strategies on it:
//!
//! * `fusion` — layer-wise feature fusion under the UV mask pyramid;
//! * `composite` — the selected Gaussians swapped for the regenerated head's;
//! * `regen` — the regenerated head as is.
//!
//! All strategies are scored on the same screen regions, derived from the
//! fusion mask: the *edited* region is every pixel at which a Gaussian bound
//! to a final-level mask texel was composited (in the original render or the
//! fused one), the *unedited* region is its complement. The seam metric is
//! taken across the boundary of the dilated sketch difference (the edit
//! region as the user drew it), against the original render.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use splathead_core::{rasterize, Camera, GaussianSet, PixelMask, RenderedFrame, TemplateMesh};
use splathead_neural::{synthetic_reference, FaceSketch, Model, SketchEdit, SketchImage};

use crate::baseline::{composite_3d_baseline, regenerate_baseline};
use crate::error::Result;
use crate::metrics::{frame_hash, psnr, seam_metric, set_hash};
use crate::region::{flag_texels, touched_pixels};
use crate::session::{EditConfig, EditPlan, EditSession, EditSummary};

pub const SKETCH_RESOLUTION: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Fusion,
    Composite,
    Regen,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Fusion, Strategy::Composite, Strategy::Regen];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Fusion => "fusion",
            Strategy::Composite => "composite",
            Strategy::Regen => "regen",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy '{s}' (expected fusion, composite or regen)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub edit: SketchEdit,
}

impl Scenario {
    pub fn base_face(&self) -> FaceSketch {
        FaceSketch::random(self.seed)
    }

    pub fn base_sketch(&self) -> SketchImage {
        self.base_face().render(SKETCH_RESOLUTION)
    }

    pub fn edited_sketch(&self) -> SketchImage {
        self.base_face().edited(self.edit).render(SKETCH_RESOLUTION)
    }

    pub fn session(&self, camera: Camera, config: EditConfig, mesh: &TemplateMesh, model: &Model) -> Result<EditSession> {
        EditSession::create(
            format!("scenario-{}", self.seed),
            self.base_sketch(),
            synthetic_reference(self.seed, SKETCH_RESOLUTION),
            camera,
            config,
            mesh,
            model,
        )
    }
}

/// Ten scenarios, one per edit kind, on distinct seeds.
pub fn standard_suite() -> Vec<Scenario> {
    SketchEdit::ALL.iter().enumerate().map(|(i, &edit)| Scenario { seed: 100 + i as u64, edit }).collect()
}

/// One JSON line of the harness report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub scenario: u64,
    pub edit: String,
    pub strategy: Strategy,
    pub sketch_mask_pixels: usize,
    pub frame_mask_pixels: usize,
    pub selected_gaussians: usize,
    pub uv_mask_texels: usize,
    pub final_level_texels: usize,
    pub edited_pixels: usize,
    pub unedited_pixels: usize,
    /// PSNR against the original render over the unedited region.
    pub unedited_psnr: Option<f64>,
    /// PSNR against the regenerated render over the edited region.
    pub edited_psnr: Option<f64>,
    /// Cross-boundary gradient change along the sketch-difference border.
    pub seam: Option<f64>,
    pub set_hash: String,
    pub frame_hash: String,
    pub strategy_micros: u64,
}

/// Result sets and renders of one evaluated edit, for callers that need more
/// than the report.
pub struct ScenarioRun {
    pub plan: EditPlan,
    /// The session after the fused edit.
    pub fused: EditSession,
    pub summary: EditSummary,
    pub original: GaussianSet,
    pub original_frame: RenderedFrame,
    pub results: Vec<(Strategy, GaussianSet, RenderedFrame)>,
    pub edited_region: PixelMask,
    pub reports: Vec<StrategyReport>,
}

impl ScenarioRun {
    pub fn result(&self, strategy: Strategy) -> &(Strategy, GaussianSet, RenderedFrame) {
        self.results.iter().find(|r| r.0 == strategy).expect("every strategy is evaluated")
    }

    pub fn report(&self, strategy: Strategy) -> &StrategyReport {
        self.reports.iter().find(|r| r.strategy == strategy).expect("every strategy is evaluated")
    }
}

pub fn run_scenario(
    scenario: &Scenario,
    camera: &Camera,
    config: EditConfig,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<ScenarioRun> {
    let session = scenario.session(*camera, config, mesh, model)?;
    evaluate_edit(&session, &scenario.edited_sketch(), camera, mesh, model, scenario.seed, scenario.edit.name())
}

/// Runs all three strategies for one sketch edit of `session` (left
/// untouched) and scores them. `seed` and `label` only tag the reports.
pub fn evaluate_edit(
    session: &EditSession,
    new_sketch: &SketchImage,
    camera: &Camera,
    mesh: &TemplateMesh,
    model: &Model,
    seed: u64,
    label: &str,
) -> Result<ScenarioRun> {
    let plan = session.plan_edit(new_sketch, camera, model)?;
    let original = session.current_set().clone();
    let original_frame = rasterize(&original, camera);

    let t = Instant::now();
    let mut fused = session.clone();
    let summary = fused.apply_edit(new_sketch, camera, mesh, model)?;
    let fusion_set = fused.current_set().clone();
    let fusion_us = t.elapsed().as_micros() as u64;

    let t = Instant::now();
    let regen_set = regenerate_baseline(new_sketch, session.reference(), mesh, model)?;
    let regen_us = t.elapsed().as_micros() as u64;

    let t = Instant::now();
    let composite_set = composite_3d_baseline(&original, &regen_set, &plan.selected)?;
    let composite_us = t.elapsed().as_micros() as u64 + regen_us;

    let flagged = flag_texels(&original, plan.masks.final_level().bits());
    let a = touched_pixels(&original, camera, &flagged)?;
    let b = touched_pixels(&fusion_set, camera, &flagged)?;
    let edited_region = PixelMask::from_fn(a.width(), a.height(), |x, y| a.get(x, y) || b.get(x, y));
    let unedited_region = PixelMask::from_fn(a.width(), a.height(), |x, y| !edited_region.get(x, y));

    let regen_frame = rasterize(&regen_set, camera);
    let mut results = Vec::new();
    let mut reports = Vec::new();
    for (strategy, set, micros) in
        [(Strategy::Fusion, fusion_set, fusion_us), (Strategy::Composite, composite_set, composite_us), (Strategy::Regen, regen_set, regen_us)]
    {
        let frame = rasterize(&set, camera);
        reports.push(StrategyReport {
            scenario: seed,
            edit: label.to_string(),
            strategy,
            sketch_mask_pixels: plan.sketch_mask.count(),
            frame_mask_pixels: plan.frame_mask.count(),
            selected_gaussians: plan.selected.len(),
            uv_mask_texels: plan.masks.base.count(),
            final_level_texels: plan.masks.final_level().count(),
            edited_pixels: edited_region.count(),
            unedited_pixels: unedited_region.count(),
            unedited_psnr: psnr(&frame, &original_frame, Some(&unedited_region)),
            edited_psnr: psnr(&frame, &regen_frame, Some(&edited_region)),
            seam: seam_metric(&frame, &original_frame, &plan.frame_mask),
            set_hash: set_hash(&set),
            frame_hash: frame_hash(&frame),
            strategy_micros: micros,
        });
        results.push((strategy, set, frame));
    }
    Ok(ScenarioRun { plan, fused, summary, original, original_frame, results, edited_region, reports })
}

/// Runs every scenario and returns the report as JSON lines.
pub fn run_suite(
    scenarios: &[Scenario],
    camera: &Camera,
    config: EditConfig,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<Vec<StrategyReport>> {
    let mut out = Vec::new();
    for s in scenarios {
        out.extend(run_scenario(s, camera, config, mesh, model)?.reports);
    }
    Ok(out)
}

pub fn to_json_lines(reports: &[StrategyReport]) -> Result<String> {
    let mut s = String::new();
    for r in reports {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}
