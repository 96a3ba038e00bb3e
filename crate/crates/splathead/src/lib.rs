//! Sketch-driven generation and editing of UV-parameterized Gaussian heads.
//!
//! This crate ties the workspace together:
//!
//! * [`core`] — Gaussian primitives, cameras, the tile rasterizer, template
//!   mesh and UV attribute maps;
//! * [`neural`] — the toy generator (coarse attention branches, fine
//!   style-modulated synthesis);
//! * [`edit`] — sketch differencing, influence back-projection, UV mask
//!   pyramids, layer-wise feature fusion and undoable sessions;
//! * [`service`] — the HTTP/WebSocket session service;
//! * [`verify`] and [`bench`] — the self-check suites and rasterizer
//!   benchmark behind `splathead verify` and `splathead bench`.
//!
//! ```no_run
//! use splathead::core::TemplateMesh;
//! use splathead::edit::{default_camera, EditConfig, EditSession};
//! use splathead::neural::{synthetic_reference, FaceSketch, Model, SketchEdit};
//!
//! let mesh = TemplateMesh::default_head();
//! let model = Model::toy(0);
//! let camera = default_camera(512);
//! let face = FaceSketch::random(1);
//! let mut session = EditSession::create(
//!     "demo", face.render(256), synthetic_reference(1, 256), camera, EditConfig::default(), &mesh, &model,
//! )?;
//! let summary = session.apply_edit(&face.edited(SketchEdit::WidenSmile).render(256), &camera, &mesh, &model)?;
//! println!("{} gaussians edited", summary.selected_gaussians);
//! # Ok::<(), splathead::edit::EditError>(())
//! ```

pub mod bench;
pub mod cli;
pub mod verify;

pub use splathead_core as core;
pub use splathead_edit as edit;
pub use splathead_neural as neural;
pub use splathead_service as service;

use splathead_edit::{Strategy, StrategyReport};

/// Per-scenario comparison of fusion against the two baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationSummary {
    pub scenarios: usize,
    /// Scenarios where fusion's seam metric is at most composite's.
    pub seam_wins: usize,
    /// Scenarios where fusion's unedited-region PSNR beats regeneration's.
    pub psnr_wins: usize,
}

pub fn ablation_summary(reports: &[StrategyReport]) -> AblationSummary {
    let mut scenarios: Vec<u64> = reports.iter().map(|r| r.scenario).collect();
    scenarios.dedup();
    let find = |s: u64, k: Strategy| reports.iter().find(|r| r.scenario == s && r.strategy == k);
    let mut out = AblationSummary { scenarios: scenarios.len(), seam_wins: 0, psnr_wins: 0 };
    for s in scenarios {
        let (Some(f), Some(c), Some(r)) = (find(s, Strategy::Fusion), find(s, Strategy::Composite), find(s, Strategy::Regen))
        else {
            continue;
        };
        if let (Some(fs), Some(cs)) = (f.seam, c.seam) {
            out.seam_wins += usize::from(fs <= cs);
        }
        if let (Some(fp), Some(rp)) = (f.unedited_psnr, r.unedited_psnr) {
            out.psnr_wins += usize::from(fp > rp);
        }
    }
    out
}
