//! Sketch-driven editing of UV Gaussian heads.
//!
//! An edit starts from the difference between the current and the new
//! sketch. The dilated screen mask is back-projected onto the Gaussians that
//! produced those pixels (weighting each by its opacity–transmittance product),
//! the significant front-facing ones are mapped to their UV texels, and the
//! resulting UV mask is resampled to every synthesis layer. The generator then
//! runs on the new sketch while, after each layer, features outside that
//! layer's mask are restored from the current head — so everything outside
//! the mask keeps its exact attributes.

mod baseline;
mod error;
pub mod fusion;
pub mod influence;
pub mod mask;
pub mod metrics;
pub mod region;
pub mod scenario;
pub mod session;

pub use baseline::{composite_3d_baseline, regenerate_baseline};
pub use error::{EditError, Result};
pub use fusion::{fuse_attributes, fuse_features, fused_attributes, fused_generation};
pub use influence::{compute_influence_weights, select_edited_gaussians, Influence, SelectionStrategy};
pub use mask::{build_uv_mask, diff_sketches, resample_mask_pyramid, resize_mask, UvMask, UvMaskPyramid};
pub use metrics::{frame_hash, psnr, seam_metric, set_hash};
pub use scenario::{evaluate_edit, run_scenario, run_suite, standard_suite, Scenario, ScenarioRun, Strategy, StrategyReport};
pub use session::{default_camera, EditConfig, EditPlan, EditSession, EditSummary, Snapshot, StageTiming};
