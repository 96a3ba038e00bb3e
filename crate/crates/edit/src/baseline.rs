//! The two editing alternatives fusion is measured against.

use splathead_core::{GaussianSet, TemplateMesh};
use splathead_neural::{generate_head, Model, ReferenceImage, SketchImage};

use crate::error::{EditError, Result};

/// Swaps the selected Gaussians of `original` for their counterparts in
/// `regenerated`. Both sets must be decoded from the same atlas.
pub fn composite_3d_baseline(original: &GaussianSet, regenerated: &GaussianSet, indices: &[usize]) -> Result<GaussianSet> {
    original
        .with_replacements(regenerated, indices)
        .map_err(|e| EditError::Contract(e.to_string()))
}

/// Regenerates the whole head from the edited sketch.
pub fn regenerate_baseline(
    new_sketch: &SketchImage,
    reference: &ReferenceImage,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<GaussianSet> {
    Ok(generate_head(new_sketch, reference, mesh, model)?.0)
}
