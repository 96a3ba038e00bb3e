//! Layer-by-layer feature fusion under a UV mask pyramid.

use splathead_core::{decode_uv_to_gaussians, GaussianSet, TemplateMesh, UvAttributeMap};
use splathead_neural::fine::Conditioning;
use splathead_neural::{synthesize_uv, FeaturePyramid, FusionHook, GenerationArtifacts, Model, NeuralError, Tensor};

use crate::error::{EditError, Result};
use crate::mask::{UvMask, UvMaskPyramid};

/// `(1 − M) ⊙ f_orig + M ⊙ f_new` for a binary mask, evaluated as a per-texel
/// select so unmasked texels carry the original bits exactly.
pub fn fuse_features(original: &Tensor, new: Tensor, mask: &UvMask) -> Result<Tensor> {
    if original.shape() != new.shape() {
        return Err(EditError::Dimension(format!("features {:?} vs {:?}", original.shape(), new.shape())));
    }
    let (h, w, c) = new.hwc()?;
    if h != mask.resolution() || w != mask.resolution() {
        return Err(EditError::Dimension(format!("{h}x{w} features under a {}² mask", mask.resolution())));
    }
    let mut out = new;
    let data = out.data_mut();
    for (i, _) in mask.bits().iter().enumerate().filter(|(_, m)| !**m) {
        data[i * c..(i + 1) * c].copy_from_slice(&original.data()[i * c..(i + 1) * c]);
    }
    Ok(out)
}

/// The same select on raw attribute maps: texels outside `mask` take the
/// original values.
pub fn fuse_attributes(original: &UvAttributeMap, mut new: UvAttributeMap, mask: &UvMask) -> Result<UvAttributeMap> {
    let r = mask.resolution();
    if new.resolution() as usize != r || original.resolution() as usize != r {
        return Err(EditError::Dimension(format!(
            "attribute maps {}² / {}² under a {r}² mask",
            original.resolution(),
            new.resolution()
        )));
    }
    for (i, _) in mask.bits().iter().enumerate().filter(|(_, m)| !**m) {
        let (x, y) = (i % r, i / r);
        new.texel_mut(x, y).copy_from_slice(original.texel(x, y));
    }
    Ok(new)
}

/// Runs the synthesis stack on the new conditioning while, after every layer
/// `k`, restoring the original features outside level `k` of the mask; the
/// fused features are what layer `k + 1` consumes. The output projection is
/// fused the same way under the final level.
pub fn fused_attributes(
    conditioning: &Conditioning,
    original: &GenerationArtifacts,
    masks: &UvMaskPyramid,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<(UvAttributeMap, FeaturePyramid)> {
    if masks.resolutions() != original.pyramid.resolutions() {
        return Err(EditError::Contract(format!(
            "mask levels {:?} do not match synthesis layers {:?}",
            masks.resolutions(),
            original.pyramid.resolutions()
        )));
    }
    let mut hook = |k: usize, x: Tensor| {
        let orig = original.pyramid.layer(k).expect("levels checked above");
        fuse_features(orig, x, &masks.levels[k]).map_err(|e| NeuralError::Contract(e.to_string()))
    };
    let (attrs, pyramid) = synthesize_uv(
        &conditioning.latent,
        &conditioning.modulation,
        model,
        &mesh.validity(),
        Some(&mut hook as &mut FusionHook),
    )?;
    Ok((fuse_attributes(&original.attributes, attrs, masks.final_level())?, pyramid))
}

/// [`fused_attributes`] followed by decoding; returns the artifacts of the
/// fused pass (new coarse map, latent and modulation; fused pyramid and
/// attributes).
pub fn fused_generation(
    conditioning: Conditioning,
    original: &GenerationArtifacts,
    masks: &UvMaskPyramid,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<(GaussianSet, GenerationArtifacts)> {
    let (attributes, pyramid) = fused_attributes(&conditioning, original, masks, mesh, model)?;
    let set = decode_uv_to_gaussians(&attributes, mesh)?;
    let Conditioning { coarse, latent, modulation } = conditioning;
    Ok((set, GenerationArtifacts { coarse, latent, modulation, pyramid, attributes }))
}
