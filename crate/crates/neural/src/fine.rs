//! Fine stage: U-Net modulation extraction, identity-aware latent fusion and
//! the modulated synthesis stack, plus the end-to-end generator.

use splathead_core::uv::ATTRIBUTE_CHANNELS;
use splathead_core::{decode_uv_to_gaussians, GaussianSet, TemplateMesh, UvAttributeMap, UvFeatureMap};

use crate::blocks::{modulated_projection, modulated_synthesis_layer};
use crate::coarse::{appearance_features, build_coarse_uv_with, to_tensor, to_uv, AppearanceFeatures, CoarseOutput};
use crate::error::{NeuralError, Result};
use crate::images::{ReferenceImage, SketchImage};
use crate::model::Model;
use crate::tensor::{conv2d, leaky_relu, linear, upsample2x, Tensor};

/// Global latent plus one spatial modulation map per synthesis layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationBundle {
    pub global_latent: Vec<f32>,
    pub spatial_pyramid: Vec<UvFeatureMap>,
}

/// One style vector per synthesis layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    styles: Vec<Vec<f32>>,
}

impl LatentCode {
    pub fn new(styles: Vec<Vec<f32>>) -> Result<Self> {
        let d = styles.first().map_or(0, Vec::len);
        if d == 0 || styles.iter().any(|s| s.len() != d) {
            return Err(NeuralError::Dimension("latent styles must be non-empty and equally wide".into()));
        }
        Ok(Self { styles })
    }

    pub fn styles(&self) -> &[Vec<f32>] {
        &self.styles
    }

    pub fn layer_count(&self) -> usize {
        self.styles.len()
    }

    pub fn style_dim(&self) -> usize {
        self.styles[0].len()
    }
}

/// Feature maps captured after every synthesis layer (after the fusion hook).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeaturePyramid {
    layers: Vec<Tensor>,
}

impl FeaturePyramid {
    pub fn new(layers: Vec<Tensor>) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            let (h, w, _) = l.hwc()?;
            if h != w || (i > 0 && h <= layers[i - 1].shape()[0]) {
                return Err(NeuralError::Dimension("pyramid levels must be square and ascending".into()));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Tensor] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> Option<&Tensor> {
        self.layers.get(k)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn resolutions(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.shape()[0]).collect()
    }
}

/// Runs the U-Net over the coarse map: stride-2 encoder stages, global mean
/// of the bottleneck as the latent, and one decoder output per synthesis
/// resolution as the spatial pyramid.
pub fn extract_modulation(coarse_uv: &UvFeatureMap, model: &Model) -> Result<ModulationBundle> {
    let arch = model.arch();
    if coarse_uv.resolution() as usize != arch.template.uv_resolution || coarse_uv.channels() != arch.coarse_channels() {
        return Err(NeuralError::Dimension(format!(
            "coarse map {}²x{}, architecture expects {}²x{}",
            coarse_uv.resolution(),
            coarse_uv.channels(),
            arch.template.uv_resolution,
            arch.coarse_channels()
        )));
    }
    let w = model.weights();
    let input = to_tensor(coarse_uv);
    let mut skips = Vec::with_capacity(arch.unet.widths.len());
    let mut x = input.clone();
    for i in 0..arch.unet.widths.len() {
        x = conv2d(&x, w.get(&format!("unet.enc{i}.weight"))?, Some(w.get(&format!("unet.enc{i}.bias"))?), 2, 1)?
            .map(leaky_relu);
        skips.push(x.clone());
    }
    let bottleneck = skips.last().expect("at least one encoder stage");
    let (bh, bw, bc) = bottleneck.hwc()?;
    let global_latent = bottleneck.clone().reshape(vec![bh * bw, bc])?.mean_rows();

    let n = arch.layer_count();
    let mut pyramid = Vec::with_capacity(n);
    let mut d = bottleneck.clone();
    for j in 0..n {
        let input_j = if j == 0 {
            d
        } else {
            let skip = if j + 1 < n { &skips[n - 2 - j] } else { &input };
            Tensor::concat_channels(&upsample2x(&d)?, skip)?
        };
        d = conv2d(&input_j, w.get(&format!("unet.dec{j}.weight"))?, Some(w.get(&format!("unet.dec{j}.bias"))?), 1, 1)?
            .map(leaky_relu);
        pyramid.push(to_uv(d.clone())?);
    }
    Ok(ModulationBundle { global_latent, spatial_pyramid: pyramid })
}

/// Two-layer MLP over `[f_latent ‖ id_geometry ‖ id_appearance]`, reshaped
/// into one style vector per synthesis layer.
pub fn fuse_latent(f_latent: &[f32], id_geometry: &[f32], id_appearance: &[f32], model: &Model) -> Result<LatentCode> {
    let arch = model.arch();
    if f_latent.len() != arch.latent_dim() || id_geometry.len() != arch.geometry.dim || id_appearance.len() != arch.appearance.dim
    {
        return Err(NeuralError::Dimension(format!(
            "latent {}/{}/{} vs architecture {}/{}/{}",
            f_latent.len(),
            id_geometry.len(),
            id_appearance.len(),
            arch.latent_dim(),
            arch.geometry.dim,
            arch.appearance.dim
        )));
    }
    let w = model.weights();
    let input: Vec<f32> = f_latent.iter().chain(id_geometry).chain(id_appearance).copied().collect();
    let x = Tensor::new(vec![1, input.len()], input)?;
    let h = linear(&x, w.get("mapping.fc0.weight")?, Some(w.get("mapping.fc0.bias")?))?.map(leaky_relu);
    let out = linear(&h, w.get("mapping.fc1.weight")?, Some(w.get("mapping.fc1.bias")?))?;
    let s = arch.synthesis.style_dim;
    LatentCode::new(out.data().chunks_exact(s).map(<[f32]>::to_vec).collect())
}

/// Called after every synthesis layer with `(layer_index, features)`; the
/// returned tensor (same shape) is what the next layer consumes.
pub type FusionHook<'a> = dyn FnMut(usize, Tensor) -> Result<Tensor> + 'a;

/// Runs the synthesis stack from the learned constant. After layer `k` the
/// hook (if any) may replace the features; the captured pyramid holds the
/// post-hook features. The final modulated 1×1 projection uses the last
/// layer's style vector.
pub fn synthesize_uv(
    latent: &LatentCode,
    modulation: &ModulationBundle,
    model: &Model,
    validity: &[bool],
    mut hook: Option<&mut FusionHook<'_>>,
) -> Result<(UvAttributeMap, FeaturePyramid)> {
    let arch = model.arch();
    let n = arch.layer_count();
    if latent.layer_count() != n || latent.style_dim() != arch.synthesis.style_dim {
        return Err(NeuralError::Dimension(format!(
            "latent has {} styles of width {}, synthesis needs {n} of {}",
            latent.layer_count(),
            latent.style_dim(),
            arch.synthesis.style_dim
        )));
    }
    if modulation.spatial_pyramid.len() != n {
        return Err(NeuralError::Dimension(format!("{} modulation maps for {n} layers", modulation.spatial_pyramid.len())));
    }
    let w = model.weights();
    let mut x = w.get("synthesis.const")?.clone();
    let mut captured = Vec::with_capacity(n);
    for k in 0..n {
        let style = &latent.styles()[k];
        let spatial = Some(&modulation.spatial_pyramid[k]);
        x = modulated_synthesis_layer(&x, style, spatial, w, &format!("synthesis.layer{k}"), k > 0)?;
        if let Some(h) = hook.as_deref_mut() {
            let shape = x.shape().to_vec();
            x = h(k, x)?;
            if x.shape() != shape.as_slice() {
                return Err(NeuralError::Contract(format!(
                    "fusion hook changed layer {k} features from {shape:?} to {:?}",
                    x.shape()
                )));
            }
        }
        captured.push(x.clone());
    }
    let raw = modulated_projection(&x, &latent.styles()[n - 1], w, "synthesis.output")?;
    let raw = to_uv(raw)?;
    debug_assert_eq!(raw.channels(), ATTRIBUTE_CHANNELS);
    Ok((UvAttributeMap::from_features(raw, validity.to_vec())?, FeaturePyramid::new(captured)?))
}

/// Everything the generator produced for one head, retained for editing.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationArtifacts {
    pub coarse: CoarseOutput,
    pub latent: LatentCode,
    pub modulation: ModulationBundle,
    pub pyramid: FeaturePyramid,
    pub attributes: UvAttributeMap,
}

/// The generator's conditioning for one sketch: coarse map, latent code and
/// modulation bundle, ready for synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    pub coarse: CoarseOutput,
    pub latent: LatentCode,
    pub modulation: ModulationBundle,
}

pub fn condition_with(
    sketch: &SketchImage,
    appearance: &AppearanceFeatures,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<Conditioning> {
    let coarse = build_coarse_uv_with(sketch, appearance, mesh, model)?;
    let modulation = extract_modulation(&coarse.coarse_uv, model)?;
    let latent = fuse_latent(&modulation.global_latent, &coarse.id_geometry, &coarse.id_appearance, model)?;
    Ok(Conditioning { coarse, latent, modulation })
}

pub fn condition(sketch: &SketchImage, reference: &ReferenceImage, mesh: &TemplateMesh, model: &Model) -> Result<Conditioning> {
    condition_with(sketch, &appearance_features(reference, mesh, model)?, mesh, model)
}

/// Synthesizes and decodes a conditioned head without a hook.
pub fn generate_from(conditioning: Conditioning, mesh: &TemplateMesh, model: &Model) -> Result<(GaussianSet, GenerationArtifacts)> {
    let Conditioning { coarse, latent, modulation } = conditioning;
    let (attributes, pyramid) = synthesize_uv(&latent, &modulation, model, &mesh.validity(), None)?;
    let set = decode_uv_to_gaussians(&attributes, mesh)?;
    Ok((set, GenerationArtifacts { coarse, latent, modulation, pyramid, attributes }))
}

/// Sketch + reference → Gaussian head, keeping every intermediate.
pub fn generate_head(
    sketch: &SketchImage,
    reference: &ReferenceImage,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<(GaussianSet, GenerationArtifacts)> {
    generate_from(condition(sketch, reference, mesh, model)?, mesh, model)
}
