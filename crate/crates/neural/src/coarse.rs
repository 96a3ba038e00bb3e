//! Coarse stage: patch encoding of the inputs, the geometry and appearance
//! transformer branches, projection of their per-vertex outputs into UV
//! space, and AdaIN alignment of the two UV maps.

use splathead_core::{splat_vertex_features_to_uv, TemplateMesh, UvFeatureMap};

use crate::arch::BranchSpec;
use crate::blocks::{adain, cross_attention, feed_forward, layer_norm_at, AttentionWeights, ChannelStats};
use crate::error::{NeuralError, Result};
use crate::images::{InputImage, ReferenceImage, SketchImage};
use crate::model::Model;
use crate::tensor::{conv2d, leaky_relu, linear, Tensor};

/// Encodes an input image to a `[patch_grid², embed_dim]` token grid with
/// the convolutional patch embedder. Each token sees exactly its own
/// `16 × 16` pixel patch.
pub fn encode_image(image: &InputImage, model: &Model) -> Result<Tensor> {
    let spec = &model.arch().input;
    if image.resolution() != spec.resolution {
        return Err(NeuralError::Dimension(format!(
            "input image is {}², encoder expects {}²",
            image.resolution(),
            spec.resolution
        )));
    }
    let w = model.weights();
    let mut x = image.to_tensor();
    for (i, stride) in [4usize, 2, 2].into_iter().enumerate() {
        let weight = w.get(&format!("encoder.conv{i}.weight"))?;
        let bias = w.get(&format!("encoder.conv{i}.bias"))?;
        x = conv2d(&x, weight, Some(bias), stride, 0)?;
        if i < 2 {
            x = x.map(leaky_relu);
        }
    }
    let (g, _, e) = x.hwc()?;
    let tokens = x.reshape(vec![g * g, e])?;
    tokens.add(w.get("encoder.pos_embed")?)
}

/// Learnable per-vertex queries and identity tokens of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBank {
    pub vertex_queries: Tensor,
    pub identity_tokens: Tensor,
}

impl QueryBank {
    /// Loads `"{branch}.vertex_queries"` and `"{branch}.identity_tokens"`.
    pub fn from_model(model: &Model, branch: &str) -> Result<Self> {
        let w = model.weights();
        Ok(Self {
            vertex_queries: w.get(&format!("{branch}.vertex_queries"))?.clone(),
            identity_tokens: w.get(&format!("{branch}.identity_tokens"))?.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutput {
    /// `[vertices, dim]`.
    pub vertex_features: Tensor,
    pub identity_vector: Vec<f32>,
}

/// Runs a transformer branch (`"geometry"` or `"appearance"`): the vertex
/// queries and identity tokens form one sequence that passes through shared
/// pre-norm attention and feed-forward blocks. Vertex queries attend to the
/// projected image tokens; identity tokens attend to the image tokens and to
/// the current vertex states, so they summarize the whole head. The identity
/// vector is the mean of the output identity tokens.
pub fn run_branch(queries: &QueryBank, image_features: &Tensor, model: &Model, branch: &str) -> Result<BranchOutput> {
    let spec: &BranchSpec = match branch {
        "geometry" => &model.arch().geometry,
        "appearance" => &model.arch().appearance,
        other => return Err(NeuralError::Contract(format!("unknown branch '{other}'"))),
    };
    let w = model.weights();
    let d = spec.dim;
    queries.vertex_queries.expect_rank("vertex queries", 2)?;
    if queries.vertex_queries.cols() != d || queries.identity_tokens.cols() != d {
        return Err(NeuralError::Dimension(format!("{branch}: query width differs from branch width {d}")));
    }
    let kv = linear(
        image_features,
        w.get(&format!("{branch}.kv_proj.weight"))?,
        Some(w.get(&format!("{branch}.kv_proj.bias"))?),
    )?;
    let n_vertices = queries.vertex_queries.rows();
    let mut x = Tensor::concat_rows(&[&queries.vertex_queries, &queries.identity_tokens])?;
    for b in 0..spec.blocks {
        let p = format!("{branch}.block{b}");
        let kv_n = layer_norm_at(&kv, w, &format!("{p}.ln_kv"))?;
        let attn = AttentionWeights::from_store(w, &format!("{p}.attn"), spec.heads)?;
        let xn = layer_norm_at(&x, w, &format!("{p}.ln1"))?;
        let vertices = xn.slice_rows(0, n_vertices);
        let identity = xn.slice_rows(n_vertices, xn.rows());
        let vertex_update = cross_attention(&vertices, &kv_n, &attn)?;
        let identity_context = Tensor::concat_rows(&[&kv_n, &vertices])?;
        let identity_update = cross_attention(&identity, &identity_context, &attn)?;
        x = x.add(&Tensor::concat_rows(&[&vertex_update, &identity_update])?)?;
        x = x.add(&feed_forward(&layer_norm_at(&x, w, &format!("{p}.ln2"))?, w, &format!("{p}.ffn"))?)?;
    }
    let x = layer_norm_at(&x, w, &format!("{branch}.out_ln"))?;
    let vertex_features = x.slice_rows(0, n_vertices);
    let identity_vector = x.slice_rows(n_vertices, x.rows()).mean_rows();
    Ok(BranchOutput { vertex_features, identity_vector })
}

pub(crate) fn to_tensor(map: &UvFeatureMap) -> Tensor {
    let r = map.resolution() as usize;
    Tensor::new(vec![r, r, map.channels()], map.data().to_vec()).expect("uv map shape")
}

pub(crate) fn to_uv(t: Tensor) -> Result<UvFeatureMap> {
    let (h, w, c) = t.hwc()?;
    if h != w {
        return Err(NeuralError::Dimension(format!("UV maps are square, got {h}x{w}")));
    }
    Ok(UvFeatureMap::from_data(h as u32, c, t.into_data())?)
}

/// Target statistics predicted from the appearance map: its per-channel mean
/// and deviation over valid texels pass through a linear layer; deviations
/// go through a softplus.
pub fn predict_style_stats(appearance_uv: &UvFeatureMap, validity: &[bool], model: &Model) -> Result<ChannelStats> {
    let own = ChannelStats::of(&to_tensor(appearance_uv), Some(validity))?;
    let input: Vec<f32> = own.mean.iter().chain(&own.std).copied().collect();
    let x = Tensor::new(vec![1, input.len()], input)?;
    let w = model.weights();
    let raw = linear(&x, w.get("align.style.weight")?, Some(w.get("align.style.bias")?))?.into_data();
    let g = raw.len() / 2;
    let softplus = |v: f32| if v > 20.0 { v } else { v.exp().ln_1p() };
    Ok(ChannelStats { mean: raw[..g].to_vec(), std: raw[g..].iter().map(|v| softplus(*v) + 1e-3).collect() })
}

/// AdaIN of the geometry map to the given statistics over valid texels,
/// followed by the 1×1 refinement convolution; invalid texels stay zero.
pub fn align_with_stats(
    geometry_uv: &UvFeatureMap,
    stats: &ChannelStats,
    validity: &[bool],
    model: &Model,
) -> Result<UvFeatureMap> {
    let normalized = adain(&to_tensor(geometry_uv), stats, Some(validity))?;
    let w = model.weights();
    let mut refined = conv2d(&normalized, w.get("align.refine.weight")?, Some(w.get("align.refine.bias")?), 1, 0)?;
    let c = refined.cols();
    for (px, valid) in refined.data_mut().chunks_exact_mut(c).zip(validity) {
        if !valid {
            px.fill(0.0);
        }
    }
    to_uv(refined)
}

/// Aligns the geometry map to statistics predicted from the appearance map.
pub fn align_appearance(
    geometry_uv: &UvFeatureMap,
    appearance_uv: &UvFeatureMap,
    validity: &[bool],
    model: &Model,
) -> Result<UvFeatureMap> {
    if geometry_uv.resolution() != appearance_uv.resolution() {
        return Err(NeuralError::Dimension(format!(
            "geometry map {}² vs appearance map {}²",
            geometry_uv.resolution(),
            appearance_uv.resolution()
        )));
    }
    let r = geometry_uv.resolution() as usize;
    if validity.len() != r * r {
        return Err(NeuralError::Dimension(format!("validity has {} entries for {r}²", validity.len())));
    }
    let stats = predict_style_stats(appearance_uv, validity, model)?;
    align_with_stats(geometry_uv, &stats, validity, model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseOutput {
    /// Channel concatenation of projected geometry features and aligned features.
    pub coarse_uv: UvFeatureMap,
    pub id_geometry: Vec<f32>,
    pub id_appearance: Vec<f32>,
}

/// Appearance-side inputs that do not depend on the sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceFeatures {
    pub appearance_uv: UvFeatureMap,
    pub id_appearance: Vec<f32>,
}

pub fn appearance_features(reference: &ReferenceImage, mesh: &TemplateMesh, model: &Model) -> Result<AppearanceFeatures> {
    model.check_mesh(mesh)?;
    let tokens = encode_image(reference.image(), model)?;
    let out = run_branch(&QueryBank::from_model(model, "appearance")?, &tokens, model, "appearance")?;
    let appearance_uv =
        splat_vertex_features_to_uv(out.vertex_features.data(), out.vertex_features.cols(), mesh, mesh.uv_resolution())?;
    Ok(AppearanceFeatures { appearance_uv, id_appearance: out.identity_vector })
}

/// Coarse stage with precomputed appearance features.
pub fn build_coarse_uv_with(
    sketch: &SketchImage,
    appearance: &AppearanceFeatures,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<CoarseOutput> {
    model.check_mesh(mesh)?;
    let tokens = encode_image(sketch.image(), model)?;
    let geo = run_branch(&QueryBank::from_model(model, "geometry")?, &tokens, model, "geometry")?;
    let geometry_uv =
        splat_vertex_features_to_uv(geo.vertex_features.data(), geo.vertex_features.cols(), mesh, mesh.uv_resolution())?;
    let aligned = align_appearance(&geometry_uv, &appearance.appearance_uv, &mesh.validity(), model)?;
    Ok(CoarseOutput {
        coarse_uv: geometry_uv.concat_channels(&aligned)?,
        id_geometry: geo.identity_vector,
        id_appearance: appearance.id_appearance.clone(),
    })
}

pub fn build_coarse_uv(
    sketch: &SketchImage,
    reference: &ReferenceImage,
    mesh: &TemplateMesh,
    model: &Model,
) -> Result<CoarseOutput> {
    build_coarse_uv_with(sketch, &appearance_features(reference, mesh, model)?, mesh, model)
}
