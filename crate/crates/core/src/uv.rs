//! UV-space rasters: feature maps that flow through the generator and the
//! 14-channel attribute map that decodes to one Gaussian per valid texel.

use std::path::Path;

use glam::Vec3;

use crate::container::{NamedTensor, TensorContainer};
use crate::error::{format_err, CoreError, Result};
use crate::gaussian::{GaussianPrimitive, GaussianSet, TexelIndex};
use crate::mesh::TemplateMesh;

pub const ATTRIBUTE_CHANNELS: usize = 14;

pub const CHANNEL_NAMES: [&str; ATTRIBUTE_CHANNELS] = [
    "offset_x",
    "offset_y",
    "offset_z",
    "log_scale_x",
    "log_scale_y",
    "log_scale_z",
    "rot_w",
    "rot_x",
    "rot_y",
    "rot_z",
    "opacity_logit",
    "color_r",
    "color_g",
    "color_b",
];

/// Channel offsets inside one texel of a [`UvAttributeMap`].
pub mod channel {
    pub const OFFSET: usize = 0;
    pub const LOG_SCALE: usize = 3;
    pub const ROTATION: usize = 6;
    pub const OPACITY: usize = 10;
    pub const COLOR: usize = 11;
}

/// Raw-channel activations used when decoding attribute maps.
pub mod activation {
    use glam::{Quat, Vec3};

    pub const OFFSET_BOUND: f32 = 0.05;
    pub const MIN_SCALE: f32 = 1e-4;
    pub const MAX_SCALE: f32 = 0.5;

    pub fn offset(raw: [f32; 3]) -> Vec3 {
        Vec3::from_array(raw.map(|v| OFFSET_BOUND * v.tanh()))
    }

    pub fn scale(raw: [f32; 3]) -> Vec3 {
        Vec3::from_array(raw.map(|v| v.exp().clamp(MIN_SCALE, MAX_SCALE)))
    }

    /// `[w, x, y, z]`; all-zero input falls back to identity.
    pub fn rotation(raw: [f32; 4]) -> [f32; 4] {
        let [w, x, y, z] = raw;
        let q = Quat::from_xyzw(x, y, z, w);
        let n = q.length();
        if n < 1e-12 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let q = q / n;
        [q.w, q.x, q.y, q.z]
    }

    pub fn sigmoid(v: f32) -> f32 {
        1.0 / (1.0 + (-v).exp())
    }

    pub fn logit(p: f32) -> f32 {
        (p / (1.0 - p)).ln()
    }
}

/// Square multi-channel raster over the UV atlas, row-major, channels last.
#[derive(Debug, Clone, PartialEq)]
pub struct UvFeatureMap {
    resolution: u32,
    channels: usize,
    data: Vec<f32>,
}

impl UvFeatureMap {
    pub fn zeros(resolution: u32, channels: usize) -> Self {
        let r = resolution as usize;
        Self {
            resolution,
            channels,
            data: vec![0.0; r * r * channels],
        }
    }

    pub fn from_data(resolution: u32, channels: usize, data: Vec<f32>) -> Result<Self> {
        let r = resolution as usize;
        if data.len() != r * r * channels {
            return Err(CoreError::Dimension(format!(
                "{} values for a {r}x{r}x{channels} map",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(format_err("uv feature map", "non-finite value"));
        }
        Ok(Self {
            resolution,
            channels,
            data,
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn texel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.resolution as usize + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn texel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.resolution as usize + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Channel-wise concatenation `[self ‖ other]`.
    pub fn concat_channels(&self, other: &UvFeatureMap) -> Result<UvFeatureMap> {
        if self.resolution != other.resolution {
            return Err(CoreError::Dimension(format!(
                "cannot concatenate {} and {} resolution maps",
                self.resolution, other.resolution
            )));
        }
        let texels = (self.resolution as usize).pow(2);
        let channels = self.channels + other.channels;
        let mut data = Vec::with_capacity(texels * channels);
        for t in 0..texels {
            data.extend_from_slice(&self.data[t * self.channels..(t + 1) * self.channels]);
            data.extend_from_slice(&other.data[t * other.channels..(t + 1) * other.channels]);
        }
        Ok(UvFeatureMap {
            resolution: self.resolution,
            channels,
            data,
        })
    }

    pub fn to_container(&self) -> TensorContainer {
        let r = self.resolution as usize;
        let mut c = TensorContainer::new();
        c.set_meta("kind", "uv_feature_map");
        c.set_meta("resolution", self.resolution.to_string());
        c.set_meta("channel_count", self.channels.to_string());
        c.push(NamedTensor::new("features", vec![r, r, self.channels], self.data.clone()).expect("shape matches"));
        c
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        let t = c.require("features")?;
        match t.shape() {
            [r, r2, ch] if r == r2 => Self::from_data(*r as u32, *ch, t.data().to_vec()),
            s => Err(format_err("uv feature map", format!("bad shape {s:?}"))),
        }
    }
}

/// Raw (pre-activation) Gaussian attributes over the UV atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct UvAttributeMap {
    resolution: u32,
    data: Vec<f32>,
    validity: Vec<bool>,
}

impl UvAttributeMap {
    pub fn zeros(mesh: &TemplateMesh) -> Self {
        let r = mesh.uv_resolution() as usize;
        Self {
            resolution: mesh.uv_resolution(),
            data: vec![0.0; r * r * ATTRIBUTE_CHANNELS],
            validity: mesh.validity(),
        }
    }

    pub fn new(resolution: u32, data: Vec<f32>, validity: Vec<bool>) -> Result<Self> {
        let r = resolution as usize;
        if data.len() != r * r * ATTRIBUTE_CHANNELS || validity.len() != r * r {
            return Err(CoreError::Dimension(format!(
                "attribute map buffers do not match {r}x{r}x{ATTRIBUTE_CHANNELS}"
            )));
        }
        Ok(Self {
            resolution,
            data,
            validity,
        })
    }

    /// Wraps a feature map whose channel count must be 14.
    pub fn from_features(features: UvFeatureMap, validity: Vec<bool>) -> Result<Self> {
        if features.channels() != ATTRIBUTE_CHANNELS {
            return Err(CoreError::Dimension(format!(
                "attribute maps have {ATTRIBUTE_CHANNELS} channels, got {}",
                features.channels()
            )));
        }
        Self::new(features.resolution(), features.into_data(), validity)
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn validity(&self) -> &[bool] {
        &self.validity
    }

    pub fn texel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.resolution as usize + x) * ATTRIBUTE_CHANNELS;
        &self.data[i..i + ATTRIBUTE_CHANNELS]
    }

    pub fn texel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.resolution as usize + x) * ATTRIBUTE_CHANNELS;
        &mut self.data[i..i + ATTRIBUTE_CHANNELS]
    }

    pub fn to_container(&self) -> TensorContainer {
        let r = self.resolution as usize;
        let mut c = TensorContainer::new();
        c.set_meta("kind", "uv_attribute_map");
        c.set_meta("resolution", self.resolution.to_string());
        c.set_meta("channel_count", ATTRIBUTE_CHANNELS.to_string());
        c.set_meta("channel_names", CHANNEL_NAMES.join(","));
        c.push(NamedTensor::new("attributes", vec![r, r, ATTRIBUTE_CHANNELS], self.data.clone()).expect("shape"));
        let validity = self.validity.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        c.push(NamedTensor::new("validity", vec![r, r], validity).expect("shape"));
        c
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        if c.meta("kind") != Some("uv_attribute_map") {
            return Err(format_err("uv attribute map", "container kind is not uv_attribute_map"));
        }
        if c.meta("channel_names") != Some(CHANNEL_NAMES.join(",").as_str()) {
            return Err(format_err("uv attribute map", "unexpected channel table"));
        }
        let attrs = c.require("attributes")?;
        let validity = c.require("validity")?;
        let r = match attrs.shape() {
            [r, r2, ch] if r == r2 && *ch == ATTRIBUTE_CHANNELS => *r,
            s => return Err(format_err("uv attribute map", format!("bad shape {s:?}"))),
        };
        let validity = validity.data().iter().map(|v| *v != 0.0).collect();
        Self::new(r as u32, attrs.data().to_vec(), validity)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&TensorContainer::load(path)?)
    }
}

/// Projects per-vertex features onto the atlas by barycentric interpolation
/// of each valid texel's covering face. Uncovered texels are zero.
pub fn splat_vertex_features_to_uv(
    vertex_features: &[f32],
    channels: usize,
    mesh: &TemplateMesh,
    resolution: u32,
) -> Result<UvFeatureMap> {
    if channels == 0 || vertex_features.len() != mesh.vertex_count() * channels {
        return Err(CoreError::Dimension(format!(
            "{} feature values for {} vertices x {channels} channels",
            vertex_features.len(),
            mesh.vertex_count()
        )));
    }
    if resolution < 4 {
        return Err(CoreError::Dimension(format!("resolution {resolution} below 4")));
    }
    let resampled;
    let mesh = if resolution == mesh.uv_resolution() {
        mesh
    } else {
        resampled = mesh.with_uv_resolution(resolution)?;
        &resampled
    };
    let mut out = UvFeatureMap::zeros(resolution, channels);
    let faces = mesh.faces();
    for (i, binding) in mesh.texel_bindings().iter().enumerate() {
        let Some(b) = binding else { continue };
        let face = faces[b.face as usize];
        let dst = &mut out.data[i * channels..(i + 1) * channels];
        for (corner, w) in face.iter().zip(b.barycentric) {
            let src = &vertex_features[*corner as usize * channels..(*corner as usize + 1) * channels];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Ok(out)
}

/// World-space anchor of a texel, `None` when no face covers it.
pub fn texel_surface_point(mesh: &TemplateMesh, texel: TexelIndex) -> Result<Option<Vec3>> {
    Ok(mesh.binding(texel)?.map(|b| mesh.surface_point(&b)))
}

/// Decodes one Gaussian per valid texel, in row-major texel order.
pub fn decode_uv_to_gaussians(map: &UvAttributeMap, mesh: &TemplateMesh) -> Result<GaussianSet> {
    if map.resolution() != mesh.uv_resolution() {
        return Err(CoreError::Dimension(format!(
            "attribute map resolution {} but mesh atlas {}",
            map.resolution(),
            mesh.uv_resolution()
        )));
    }
    let r = map.resolution as usize;
    let mut primitives = Vec::with_capacity(mesh.valid_texel_count());
    let mut texels = Vec::with_capacity(mesh.valid_texel_count());
    for (texel, binding) in mesh.valid_texels() {
        let raw = map.texel(texel.x as usize, texel.y as usize);
        if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::InvalidPrimitive(format!(
                "texel ({}, {}) has non-finite raw value {v}",
                texel.x, texel.y
            )));
        }
        let at = |k: usize| -> [f32; 3] { [raw[k], raw[k + 1], raw[k + 2]] };
        let position = mesh.surface_point(&binding) + activation::offset(at(channel::OFFSET));
        let scale = activation::scale(at(channel::LOG_SCALE));
        let r4 = &raw[channel::ROTATION..channel::ROTATION + 4];
        let rotation = activation::rotation([r4[0], r4[1], r4[2], r4[3]]);
        let opacity = activation::sigmoid(raw[channel::OPACITY]);
        let color = Vec3::from_array(at(channel::COLOR).map(activation::sigmoid));
        primitives.push(GaussianPrimitive::new(position, scale, rotation, opacity, color)?);
        texels.push(Some(texel));
    }
    debug_assert!(map.validity.len() == r * r);
    GaussianSet::new(primitives, texels, Some(map.resolution))
}
