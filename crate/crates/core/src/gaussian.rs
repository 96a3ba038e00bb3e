//! Anisotropic 3D Gaussian primitives and their covariance/density math.

use glam::{Mat3, Quat, Vec3};

use crate::error::{CoreError, Result};

/// Quaternions whose norm falls outside this band are rejected instead of
/// being renormalized.
const QUAT_NORM_BAND: (f32, f32) = (0.9, 1.1);

/// Location of a Gaussian's source texel in the UV atlas, `x` along U and
/// `y` along V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct TexelIndex {
    pub x: u32,
    pub y: u32,
}

impl TexelIndex {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn linear(self, resolution: u32) -> usize {
        self.y as usize * resolution as usize + self.x as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrimitive {
    position: Vec3,
    scale: Vec3,
    rotation: Quat,
    opacity: f32,
    color: Vec3,
}

impl GaussianPrimitive {
    /// `rotation` is `[w, x, y, z]`. Near-unit quaternions are silently
    /// renormalized.
    pub fn new(position: Vec3, scale: Vec3, rotation: [f32; 4], opacity: f32, color: Vec3) -> Result<Self> {
        if !position.is_finite() {
            return Err(CoreError::InvalidPrimitive(format!("non-finite position {position}")));
        }
        validate_scale(scale)?;
        let rotation = normalize_wxyz(rotation)?;
        if !(0.0..=1.0).contains(&opacity) {
            return Err(CoreError::InvalidPrimitive(format!("opacity {opacity} outside [0, 1]")));
        }
        if !color.to_array().iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(CoreError::InvalidPrimitive(format!("color {color} outside [0, 1]")));
        }
        Ok(Self {
            position,
            scale,
            rotation,
            opacity,
            color,
        })
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn scale(&self) -> Vec3 {
        self.scale
    }

    pub fn rotation(&self) -> Quat {
        self.rotation
    }

    pub fn rotation_wxyz(&self) -> [f32; 4] {
        let q = self.rotation;
        [q.w, q.x, q.y, q.z]
    }

    pub fn opacity(&self) -> f32 {
        self.opacity
    }

    pub fn color(&self) -> Vec3 {
        self.color
    }

    pub fn covariance(&self) -> Mat3 {
        covariance_from_parts(self.scale, self.rotation)
    }

    /// Rigidly rotates the primitive about the world origin.
    pub fn rotated(&self, rotation: Quat) -> Self {
        Self {
            position: rotation * self.position,
            rotation: (rotation * self.rotation).normalize(),
            ..*self
        }
    }

    pub fn density(&self, point: Vec3) -> f32 {
        let local = self.rotation.inverse() * (point - self.position);
        let z = local / self.scale;
        (-0.5 * z.length_squared()).exp()
    }
}

fn validate_scale(scale: Vec3) -> Result<()> {
    if scale.to_array().iter().all(|s| s.is_finite() && *s > 0.0) {
        Ok(())
    } else {
        Err(CoreError::InvalidPrimitive(format!("scale {scale} must be finite and strictly positive")))
    }
}

fn normalize_wxyz(q: [f32; 4]) -> Result<Quat> {
    let [w, x, y, z] = q;
    let quat = Quat::from_xyzw(x, y, z, w);
    let norm = quat.length();
    if !norm.is_finite() || norm < QUAT_NORM_BAND.0 || norm > QUAT_NORM_BAND.1 {
        return Err(CoreError::InvalidPrimitive(format!("quaternion norm {norm} is not near 1")));
    }
    Ok(quat / norm)
}

fn covariance_from_parts(scale: Vec3, rotation: Quat) -> Mat3 {
    let r = Mat3::from_quat(rotation);
    // M = R * S, Σ = M Mᵀ. Entries are summed in the same order for (i, j)
    // and (j, i) so the result is exactly symmetric.
    let m = r * Mat3::from_diagonal(scale);
    let mut cols = [[0.0f32; 3]; 3];
    for (j, col) in cols.iter_mut().enumerate() {
        for (i, entry) in col.iter_mut().enumerate() {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            *entry = (0..3).map(|k| m.col(k)[a] * m.col(k)[b]).sum();
        }
    }
    Mat3::from_cols_array_2d(&cols)
}

/// Σ = R S Sᵀ Rᵀ for a scale vector and a `[w, x, y, z]` quaternion.
pub fn build_covariance(scale: Vec3, rotation: [f32; 4]) -> Result<Mat3> {
    validate_scale(scale)?;
    let q = normalize_wxyz(rotation)?;
    Ok(covariance_from_parts(scale, q))
}

/// Unnormalized Gaussian density `exp(-½ (x-μ)ᵀ Σ⁻¹ (x-μ))`.
///
/// Σ⁻¹ is applied as `R S⁻² Rᵀ`, which stays well conditioned for the tiny
/// scales produced by UV decoding.
pub fn evaluate_density(primitive: &GaussianPrimitive, point: Vec3) -> Result<f32> {
    if primitive.scale.min_element() <= 0.0 {
        return Err(CoreError::InvalidPrimitive("singular covariance".into()));
    }
    Ok(primitive.density(point))
}

/// A flat collection of primitives plus their linkage back to UV texels.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSet {
    primitives: Vec<GaussianPrimitive>,
    uv_texel_index: Vec<Option<TexelIndex>>,
    uv_resolution: Option<u32>,
}

impl GaussianSet {
    pub fn new(
        primitives: Vec<GaussianPrimitive>,
        uv_texel_index: Vec<Option<TexelIndex>>,
        uv_resolution: Option<u32>,
    ) -> Result<Self> {
        if primitives.len() != uv_texel_index.len() {
            return Err(CoreError::Dimension(format!(
                "{} primitives but {} texel links",
                primitives.len(),
                uv_texel_index.len()
            )));
        }
        for texel in uv_texel_index.iter().flatten() {
            match uv_resolution {
                Some(res) if texel.x < res && texel.y < res => {}
                Some(res) => {
                    return Err(CoreError::Index(format!(
                        "texel ({}, {}) outside {res}x{res} atlas",
                        texel.x, texel.y
                    )))
                }
                None => return Err(CoreError::Contract("texel links require a UV resolution".into())),
            }
        }
        Ok(Self {
            primitives,
            uv_texel_index,
            uv_resolution,
        })
    }

    /// A set with no UV linkage.
    pub fn unbound(primitives: Vec<GaussianPrimitive>) -> Self {
        let n = primitives.len();
        Self {
            primitives,
            uv_texel_index: vec![None; n],
            uv_resolution: None,
        }
    }

    pub fn empty() -> Self {
        Self::unbound(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn primitives(&self) -> &[GaussianPrimitive] {
        &self.primitives
    }

    pub fn get(&self, index: usize) -> Option<&GaussianPrimitive> {
        self.primitives.get(index)
    }

    pub fn texel_indices(&self) -> &[Option<TexelIndex>] {
        &self.uv_texel_index
    }

    pub fn texel_of(&self, index: usize) -> Option<TexelIndex> {
        self.uv_texel_index.get(index).copied().flatten()
    }

    pub fn uv_resolution(&self) -> Option<u32> {
        self.uv_resolution
    }

    /// Returns a copy with the primitives at `indices` replaced by `with`'s
    /// primitives at the same positions. Both sets must share their texel
    /// layout.
    pub fn with_replacements(&self, with: &GaussianSet, indices: &[usize]) -> Result<Self> {
        if self.uv_texel_index != with.uv_texel_index || self.uv_resolution != with.uv_resolution {
            return Err(CoreError::Contract("sets are not texel-aligned".into()));
        }
        let mut out = self.clone();
        for &i in indices {
            let replacement = with
                .primitives
                .get(i)
                .ok_or_else(|| CoreError::Index(format!("gaussian {i} out of range")))?;
            out.primitives[i] = *replacement;
        }
        Ok(out)
    }
}
