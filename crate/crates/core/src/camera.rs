//! Pinhole camera and first-order (EWA) projection of Gaussians to screen space.

use glam::{Mat3, Vec2, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gaussian::GaussianPrimitive;

/// Added to the diagonal of every screen-space covariance (px²).
pub const SCREEN_COVARIANCE_FLOOR: f32 = 0.3;
/// Splat kernels are cut off at this Mahalanobis radius.
pub const KERNEL_CUTOFF: f32 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraFields", into = "CameraFields")]
pub struct Camera {
    position: Vec3,
    look_at: Vec3,
    up: Vec3,
    vertical_fov: f32,
    image_size: (u32, u32),
    near: f32,
    far: f32,
}

/// Wire form of [`Camera`]; validated on conversion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraFields {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub vertical_fov: f32,
    pub image_size: (u32, u32),
    pub near: f32,
    pub far: f32,
}

impl TryFrom<CameraFields> for Camera {
    type Error = CoreError;

    fn try_from(f: CameraFields) -> Result<Self> {
        Camera::new(f.position, f.look_at, f.up, f.vertical_fov, f.image_size, f.near, f.far)
    }
}

impl From<Camera> for CameraFields {
    fn from(c: Camera) -> Self {
        Self {
            position: c.position,
            look_at: c.look_at,
            up: c.up,
            vertical_fov: c.vertical_fov,
            image_size: c.image_size,
            near: c.near,
            far: c.far,
        }
    }
}

impl Camera {
    pub fn new(
        position: Vec3,
        look_at: Vec3,
        up: Vec3,
        vertical_fov: f32,
        image_size: (u32, u32),
        near: f32,
        far: f32,
    ) -> Result<Self> {
        if !(near > 0.0 && far > near && far.is_finite()) {
            return Err(CoreError::InvalidCamera(format!("need 0 < near < far, got {near}, {far}")));
        }
        if !(vertical_fov > 0.0 && vertical_fov < std::f32::consts::PI) {
            return Err(CoreError::InvalidCamera(format!("fov {vertical_fov} outside (0, pi)")));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(CoreError::InvalidCamera("image size must be at least 1x1".into()));
        }
        let forward = look_at - position;
        if !position.is_finite() || !look_at.is_finite() || forward.length_squared() < 1e-12 {
            return Err(CoreError::InvalidCamera("look_at must differ from position".into()));
        }
        if forward.normalize().cross(up).length_squared() < 1e-12 {
            return Err(CoreError::InvalidCamera("up is parallel to the view direction".into()));
        }
        Ok(Self {
            position,
            look_at,
            up,
            vertical_fov,
            image_size,
            near,
            far,
        })
    }

    /// Camera on a sphere around `target`; azimuth 0 and elevation 0 look
    /// down the -Z axis from +Z.
    pub fn orbit(target: Vec3, azimuth: f32, elevation: f32, radius: f32, image_size: (u32, u32)) -> Result<Self> {
        let dir = Vec3::new(
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
            elevation.cos() * azimuth.cos(),
        );
        Self::new(
            target + dir * radius,
            target,
            Vec3::Y,
            40f32.to_radians(),
            image_size,
            0.05,
            100.0,
        )
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn look_at(&self) -> Vec3 {
        self.look_at
    }

    pub fn up(&self) -> Vec3 {
        self.up
    }

    pub fn vertical_fov(&self) -> f32 {
        self.vertical_fov
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    pub fn width(&self) -> usize {
        self.image_size.0 as usize
    }

    pub fn height(&self) -> usize {
        self.image_size.1 as usize
    }

    pub fn near(&self) -> f32 {
        self.near
    }

    pub fn far(&self) -> f32 {
        self.far
    }

    pub fn with_image_size(&self, image_size: (u32, u32)) -> Result<Self> {
        Self::new(self.position, self.look_at, self.up, self.vertical_fov, image_size, self.near, self.far)
    }

    pub fn focal(&self) -> f32 {
        0.5 * self.image_size.1 as f32 / (0.5 * self.vertical_fov).tan()
    }

    /// Rows are the camera's right, down and forward axes in world space.
    pub fn world_to_view_rotation(&self) -> Mat3 {
        let forward = (self.look_at - self.position).normalize();
        let right = forward.cross(self.up).normalize();
        let down = forward.cross(right);
        Mat3::from_cols(right, down, forward).transpose()
    }

    pub fn world_to_view(&self, point: Vec3) -> Vec3 {
        self.world_to_view_rotation() * (point - self.position)
    }

    /// Projects a view-space point to pixel coordinates (pixel centers at +0.5).
    pub fn view_to_pixel(&self, view: Vec3) -> Vec2 {
        let f = self.focal();
        Vec2::new(
            f * view.x / view.z + 0.5 * self.image_size.0 as f32,
            f * view.y / view.z + 0.5 * self.image_size.1 as f32,
        )
    }
}

/// A Gaussian after projection: everything the compositor needs per splat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedSplat {
    pub mean: Vec2,
    /// Screen covariance `[xx, xy, yy]` in px², floor included.
    pub covariance: [f32; 3],
    /// Inverse of `covariance`, `[xx, xy, yy]`.
    pub conic: [f32; 3],
    pub depth: f32,
    /// Cutoff radius along the major axis, px.
    pub radius: f32,
    pub opacity: f32,
    pub color: [f32; 3],
}

impl ProjectedSplat {
    /// Squared Mahalanobis distance of a pixel-center offset.
    #[inline]
    pub fn mahalanobis_sq(&self, dx: f32, dy: f32) -> f32 {
        let [a, b, c] = self.conic;
        a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    }

    /// `opacity · exp(-½ dᵀ Σ⁻¹ d)` at the pixel center, or `None` beyond the
    /// kernel cutoff.
    #[inline]
    pub fn alpha_at(&self, px: f32, py: f32) -> Option<f32> {
        let dx = px - self.mean.x;
        let dy = py - self.mean.y;
        let m = self.mahalanobis_sq(dx, dy);
        if m > KERNEL_CUTOFF * KERNEL_CUTOFF {
            None
        } else {
            Some(self.opacity * (-0.5 * m).exp())
        }
    }
}

/// Projects a primitive; returns `None` when it is culled.
pub fn project_gaussian(camera: &Camera, primitive: &GaussianPrimitive) -> Option<ProjectedSplat> {
    let w = camera.world_to_view_rotation();
    let t = w * (primitive.position() - camera.position());
    if t.z <= camera.near || t.z >= camera.far {
        return None;
    }
    let focal = camera.focal();
    let (width, height) = (camera.image_size.0 as f32, camera.image_size.1 as f32);
    // Clamp the Jacobian's lateral terms for splats far outside the frustum.
    let limit_x = 1.3 * 0.5 * width / focal;
    let limit_y = 1.3 * 0.5 * height / focal;
    let tx = (t.x / t.z).clamp(-limit_x, limit_x) * t.z;
    let ty = (t.y / t.z).clamp(-limit_y, limit_y) * t.z;
    let inv_z = 1.0 / t.z;
    let j0 = Vec3::new(focal * inv_z, 0.0, -focal * tx * inv_z * inv_z);
    let j1 = Vec3::new(0.0, focal * inv_z, -focal * ty * inv_z * inv_z);
    let cov_view = w * primitive.covariance() * w.transpose();
    let a = j0.dot(cov_view * j0) + SCREEN_COVARIANCE_FLOOR;
    let b = j0.dot(cov_view * j1);
    let c = j1.dot(cov_view * j1) + SCREEN_COVARIANCE_FLOOR;
    let det = a * c - b * b;
    // Also rejects NaN.
    if det.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    let mid = 0.5 * (a + c);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let radius = KERNEL_CUTOFF * lambda_max.sqrt();
    let mean = camera.view_to_pixel(t);
    if mean.x + radius < 0.0 || mean.x - radius > width || mean.y + radius < 0.0 || mean.y - radius > height {
        return None;
    }
    Some(ProjectedSplat {
        mean,
        covariance: [a, b, c],
        conic: [c * inv_det, -b * inv_det, a * inv_det],
        depth: t.z,
        radius,
        opacity: primitive.opacity(),
        color: primitive.color().to_array(),
    })
}
