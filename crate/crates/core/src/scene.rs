//! Seeded synthetic scenes for oracles, benchmarks and examples.

use glam::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::Camera;
use crate::gaussian::{GaussianPrimitive, GaussianSet};

/// `count` random Gaussians inside the view frustum of `camera`, between
/// 30% and 70% of the way from the camera to its look-at point and beyond.
pub fn random_scene(seed: u64, count: usize, camera: &Camera) -> GaussianSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eye = camera.position();
    let dist = (camera.look_at() - eye).length();
    let rot = camera.world_to_view_rotation().transpose();
    let tan_y = (0.5 * camera.vertical_fov()).tan();
    let aspect = camera.width() as f32 / camera.height() as f32;
    let prims = (0..count)
        .map(|_| {
            let depth = rng.random_range(0.6 * dist..1.4 * dist);
            let vx = rng.random_range(-1.0..1.0) * tan_y * aspect * depth;
            let vy = rng.random_range(-1.0..1.0) * tan_y * depth;
            let position = eye + rot * Vec3::new(vx, vy, depth);
            let base = dist * rng.random_range(0.004..0.03);
            let scale = Vec3::new(
                base * rng.random_range(0.3..1.5),
                base * rng.random_range(0.3..1.5),
                base * rng.random_range(0.3..1.5),
            );
            let q = [
                rng.random_range(-1.0..1.0f32),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = q.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-6);
            let q = if n < 1e-3 { [1.0, 0.0, 0.0, 0.0] } else { q.map(|v| v / n) };
            let color = Vec3::new(rng.random(), rng.random(), rng.random());
            GaussianPrimitive::new(position, scale, q, rng.random_range(0.05..0.95), color)
                .expect("generated primitive is valid")
        })
        .collect();
    GaussianSet::unbound(prims)
}
