//! Writes a Gaussian set as PLY, reads it back and checks the render matches.

use splathead_core::scene::random_scene;
use splathead_core::ply::{load_ply, save_ply};
use splathead_core::{rasterize, Camera};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let camera = Camera::orbit(glam::Vec3::ZERO, 0.3, 0.1, 5.0, (256, 256))?;
    let set = random_scene(11, 2_000, &camera);
    let path = std::env::temp_dir().join("roundtrip.ply");
    save_ply(&set, &path)?;
    let back = load_ply(&path)?;
    let diff = rasterize(&set, &camera).max_abs_diff(&rasterize(&back, &camera));
    println!("{}: {} gaussians, max pixel difference after reload {diff:e}", path.display(), back.len());
    Ok(())
}
