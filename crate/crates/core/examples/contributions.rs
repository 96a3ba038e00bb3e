//! Logs what the rasterizer composited at a few pixels and checks that the
//! logged opacities and transmittances reproduce the frame's alpha.

use splathead_core::scene::random_scene;
use splathead_core::{rasterize, record_contributions, Camera, PixelMask};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let camera = Camera::new(glam::Vec3::new(0.0, 0.0, 5.0), glam::Vec3::ZERO, glam::Vec3::Y, 0.8, (128, 128), 0.1, 50.0)?;
    let set = random_scene(3, 3_000, &camera);
    let frame = rasterize(&set, &camera);
    let mask = PixelMask::from_fn(128, 128, |x, y| x % 32 == 16 && y % 32 == 16);
    let log = record_contributions(&set, &camera, &mask)?;
    for px in &log.pixels {
        let weight: f32 = px.entries.iter().map(|c| c.alpha * c.transmittance).sum();
        println!(
            "({:3}, {:3}): {:3} contributions, sum of alpha*T = {weight:.6}, frame alpha = {:.6}",
            px.x,
            px.y,
            px.entries.len(),
            frame.alpha_at(px.x, px.y)
        );
    }
    println!("{} entries in total", log.entry_count());
    Ok(())
}
