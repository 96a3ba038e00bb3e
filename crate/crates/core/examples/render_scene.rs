//! Renders a seeded random scene and writes it as PNG.
//!
//! `cargo run --release -p splathead-core --example render_scene -- [out.png] [count]`

use splathead_core::scene::random_scene;
use splathead_core::{frame_io, rasterize_with_stats, Camera};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("scene.png").to_string_lossy().into_owned());
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20_000);

    let camera = Camera::new(glam::Vec3::new(0.0, 0.0, 5.0), glam::Vec3::ZERO, glam::Vec3::Y, 0.8, (512, 512), 0.1, 50.0)?;
    let set = random_scene(7, count, &camera);
    let (frame, stats) = rasterize_with_stats(&set, &camera);
    println!(
        "{count} gaussians, {} visible, {} tile entries; project {} us, bin {} us, composite {} us",
        stats.visible, stats.tile_entries, stats.project_us, stats.bin_us, stats.composite_us
    );
    frame_io::save_png(&frame, &out, [1.0, 1.0, 1.0])?;
    println!("wrote {out}");
    Ok(())
}
