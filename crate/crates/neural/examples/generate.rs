//! Generates a head from a sketch and a reference image, then writes a
//! front render and a PLY file.
//!
//! ```sh
//! cargo run --release -p splathead-neural --example generate -- [sketch.png reference.png]
//! ```
//! Without arguments a seeded face sketch and synthetic reference are used.

use std::time::Instant;

use splathead_core::ply::save_ply;
use splathead_core::{frame_io, rasterize, Camera, TemplateMesh};
use splathead_neural::{generate_head, synthetic_reference, FaceSketch, Model, ReferenceImage, SketchImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (sketch, reference) = match args.as_slice() {
        [s, r] => (SketchImage::load(s)?, ReferenceImage::load(r)?),
        _ => (FaceSketch::random(1).render(256), synthetic_reference(1, 256)),
    };
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);

    let t = Instant::now();
    let (set, artifacts) = generate_head(&sketch, &reference, &mesh, &model)?;
    println!("{} gaussians in {:?}; pyramid levels {:?}", set.len(), t.elapsed(), artifacts.pyramid.resolutions());

    let dir = std::env::temp_dir();
    let frame = rasterize(&set, &Camera::orbit(glam::Vec3::ZERO, 0.0, 0.0, 3.6, (512, 512))?);
    frame_io::save_png(&frame, dir.join("head.png"), [1.0, 1.0, 1.0])?;
    save_ply(&set, dir.join("head.ply"))?;
    println!("wrote {0}/head.png and {0}/head.ply", dir.display());
    Ok(())
}
