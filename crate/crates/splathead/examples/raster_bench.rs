//! Measures rasterizer throughput on an orbiting camera around a generated
//! head.

use splathead::bench::bench_raster;
use splathead::core::{Camera, TemplateMesh};
use splathead::neural::{generate_head, synthetic_reference, FaceSketch, Model};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let (set, _) = generate_head(&FaceSketch::random(5).render(256), &synthetic_reference(5, 256), &mesh, &model)?;
    let frames = 60;
    let report = bench_raster(&set, frames, |i| {
        let azimuth = i as f32 / frames as f32 * std::f32::consts::TAU;
        Camera::orbit(glam::Vec3::ZERO, azimuth, 0.1, 3.6, (512, 512)).expect("valid orbit")
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
