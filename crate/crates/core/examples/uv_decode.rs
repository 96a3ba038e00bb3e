//! Decodes a hand-made UV attribute map into one Gaussian per valid texel:
//! zero offsets everywhere, with colours painted from the texel position.

use splathead_core::uv::channel;
use splathead_core::{decode_uv_to_gaussians, frame_io, rasterize, Camera, TemplateMesh, UvAttributeMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let mut map = UvAttributeMap::zeros(&mesh);
    let res = map.resolution() as usize;
    for y in 0..res {
        for x in 0..res {
            let t = map.texel_mut(x, y);
            // Colour is stored pre-sigmoid.
            t[channel::COLOR] = 4.0 * (x as f32 / res as f32 - 0.5);
            t[channel::COLOR + 1] = 4.0 * (y as f32 / res as f32 - 0.5);
            t[channel::COLOR + 2] = 1.0;
        }
    }
    let set = decode_uv_to_gaussians(&map, &mesh)?;
    println!("{} valid texels -> {} gaussians", mesh.valid_texel_count(), set.len());
    let frame = rasterize(&set, &Camera::orbit(glam::Vec3::ZERO, 0.4, 0.0, 3.6, (384, 384))?);
    let out = std::env::temp_dir().join("uv_decode.png");
    frame_io::save_png(&frame, &out, [0.0, 0.0, 0.0])?;
    println!("wrote {}", out.display());
    Ok(())
}
