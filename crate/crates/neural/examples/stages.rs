//! Walks the generator stage by stage and prints what each produces.

use splathead_core::TemplateMesh;
use splathead_neural::coarse::appearance_features;
use splathead_neural::fine::{condition_with, generate_from};
use splathead_neural::{synthetic_reference, FaceSketch, Model};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let sketch = FaceSketch::random(2).render(256);

    // The appearance side depends only on the reference, so an editor can
    // compute it once per session.
    let appearance = appearance_features(&synthetic_reference(2, 256), &mesh, &model)?;
    println!(
        "appearance: {}x{} uv map with {} channels, identity vector of {}",
        appearance.appearance_uv.resolution(),
        appearance.appearance_uv.resolution(),
        appearance.appearance_uv.channels(),
        appearance.id_appearance.len()
    );

    let c = condition_with(&sketch, &appearance, &mesh, &model)?;
    println!("coarse map: {} channels", c.coarse.coarse_uv.channels());
    println!("latent: {} styles of {}", c.latent.layer_count(), c.latent.style_dim());
    println!("modulation: global latent of {}", c.modulation.global_latent.len());
    for map in &c.modulation.spatial_pyramid {
        println!("  spatial level {0}x{0}, {1} channels", map.resolution(), map.channels());
    }

    let (set, artifacts) = generate_from(c, &mesh, &model)?;
    for (k, layer) in artifacts.pyramid.layers().iter().enumerate() {
        println!("synthesis layer {k}: {:?}", layer.shape());
    }
    println!("attributes: {} channels per texel -> {} gaussians", artifacts.attributes.texel(0, 0).len(), set.len());
    Ok(())
}
