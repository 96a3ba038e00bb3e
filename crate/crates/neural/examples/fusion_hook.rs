//! Intercepts the synthesis stack through a fusion hook: the first pass
//! records every layer's features, the second pass swaps in a blend of them
//! with another head's features on the right half of UV space.

use splathead_core::TemplateMesh;
use splathead_neural::{condition, generate_head, synthesize_uv, synthetic_reference, FaceSketch, FusionHook, Model, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let reference = synthetic_reference(4, 256);
    let (_, a) = generate_head(&FaceSketch::random(4).render(256), &reference, &mesh, &model)?;
    let b = condition(&FaceSketch::random(5).render(256), &reference, &mesh, &model)?;

    let mut hook = |k: usize, x: Tensor| {
        let keep = a.pyramid.layer(k).expect("same depth");
        let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let mut data = x.data().to_vec();
        for y in 0..h {
            for px in w / 2..w {
                let i = (y * w + px) * c;
                data[i..i + c].copy_from_slice(&keep.data()[i..i + c]);
            }
        }
        Tensor::new(vec![h, w, c], data)
    };
    let (attrs, pyramid) = synthesize_uv(&b.latent, &b.modulation, &model, &mesh.validity(), Some(&mut hook as &mut FusionHook))?;

    // The returned pyramid holds what the hook produced, so its right half is
    // head A's; the attributes still differ because the output projection is
    // styled by head B's latent.
    for (k, (fused, keep)) in pyramid.layers().iter().zip(a.pyramid.layers()).enumerate() {
        let (w, c) = (fused.shape()[1], fused.shape()[2]);
        let right = (0..fused.shape()[0] * w).filter(|i| i % w >= w / 2);
        let same = right.clone().all(|i| fused.data()[i * c..(i + 1) * c] == keep.data()[i * c..(i + 1) * c]);
        println!("layer {k}: right half taken from head A: {same}");
    }
    let differing = attrs.data().iter().zip(a.attributes.data()).filter(|(x, y)| x != y).count();
    println!("{differing} attribute values differ from head A");
    Ok(())
}
