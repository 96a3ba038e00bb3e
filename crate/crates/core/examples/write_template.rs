//! Regenerates `assets/head_template.obj` from the procedural generator.

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = splathead_core::mesh::default_procedural_head()?;
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/assets/head_template.obj").to_string());
    mesh.save_obj(&path)?;
    println!(
        "{path}: {} vertices, {} faces, {} valid texels at {}x{}",
        mesh.vertex_count(),
        mesh.faces().len(),
        mesh.valid_texel_count(),
        mesh.uv_resolution(),
        mesh.uv_resolution()
    );
    Ok(())
}
