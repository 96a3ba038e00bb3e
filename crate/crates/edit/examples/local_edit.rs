//! A short editing session: three local edits with per-stage timings, then
//! undo back to the start.

use splathead_core::TemplateMesh;
use splathead_edit::{default_camera, frame_hash, EditConfig, EditSession};
use splathead_neural::{synthetic_reference, FaceSketch, Model, SketchEdit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let camera = default_camera(512);
    let mut face = FaceSketch::random(12);
    let mut session = EditSession::create(
        "demo",
        face.render(256),
        synthetic_reference(12, 256),
        camera,
        EditConfig::default(),
        &mesh,
        &model,
    )?;
    let start = frame_hash(&session.render(&camera));

    for edit in [SketchEdit::WidenSmile, SketchEdit::RaiseBrows, SketchEdit::EnlargeEyes] {
        face = face.edited(edit);
        let summary = session.apply_edit(&face.render(256), &camera, &mesh, &model)?;
        let stages: Vec<String> = summary.timings.iter().map(|t| format!("{} {:.1}", t.stage, t.micros as f64 / 1e3)).collect();
        println!(
            "{:<14} {:>4} gaussians, {:>5} uv texels, {:>6.1} ms [{}]",
            edit.name(),
            summary.selected_gaussians,
            summary.final_level_texels,
            summary.total_micros as f64 / 1e3,
            stages.join(", ")
        );
    }
    while session.undo() {}
    println!("after undo: depth {}, frame restored: {}", session.depth(), frame_hash(&session.render(&camera)) == start);
    Ok(())
}
