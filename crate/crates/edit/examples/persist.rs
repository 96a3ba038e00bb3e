//! Saves an edited session to disk and resumes it, undo history included.

use splathead_core::TemplateMesh;
use splathead_edit::{default_camera, frame_hash, EditConfig, EditSession, Scenario};
use splathead_neural::{Model, SketchEdit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let camera = default_camera(256);
    let scenario = Scenario { seed: 8, edit: SketchEdit::Frown };
    let mut session = scenario.session(camera, EditConfig::default(), &mesh, &model)?;
    session.apply_edit(&scenario.edited_sketch(), &camera, &mesh, &model)?;

    let dir = std::env::temp_dir().join("splathead-session");
    session.save(&dir, &model)?;
    let mut resumed = EditSession::load(&dir, &mesh, &model)?;
    println!("{}: session '{}' at depth {}", dir.display(), resumed.id(), resumed.depth());
    println!("same frame: {}", frame_hash(&resumed.render(&camera)) == frame_hash(&session.render(&camera)));
    println!("undo after reload: {}", resumed.undo());
    Ok(())
}
