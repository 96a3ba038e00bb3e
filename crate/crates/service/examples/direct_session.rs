//! Drives the service layer without HTTP: create, edit, undo and render
//! through [`Service`] as the route handlers do.

use splathead_core::TemplateMesh;
use splathead_neural::{synthetic_reference, FaceSketch, Model, SketchEdit};
use splathead_service::api::CreateSessionRequest;
use splathead_service::{Service, ServiceConfig};

fn b64(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig { frame_size: 256, ..ServiceConfig::default() };
    let svc = Service::new(config, Model::toy(0), TemplateMesh::default_head())?;

    let face = FaceSketch::random(5);
    let created = svc.create(&CreateSessionRequest {
        sketch_png: b64(&face.render(256).to_png()),
        reference_png: b64(&synthetic_reference(5, 256).to_png()),
        camera: None,
        config: None,
    })?;
    println!("session {} frame {}", created.id, &created.frame_hash[..16]);

    let ticket = svc.write_ticket(&created.id).await?;
    let sketch = face.edited(SketchEdit::RaiseBrows).render(256);
    let (summary, state) = svc.edit(&ticket, &sketch, None)?;
    println!(
        "edit: {} gaussians selected, {} ms, frame {}",
        summary.selected_gaussians,
        summary.total_micros / 1000,
        &state.frame_hash[..16]
    );
    let (undone, state) = svc.undo(&ticket);
    println!("undo: {undone}, frame back to {}", &state.frame_hash[..16]);
    Ok(())
}
