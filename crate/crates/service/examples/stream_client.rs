//! Starts a server on an ephemeral port, subscribes to a session stream and
//! prints what an edit pushes to it.

use std::sync::Arc;

use futures_util::StreamExt;
use splathead_core::TemplateMesh;
use splathead_neural::{synthetic_reference, FaceSketch, Model, SketchEdit};
use splathead_service::api::CreateSessionRequest;
use splathead_service::{serve_on, Service, ServiceConfig};
use tokio_tungstenite::tungstenite::Message;

fn b64(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig { frame_size: 128, ..ServiceConfig::default() };
    let svc = Arc::new(Service::new(config, Model::toy(0), TemplateMesh::default_head())?);
    let face = FaceSketch::random(9);
    let state = svc.create(&CreateSessionRequest {
        sketch_png: b64(&face.render(256).to_png()),
        reference_png: b64(&synthetic_reference(9, 256).to_png()),
        camera: None,
        config: None,
    })?;

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(serve_on(listener, svc.clone(), std::future::pending()));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{}/stream?encoding=png", state.id)).await?;
    // hello + frame, then edit + frame, each frame followed by its bytes.
    let mut seen = 0;
    while let Some(msg) = ws.next().await {
        match msg? {
            Message::Text(t) => println!("text   {}", &t[..t.len().min(100)]),
            Message::Binary(b) => {
                println!("binary {} bytes", b.len());
                seen += 1;
                if seen == 2 {
                    break;
                }
                // Edit only once subscribed, so the push is not missed.
                let (svc, id) = (svc.clone(), state.id.clone());
                let sketch = face.edited(SketchEdit::Frown).render(256);
                tokio::spawn(async move {
                    let ticket = svc.write_ticket(&id).await.unwrap();
                    svc.edit(&ticket, &sketch, None).unwrap();
                });
            }
            _ => {}
        }
    }
    Ok(())
}
