//! Runs the service with the toy model, configured from `SPLATHEAD_*`
//! environment variables.
//!
//! ```sh
//! SPLATHEAD_LISTEN=127.0.0.1:8087 SPLATHEAD_SESSION_DIR=/tmp/heads cargo run -p splathead-service --example serve
//! ```

use splathead_core::TemplateMesh;
use splathead_neural::Model;
use splathead_service::{serve, Service, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig::from_env()?;
    println!("listening on http://{} (capacity {})", config.listen, config.capacity);
    serve(Service::new(config, Model::toy(0), TemplateMesh::default_head())?).await?;
    Ok(())
}
