//! Runs a few scenarios of the strategy comparison and prints how fusion
//! fares against composition and full regeneration.
//!
//! ```text
//! cargo run --release -p splathead --example ablation -- 3
//! ```

use splathead::core::TemplateMesh;
use splathead::edit::{default_camera, run_suite, standard_suite, EditConfig};
use splathead::neural::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let camera = default_camera(256);
    let scenarios: Vec<_> = standard_suite().into_iter().take(count).collect();

    let reports = run_suite(&scenarios, &camera, EditConfig::default(), &mesh, &model)?;
    for r in &reports {
        println!(
            "{:>3} {:<16} {:<9} unedited psnr {:>7} seam {:>10}",
            r.scenario,
            r.edit,
            r.strategy.name(),
            r.unedited_psnr.map_or("inf".into(), |p| format!("{p:.1}")),
            r.seam.map_or("-".into(), |s| format!("{s:.3e}")),
        );
    }
    let s = splathead::ablation_summary(&reports);
    println!("fusion beats regeneration on unedited PSNR in {}/{}", s.psnr_wins, s.scenarios);
    println!("fusion seam <= composite seam in {}/{}", s.seam_wins, s.scenarios);
    Ok(())
}
