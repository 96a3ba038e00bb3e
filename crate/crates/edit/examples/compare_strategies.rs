//! Runs the seeded scenario suite and prints how fusion, 3D compositing and
//! plain regeneration compare. Pass `--json` for the JSON-lines report.

use splathead_core::TemplateMesh;
use splathead_edit::scenario::to_json_lines;
use splathead_edit::{default_camera, run_suite, standard_suite, EditConfig};
use splathead_neural::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let reports = run_suite(&standard_suite(), &default_camera(512), EditConfig::default(), &mesh, &model)?;
    if std::env::args().any(|a| a == "--json") {
        print!("{}", to_json_lines(&reports)?);
        return Ok(());
    }
    println!("{:>4} {:<14} {:<10} {:>12} {:>11} {:>10}", "seed", "edit", "strategy", "unedited dB", "edited dB", "seam");
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    for r in &reports {
        println!(
            "{:>4} {:<14} {:<10} {:>12} {:>11} {:>10}",
            r.scenario,
            r.edit,
            r.strategy.name(),
            fmt(r.unedited_psnr),
            fmt(r.edited_psnr),
            r.seam.map_or("-".to_string(), |v| format!("{v:.2e}"))
        );
    }
    Ok(())
}
