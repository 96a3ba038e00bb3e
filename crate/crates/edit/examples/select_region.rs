//! From a sketch edit to the set of Gaussians it touches: sketch difference,
//! screen mask, influence weights, selection and the UV mask pyramid.

use splathead_core::TemplateMesh;
use splathead_edit::{default_camera, EditConfig, Scenario};
use splathead_neural::{Model, SketchEdit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let camera = default_camera(512);
    let scenario = Scenario { seed: 3, edit: SketchEdit::LengthenNose };
    let session = scenario.session(camera, EditConfig::default(), &mesh, &model)?;

    let plan = session.plan_edit(&scenario.edited_sketch(), &camera, &model)?;
    println!("sketch difference: {} px at 256², {} px at 512²", plan.sketch_mask.count(), plan.frame_mask.count());
    println!(
        "influence: max {:.4}, total {:.3} of {:.3} composited opacity",
        plan.influence.max_weight(),
        plan.influence.total(),
        plan.influence.mask_opacity
    );
    println!("selected {} of {} gaussians", plan.selected.len(), session.current_set().len());
    for level in &plan.masks.levels {
        println!("  uv mask {0:>3}x{0:<3} {1:>5} texels", level.resolution(), level.count());
    }
    Ok(())
}
