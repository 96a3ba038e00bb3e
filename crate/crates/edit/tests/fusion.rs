use std::sync::OnceLock;

use splathead_core::{rasterize, Camera, TemplateMesh};
use splathead_edit::mask::UvMask;
use splathead_edit::session::default_camera;
use splathead_edit::{
    composite_3d_baseline, fuse_features, frame_hash, regenerate_baseline, resample_mask_pyramid, set_hash, EditConfig,
    EditError, EditSession, Scenario,
};
use splathead_neural::{FaceSketch, FusionHook, Model, SketchEdit, Tensor};

struct Fixture {
    mesh: TemplateMesh,
    model: Model,
    session: EditSession,
}

const LEVELS: [usize; 6] = [4, 8, 16, 32, 64, 128];

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let mesh = TemplateMesh::default_head();
        let model = Model::toy(5);
        let session = scenario(0).session(default_camera(256), EditConfig::default(), &mesh, &model).unwrap();
        Fixture { mesh, model, session }
    })
}

fn scenario(i: usize) -> Scenario {
    Scenario { seed: 40 + i as u64, edit: SketchEdit::ALL[i % SketchEdit::ALL.len()] }
}

fn camera() -> Camera {
    default_camera(256)
}

#[test]
fn feature_fusion_limits() {
    let orig = Tensor::new(vec![4, 4, 3], (0..48).map(|v| v as f32).collect()).unwrap();
    let new = Tensor::new(vec![4, 4, 3], (0..48).map(|v| -(v as f32)).collect()).unwrap();
    assert_eq!(fuse_features(&orig, new.clone(), &UvMask::empty(4)).unwrap(), orig);
    assert_eq!(fuse_features(&orig, new.clone(), &UvMask::full(4)).unwrap(), new);
    let mut bits = vec![false; 16];
    bits[5] = true;
    let fused = fuse_features(&orig, new.clone(), &UvMask::from_bits(4, bits).unwrap()).unwrap();
    for i in 0..16 {
        let src = if i == 5 { &new } else { &orig };
        assert_eq!(&fused.data()[i * 3..i * 3 + 3], &src.data()[i * 3..i * 3 + 3]);
    }
    assert!(fuse_features(&orig, new, &UvMask::empty(8)).is_err());
}

#[test]
fn unchanged_sketch_is_a_no_op() {
    let f = fixture();
    let mut s = f.session.clone();
    let sketch = s.current().sketch.clone();
    let summary = s.apply_edit(&sketch, &camera(), &f.mesh, &f.model).unwrap();
    assert!(summary.no_op);
    assert_eq!(summary.frame_mask_pixels, 0);
    assert_eq!(s.depth(), 1);
    assert_eq!(s.current_set(), f.session.current_set());
}

#[test]
fn empty_mask_reproduces_the_original_and_full_mask_the_regeneration() {
    let f = fixture();
    for i in 0..3 {
        let sc = scenario(i);
        let session = sc.session(camera(), EditConfig::default(), &f.mesh, &f.model).unwrap();
        let new = sc.edited_sketch();

        let mut zero = session.clone();
        let set = zero.apply_edit_with_mask(&new, &resample_mask_pyramid(&UvMask::empty(128), &LEVELS).unwrap(), &f.mesh, &f.model).unwrap();
        assert_eq!(set_hash(set), set_hash(session.current_set()));
        // Every fused level equals the original pyramid.
        assert_eq!(zero.current().artifacts.pyramid, session.current().artifacts.pyramid);

        let mut full = session.clone();
        let set = full.apply_edit_with_mask(&new, &resample_mask_pyramid(&UvMask::full(128), &LEVELS).unwrap(), &f.mesh, &f.model).unwrap();
        let regen = regenerate_baseline(&new, session.reference(), &f.mesh, &f.model).unwrap();
        assert_eq!(set_hash(set), set_hash(&regen));
        let (_, direct) = splathead_neural::generate_head(&new, session.reference(), &f.mesh, &f.model).unwrap();
        assert_eq!(full.current().artifacts.pyramid, direct.pyramid);
    }
}

#[test]
fn partial_mask_keeps_unmasked_texels_and_replays_masked_ones() {
    let f = fixture();
    let sc = scenario(1);
    let mut s = sc.session(camera(), EditConfig::default(), &f.mesh, &f.model).unwrap();
    let before = s.current().clone();
    let new = sc.edited_sketch();
    let summary = s.apply_edit(&new, &camera(), &f.mesh, &f.model).unwrap();
    assert!(!summary.no_op && summary.selected_gaussians > 0 && summary.final_level_texels > 0);
    let plan = before_plan(f, &sc);
    let after = s.current();

    let fin = plan.masks.final_level();
    let mut changed = 0;
    for y in 0..128 {
        for x in 0..128 {
            let (a, b) = (before.artifacts.attributes.texel(x, y), after.artifacts.attributes.texel(x, y));
            if fin.get(x, y) {
                changed += usize::from(a != b);
            } else {
                assert_eq!(a, b, "unmasked texel ({x}, {y}) changed");
            }
        }
    }
    assert!(changed > 0);

    // Layer by layer, features outside each level are the original ones.
    for (k, level) in plan.masks.levels.iter().enumerate() {
        let (o, n) = (before.artifacts.pyramid.layer(k).unwrap(), after.artifacts.pyramid.layer(k).unwrap());
        let c = o.shape()[2];
        for (i, _) in level.bits().iter().enumerate().filter(|(_, m)| !**m) {
            assert_eq!(&o.data()[i * c..(i + 1) * c], &n.data()[i * c..(i + 1) * c], "layer {k}");
        }
    }

    // Masked texels: replaying the stored fused pyramid through the stack
    // with the stored latent reproduces them.
    let stored = &after.artifacts;
    let mut replay = |k: usize, _x: Tensor| Ok(stored.pyramid.layer(k).unwrap().clone());
    let (attrs, _) = splathead_neural::synthesize_uv(
        &stored.latent,
        &stored.modulation,
        &f.model,
        &f.mesh.validity(),
        Some(&mut replay as &mut FusionHook),
    )
    .unwrap();
    for (i, _) in fin.bits().iter().enumerate().filter(|(_, m)| **m) {
        let (x, y) = (i % 128, i / 128);
        assert_eq!(attrs.texel(x, y), stored.attributes.texel(x, y));
    }

    // Fusion is not the regeneration.
    let regen = regenerate_baseline(&new, s.reference(), &f.mesh, &f.model).unwrap();
    assert_ne!(set_hash(&regen), set_hash(s.current_set()));
}

fn before_plan(f: &Fixture, sc: &Scenario) -> splathead_edit::EditPlan {
    let s = sc.session(camera(), EditConfig::default(), &f.mesh, &f.model).unwrap();
    s.plan_edit(&sc.edited_sketch(), &camera(), &f.model).unwrap()
}

#[test]
fn masked_edit_shows_from_another_view() {
    let f = fixture();
    let sc = scenario(2);
    let mut s = sc.session(camera(), EditConfig::default(), &f.mesh, &f.model).unwrap();
    let side = Camera::orbit(glam::Vec3::ZERO, 0.6, 0.2, 3.6, (256, 256)).unwrap();
    let before = rasterize(s.current_set(), &side);
    s.apply_edit(&sc.edited_sketch(), &camera(), &f.mesh, &f.model).unwrap();
    let after = rasterize(s.current_set(), &side);
    assert!(before.max_abs_diff(&after) > 0.0);
}

#[test]
fn disjoint_composites_commute() {
    let f = fixture();
    let original = f.session.current_set();
    let a = regenerate_baseline(&FaceSketch::random(1).render(256), f.session.reference(), &f.mesh, &f.model).unwrap();
    let b = regenerate_baseline(&FaceSketch::random(2).render(256), f.session.reference(), &f.mesh, &f.model).unwrap();
    let ia: Vec<usize> = (0..original.len()).step_by(7).collect();
    let ib: Vec<usize> = (3..original.len()).step_by(7).collect();
    let ab = composite_3d_baseline(&composite_3d_baseline(original, &a, &ia).unwrap(), &b, &ib).unwrap();
    let ba = composite_3d_baseline(&composite_3d_baseline(original, &b, &ib).unwrap(), &a, &ia).unwrap();
    assert_eq!(ab, ba);
    assert_eq!(composite_3d_baseline(original, &a, &[]).unwrap(), *original);
    let all: Vec<usize> = (0..original.len()).collect();
    assert_eq!(composite_3d_baseline(original, &a, &all).unwrap(), a);
    let misaligned = splathead_core::GaussianSet::unbound(a.primitives().to_vec());
    assert!(matches!(composite_3d_baseline(original, &misaligned, &ia), Err(EditError::Contract(_))));
}

#[test]
fn five_edits_then_five_undos() {
    let f = fixture();
    let cam = camera();
    let mut s = f.session.clone();
    let initial = frame_hash(&s.render(&cam));
    let original = s.current().artifacts.attributes.clone();
    let mut face = FaceSketch::random(40);
    let mut union = UvMask::empty(128);
    for edit in [SketchEdit::WidenSmile, SketchEdit::RaiseBrows, SketchEdit::LengthenNose, SketchEdit::EnlargeEyes, SketchEdit::Frown] {
        face = face.edited(edit);
        let sketch = face.render(256);
        let plan = s.plan_edit(&sketch, &cam, &f.model).unwrap();
        union = union.union(plan.masks.final_level()).unwrap();
        let summary = s.apply_edit(&sketch, &cam, &f.mesh, &f.model).unwrap();
        assert!(!summary.no_op, "{}", edit.name());
        let elapsed: Vec<u64> = summary.timings.iter().map(|t| t.elapsed_micros).collect();
        assert!(elapsed.windows(2).all(|w| w[0] <= w[1]));
    }
    assert_eq!(s.depth(), 6);
    let now = &s.current().artifacts.attributes;
    for (i, _) in union.bits().iter().enumerate().filter(|(_, m)| !**m) {
        let (x, y) = (i % 128, i / 128);
        assert_eq!(now.texel(x, y), original.texel(x, y));
    }
    for _ in 0..5 {
        assert!(s.undo());
    }
    assert!(!s.undo(), "undo at depth 1 must be a flagged no-op");
    assert_eq!(frame_hash(&s.render(&cam)), initial);
}

#[test]
fn undo_stack_is_capped() {
    let f = fixture();
    let config = EditConfig { undo_limit: 3, ..EditConfig::default() };
    let sc = scenario(0);
    let mut s = sc.session(camera(), config, &f.mesh, &f.model).unwrap();
    let mask = resample_mask_pyramid(&UvMask::full(128), &LEVELS).unwrap();
    for seed in 0..5 {
        s.apply_edit_with_mask(&FaceSketch::random(seed).render(256), &mask, &f.mesh, &f.model).unwrap();
    }
    assert_eq!(s.depth(), 3);
    assert!(s.undo() && s.undo() && !s.undo());
    assert!(sc.session(camera(), EditConfig { undo_limit: 0, ..config }, &f.mesh, &f.model).is_err());
}

#[test]
fn save_and_load_preserve_frames_and_history() {
    let f = fixture();
    let cam = camera();
    let mut s = f.session.clone();
    s.apply_edit(&FaceSketch::random(40).edited(SketchEdit::WidenMouth).render(256), &cam, &f.mesh, &f.model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session");
    s.save(&path, &f.model).unwrap();
    // Saving again over an existing directory replaces it.
    s.save(&path, &f.model).unwrap();
    let mut back = EditSession::load(&path, &f.mesh, &f.model).unwrap();
    assert_eq!(back.id(), s.id());
    assert_eq!(back.depth(), 2);
    assert_eq!(frame_hash(&back.render(&cam)), frame_hash(&s.render(&cam)));
    assert_eq!(back.current(), s.current());
    assert!(back.undo());
    assert_eq!(frame_hash(&back.render(&cam)), frame_hash(&f.session.render(&cam)));

    assert!(matches!(EditSession::load(dir.path().join("missing"), &f.mesh, &f.model), Err(EditError::Storage(_))));
    assert!(matches!(EditSession::load(&path, &f.mesh, &Model::toy(6)), Err(EditError::Storage(_))));
}
