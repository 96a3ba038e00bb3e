//! Self-check suites run by `splathead verify`.
//!
//! * [`Suite::Oracle`] compares optimized code paths against slow,
//!   independently written references on seeded inputs.
//! * [`Suite::Invariants`] checks structural properties of every stage, from
//!   covariance construction to session persistence.
//!
//! Every check is deterministic; a failure reports the worst offending value.

use std::time::Instant;

use glam::{Quat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splathead_core::scene::random_scene;
use splathead_core::{
    build_covariance, frame_io, rasterize, rasterize_reference, record_contributions, Camera, GaussianSet, PixelMask,
    TemplateMesh,
};
use splathead_edit::mask::UvMask;
use splathead_edit::{default_camera, frame_hash, resample_mask_pyramid, set_hash, EditConfig, EditSession, Scenario};
use splathead_neural::blocks::attend;
use splathead_neural::{adain, generate_head, synthetic_reference, ChannelStats, FaceSketch, Model, SketchEdit, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Oracle,
    Invariants,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::Invariants => "invariants",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(Suite::Oracle),
            "invariants" => Ok(Suite::Invariants),
            other => Err(format!("unknown suite '{other}' (expected oracle or invariants)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub micros: u64,
}

type Check = fn() -> Result<String, String>;

fn checks(suite: Suite) -> Vec<(&'static str, Check)> {
    match suite {
        Suite::Oracle => vec![
            ("raster_vs_reference", check_raster_oracle as Check),
            ("influence_replay", check_influence_replay),
            ("raw_frame_round_trip", check_raw_round_trip),
        ],
        Suite::Invariants => vec![
            ("covariance_psd", check_covariance as Check),
            ("transmittance_telescoping", check_transmittance),
            ("barycentric_partition_of_unity", check_barycentric),
            ("adain_statistics", check_adain),
            ("softmax_normalization", check_softmax),
            ("mask_pyramid_superset", check_mask_pyramid),
            ("determinism_hashes", check_determinism),
            ("fusion_exterior_exact", check_fusion_exterior),
            ("session_round_trip", check_session_round_trip),
        ],
    }
}

/// Names of the checks in a suite, in run order.
pub fn check_names(suite: Suite) -> Vec<&'static str> {
    checks(suite).into_iter().map(|(n, _)| n).collect()
}

/// Runs every check of `suite`, calling `progress` after each.
pub fn run_suite(suite: Suite, mut progress: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    checks(suite)
        .into_iter()
        .map(|(name, check)| {
            let t = Instant::now();
            let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
            let outcome = CheckOutcome {
                name,
                passed: result.is_ok(),
                detail: result.unwrap_or_else(|e| e),
                micros: t.elapsed().as_micros() as u64,
            };
            progress(&outcome);
            outcome
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Result of [`raster_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStats {
    pub scenes: usize,
    pub max_abs_diff: f32,
    pub worst_seed: u64,
    pub seconds: f64,
}

/// Gaussian count used for oracle scene `seed`: spread over `[100, max]`.
pub fn oracle_scene_size(seed: u64, max: usize) -> usize {
    100 + (seed as usize * 997) % (max - 99)
}

/// Tiled SIMD rasterizer against the per-pixel scalar reference on `scenes`
/// seeded random scenes of up to `max_gaussians` splats at `size`².
pub fn raster_oracle(scenes: u64, max_gaussians: usize, size: u32) -> OracleStats {
    let t = Instant::now();
    let mut stats = OracleStats { scenes: scenes as usize, max_abs_diff: 0.0, worst_seed: 0, seconds: 0.0 };
    for seed in 0..scenes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let camera = Camera::orbit(
            Vec3::ZERO,
            rng.random_range(-3.0..3.0),
            rng.random_range(-0.6..0.6),
            rng.random_range(3.0..8.0),
            (size, size),
        )
        .expect("valid orbit");
        let set = random_scene(seed, oracle_scene_size(seed, max_gaussians), &camera);
        let d = rasterize(&set, &camera).max_abs_diff(&rasterize_reference(&set, &camera));
        if d > stats.max_abs_diff {
            stats.max_abs_diff = d;
            stats.worst_seed = seed;
        }
    }
    stats.seconds = t.elapsed().as_secs_f64();
    stats
}

fn check_raster_oracle() -> Result<String, String> {
    let s = raster_oracle(50, 5000, 128);
    let msg = format!("{} scenes, max |Δ| {:.2e} (seed {}), {:.1} s", s.scenes, s.max_abs_diff, s.worst_seed, s.seconds);
    ensure(s.max_abs_diff <= 1e-5, || msg.clone())?;
    Ok(msg)
}

/// A seeded screen mask: a disk plus scattered pixels.
pub fn random_pixel_mask(seed: u64, w: usize, h: usize) -> PixelMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (rng.random_range(0..w) as i64, rng.random_range(0..h) as i64);
    let r = rng.random_range(2..w.max(6) / 2) as i64;
    let density = rng.random_range(0.01..0.2);
    PixelMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as i64 - cx, y as i64 - cy);
        dx * dx + dy * dy <= r * r || rng.random_bool(density)
    })
}

/// Sums `α·T` per Gaussian by replaying the contribution log with a running
/// transmittance product.
pub fn replay_weights(set: &GaussianSet, camera: &Camera, mask: &PixelMask) -> Vec<f64> {
    let mut w = vec![0.0; set.len()];
    for px in record_contributions(set, camera, mask).expect("mask matches camera").pixels {
        let mut t = 1.0f64;
        for c in px.entries {
            w[c.gaussian as usize] += c.alpha as f64 * t;
            t *= 1.0 - c.alpha as f64;
        }
    }
    w
}

/// Worst `|w − replay|` over `scenes` seeded scenes with random masks.
pub fn influence_replay(scenes: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..scenes {
        let camera = Camera::orbit(Vec3::ZERO, 0.3 * seed as f32, 0.1, 5.0, (96, 96)).expect("valid orbit");
        let set = random_scene(seed + 500, 800, &camera);
        let mask = random_pixel_mask(seed + 900, 96, 96);
        let inf = splathead_edit::compute_influence_weights(&set, &camera, &mask).expect("mask matches camera");
        let oracle = replay_weights(&set, &camera, &mask);
        worst = inf.weights.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    worst
}

fn check_influence_replay() -> Result<String, String> {
    let worst = influence_replay(20);
    let msg = format!("20 scenes, max |Δw| {worst:.2e}");
    ensure(worst <= 1e-5, || msg.clone())?;
    Ok(msg)
}

fn check_raw_round_trip() -> Result<String, String> {
    let camera = Camera::orbit(Vec3::ZERO, 0.4, 0.2, 5.0, (77, 53)).map_err(err)?;
    let frame = rasterize(&random_scene(3, 1500, &camera), &camera);
    let back = frame_io::decode_raw(&frame_io::encode_raw(&frame)).map_err(err)?;
    ensure(back == frame, || "raw dump does not round-trip".into())?;
    Ok("77x53 frame bit-identical".into())
}

fn random_quat(rng: &mut ChaCha8Rng) -> [f32; 4] {
    let q: [f32; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0f32));
    let n = q.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-3);
    q.map(|v| v / n)
}

/// Σ must be symmetric with eigenvectors the rotated axes and eigenvalues
/// the squared scales.
fn check_covariance() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f32;
    for _ in 0..2000 {
        let scale = Vec3::new(rng.random_range(0.01..1.0), rng.random_range(0.01..1.0), rng.random_range(0.01..1.0));
        let q = random_quat(&mut rng);
        let sigma = build_covariance(scale, q).map_err(err)?;
        let rot = Quat::from_xyzw(q[1], q[2], q[3], q[0]).normalize();
        let norm = scale.max_element().powi(2);
        for (i, s) in scale.to_array().into_iter().enumerate() {
            let axis = rot * Vec3::AXES[i];
            worst = worst.max((sigma * axis - s * s * axis).length() / norm);
        }
        let t = sigma.transpose();
        worst = worst.max((0..3).map(|c| (sigma.col(c) - t.col(c)).abs().max_element()).fold(0.0, f32::max) / norm);
    }
    ensure(worst <= 1e-5, || format!("relative eigen/symmetry error {worst:.2e}"))?;
    Ok(format!("2000 covariances, relative error {worst:.2e}"))
}

fn check_transmittance() -> Result<String, String> {
    let mut worst_step = 0.0f64;
    let mut worst_alpha = 0.0f64;
    for seed in 0..8u64 {
        let camera = Camera::orbit(Vec3::ZERO, seed as f32, 0.0, 5.0, (64, 64)).map_err(err)?;
        let set = random_scene(seed, 1500, &camera);
        let frame = rasterize(&set, &camera);
        for px in record_contributions(&set, &camera, &PixelMask::full(64, 64)).map_err(err)?.pixels {
            let mut t = 1.0f64;
            let mut sum = 0.0f64;
            for c in &px.entries {
                ensure((0.0..1.0).contains(&c.alpha), || format!("alpha {} out of range", c.alpha))?;
                worst_step = worst_step.max((c.transmittance as f64 - t).abs());
                sum += c.alpha as f64 * t;
                t *= 1.0 - c.alpha as f64;
            }
            let a = frame.alpha_at(px.x, px.y) as f64;
            worst_alpha = worst_alpha.max((a - (1.0 - t)).abs()).max((a - sum).abs());
        }
    }
    ensure(worst_step <= 1e-5 && worst_alpha <= 1e-5, || {
        format!("transmittance step error {worst_step:.2e}, alpha error {worst_alpha:.2e}")
    })?;
    Ok(format!("8 scenes, step error {worst_step:.2e}, 1 − ΠT vs alpha {worst_alpha:.2e}"))
}

fn check_barycentric() -> Result<String, String> {
    let mesh = TemplateMesh::default_head();
    let mut worst = 0.0f32;
    let mut n = 0;
    for (_, b) in mesh.valid_texels() {
        n += 1;
        let [u, v, w] = b.barycentric;
        ensure(u >= -1e-6 && v >= -1e-6 && w >= -1e-6, || format!("negative barycentric {:?}", b.barycentric))?;
        worst = worst.max((u + v + w - 1.0).abs());
    }
    ensure(worst <= 1e-5, || format!("barycentric sums off by {worst:.2e}"))?;
    Ok(format!("{n} texels, |Σλ − 1| ≤ {worst:.2e}"))
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, spread: f32) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-spread..spread)).collect()).expect("shape matches data")
}

fn check_adain() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f32;
    for _ in 0..20 {
        let (h, w, c) = (rng.random_range(2..16), rng.random_range(2..16), rng.random_range(1..8));
        let x = random_tensor(&mut rng, vec![h, w, c], 3.0);
        let style = ChannelStats {
            mean: (0..c).map(|_| rng.random_range(-2.0..2.0)).collect(),
            std: (0..c).map(|_| rng.random_range(0.1..3.0)).collect(),
        };
        let y = adain(&x, &style, None).map_err(err)?;
        // Independent per-channel statistics in f64.
        for k in 0..c {
            let vals: Vec<f64> = y.data().iter().skip(k).step_by(c).map(|v| *v as f64).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            worst = worst.max((mean as f32 - style.mean[k]).abs()).max((std as f32 - style.std[k]).abs() / style.std[k]);
        }
    }
    ensure(worst <= 1e-3, || format!("statistics off by {worst:.2e}"))?;
    Ok(format!("20 maps, worst deviation {worst:.2e}"))
}

fn check_softmax() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f32;
    for _ in 0..20 {
        let heads = rng.random_range(1..4);
        let d = heads * rng.random_range(1..6);
        let (n, m) = (rng.random_range(1..12), rng.random_range(1..20));
        let q = random_tensor(&mut rng, vec![n, d], 4.0);
        let k = random_tensor(&mut rng, vec![m, d], 4.0);
        let v = random_tensor(&mut rng, vec![m, d], 1.0);
        let (_, probs) = attend(&q, &k, &v, heads).map_err(err)?;
        for r in 0..probs.rows() {
            let row = probs.row(r);
            ensure(row.iter().all(|p| *p >= 0.0), || "negative attention probability".into())?;
            worst = worst.max((row.iter().sum::<f32>() - 1.0).abs());
        }
    }
    ensure(worst <= 1e-5, || format!("rows sum off by {worst:.2e}"))?;
    Ok(format!("20 attention maps, |Σp − 1| ≤ {worst:.2e}"))
}

fn check_mask_pyramid() -> Result<String, String> {
    let levels = [4, 8, 16, 32, 64, 128];
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let density = rng.random_range(0.0..0.02);
        let base = UvMask::from_bits(128, (0..128 * 128).map(|_| rng.random_bool(density)).collect()).map_err(err)?;
        let p = resample_mask_pyramid(&base, &levels).map_err(err)?;
        for level in &p.levels {
            let r = level.resolution();
            for (i, _) in base.bits().iter().enumerate().filter(|(_, b)| **b) {
                let (x, y) = (i % 128, i / 128);
                ensure(level.get(x * r / 128, y * r / 128), || format!("seed {seed}: level {r} misses ({x}, {y})"))?;
            }
            // Pooling never invents coverage: each set cell has a set texel.
            let f = 128 / r;
            for cy in 0..r {
                for cx in 0..r {
                    let any = (0..f).any(|dy| (0..f).any(|dx| base.get(cx * f + dx, cy * f + dy)));
                    ensure(level.get(cx, cy) == any, || format!("seed {seed}: level {r} cell ({cx}, {cy})"))?;
                }
            }
        }
    }
    Ok("30 random masks over 6 levels".into())
}

fn check_determinism() -> Result<String, String> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let sketch = FaceSketch::random(17).render(256);
    let reference = synthetic_reference(17, 256);
    let (a, art_a) = generate_head(&sketch, &reference, &mesh, &model).map_err(err)?;
    let (b, art_b) = generate_head(&sketch, &reference, &mesh, &model).map_err(err)?;
    ensure(set_hash(&a) == set_hash(&b) && art_a == art_b, || "generation is not deterministic".into())?;
    let camera = default_camera(256);
    let f1 = frame_hash(&rasterize(&a, &camera));
    let f2 = frame_hash(&rasterize(&a, &camera));
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(err)?;
    let f3 = single.install(|| frame_hash(&rasterize(&a, &camera)));
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().map_err(err)?;
    let f4 = wide.install(|| frame_hash(&rasterize(&a, &camera)));
    ensure(f1 == f2 && f2 == f3 && f3 == f4, || "frame hash depends on the run or the thread count".into())?;
    Ok(format!("set {}…, frame {}… across 1 and 4 workers", &set_hash(&a)[..12], &f1[..12]))
}

fn check_fusion_exterior() -> Result<String, String> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let camera = default_camera(256);
    let mut changed_total = 0;
    for (i, edit) in SketchEdit::ALL.into_iter().enumerate().take(4) {
        let scenario = Scenario { seed: 300 + i as u64, edit };
        let mut session = scenario.session(camera, EditConfig::default(), &mesh, &model).map_err(err)?;
        let plan = session.plan_edit(&scenario.edited_sketch(), &camera, &model).map_err(err)?;
        let before = session.current().artifacts.attributes.clone();
        session.apply_edit(&scenario.edited_sketch(), &camera, &mesh, &model).map_err(err)?;
        let after = &session.current().artifacts.attributes;
        let fin = plan.masks.final_level();
        for y in 0..128 {
            for x in 0..128 {
                if fin.get(x, y) {
                    changed_total += usize::from(before.texel(x, y) != after.texel(x, y));
                } else {
                    ensure(before.texel(x, y) == after.texel(x, y), || format!("{}: texel ({x}, {y}) changed", edit.name()))?;
                }
            }
        }
    }
    ensure(changed_total > 0, || "no edit changed anything".into())?;
    Ok(format!("4 edits, {changed_total} masked texels changed, none outside"))
}

fn scratch_dir(tag: &str) -> std::path::PathBuf {
    let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    std::env::temp_dir().join(format!("splathead-verify-{tag}-{}-{nanos}", std::process::id()))
}

fn check_session_round_trip() -> Result<String, String> {
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let camera = default_camera(192);
    let scenario = Scenario { seed: 77, edit: SketchEdit::WidenMouth };
    let mut session = scenario.session(camera, EditConfig::default(), &mesh, &model).map_err(err)?;
    let initial = frame_hash(&session.render(&camera));
    session.apply_edit(&scenario.edited_sketch(), &camera, &mesh, &model).map_err(err)?;
    let edited = frame_hash(&session.render(&camera));

    let dir = scratch_dir("session");
    let result = (|| {
        session.save(&dir, &model).map_err(err)?;
        let mut back = EditSession::load(&dir, &mesh, &model).map_err(err)?;
        ensure(frame_hash(&back.render(&camera)) == edited, || "loaded frame differs".into())?;
        ensure(back.current() == session.current(), || "loaded snapshot differs".into())?;
        ensure(back.undo() && frame_hash(&back.render(&camera)) == initial, || "undo after load differs".into())?;
        Ok(format!("frame {}… preserved, undo restores {}…", &edited[..12], &initial[..12]))
    })();
    let _ = std::fs::remove_dir_all(&dir);
    result
}
