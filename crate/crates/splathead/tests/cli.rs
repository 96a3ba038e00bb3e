use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use splathead::core::{frame_io, rasterize, TemplateMesh};
use splathead::edit::{default_camera, EditSession};
use splathead::neural::{synthetic_reference, FaceSketch, Model, SketchEdit};

fn splathead(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splathead")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Inputs {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Inputs {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// Sketches, reference and one generated head shared by the tests.
fn inputs() -> &'static Inputs {
    static I: OnceLock<Inputs> = OnceLock::new();
    I.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let face = FaceSketch::random(31);
        std::fs::write(root.join("sketch.png"), face.render(256).to_png()).unwrap();
        std::fs::write(root.join("edited.png"), face.edited(SketchEdit::WidenSmile).render(256).to_png()).unwrap();
        std::fs::write(root.join("reference.png"), synthetic_reference(31, 256).to_png()).unwrap();
        let out = splathead(&[
            "generate",
            "--sketch",
            p(&root.join("sketch.png")),
            "--reference",
            p(&root.join("reference.png")),
            "--frame-size",
            "256",
            "--out",
            p(&root.join("gen")),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        Inputs { _dir: dir, root }
    })
}

fn generate(seed: &str, out: &Path) -> Output {
    let i = inputs();
    splathead(&[
        "generate",
        "--sketch",
        p(&i.path("sketch.png")),
        "--reference",
        p(&i.path("reference.png")),
        "--seed",
        seed,
        "--frame-size",
        "256",
        "--views",
        "4",
        "--out",
        p(out),
    ])
}

#[test]
fn generate_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&generate("3", &a)), 0);
    assert_eq!(code(&generate("3", &b)), 0);
    assert_eq!(code(&generate("4", &c)), 0);
    for f in ["artifacts/manifest.json", "session/session.json", "head.ply", "front.png", "turntable.png", "run.json"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    let read = |d: &Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read(&a, "artifacts/manifest.json"), read(&b, "artifacts/manifest.json"));
    let run = |d: &Path| serde_json::from_str::<Value>(&read(d, "run.json")).unwrap();
    let (ra, rb, rc) = (run(&a), run(&b), run(&c));
    assert_eq!(ra["set_hash"], rb["set_hash"]);
    assert_eq!(ra["seed"], 3);
    assert_ne!(ra["weights_fingerprint"], rc["weights_fingerprint"]);
    assert_ne!(ra["set_hash"], rc["set_hash"]);

    let strip = image_size(&a.join("turntable.png"));
    assert_eq!(strip, (4 * 256, 256));
}

fn image_size(path: &Path) -> (u32, u32) {
    // PNG IHDR: width and height are the big-endian words at offsets 16 and 20.
    let b = std::fs::read(path).unwrap();
    let word = |o: usize| u32::from_be_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
    (word(16), word(20))
}

#[test]
fn missing_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = splathead(&[
        "generate",
        "--sketch",
        "/no/such/sketch.png",
        "--reference",
        p(&inputs().path("reference.png")),
        "--out",
        p(&dir.path().join("x")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/sketch.png"));
    assert_eq!(code(&splathead(&["render", "--ply", "/no/such.ply", "--out", p(&dir.path().join("x.png"))])), 2);
    assert_eq!(code(&splathead(&["frobnicate"])), 2);
    assert_eq!(code(&splathead(&["verify", "--suite", "everything"])), 2);
    assert_eq!(code(&splathead(&["bench", "--resolution", "12"])), 2);
}

#[test]
fn edit_rejects_an_unknown_strategy() {
    let i = inputs();
    let dir = tempfile::tempdir().unwrap();
    let out = splathead(&[
        "edit",
        "--session",
        p(&i.path("gen/session")),
        "--sketch",
        p(&i.path("edited.png")),
        "--strategy",
        "magic",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown strategy"));
}

fn edit(sketch: &str, strategy: &str, out: &Path) -> Value {
    let i = inputs();
    let o = splathead(&[
        "edit",
        "--session",
        p(&i.path("gen/session")),
        "--sketch",
        p(&i.path(sketch)),
        "--strategy",
        strategy,
        "--out",
        p(out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("report.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1);
    serde_json::from_str(text.trim()).unwrap()
}

#[test]
fn unchanged_sketch_reports_an_empty_mask() {
    let dir = tempfile::tempdir().unwrap();
    let r = edit("sketch.png", "fusion", dir.path());
    assert_eq!(r["frame_mask_pixels"], 0);
    assert_eq!(r["selected_gaussians"], 0);
    assert_eq!(r["frame_hash"], r["original_frame_hash"]);
    assert_eq!(r["strategy"], "fusion");
}

#[test]
fn fusion_keeps_unedited_pixels_that_regeneration_changes() {
    let dir = tempfile::tempdir().unwrap();
    let fusion = edit("edited.png", "fusion", &dir.path().join("fusion"));
    let regen = edit("edited.png", "regen", &dir.path().join("regen"));
    let composite = edit("edited.png", "composite", &dir.path().join("composite"));
    assert!(fusion["frame_mask_pixels"].as_u64().unwrap() > 0);
    let psnr = |v: &Value| v["unedited_psnr"].as_f64().unwrap();
    assert!(psnr(&fusion) > psnr(&regen), "{} vs {}", psnr(&fusion), psnr(&regen));
    assert!(fusion["seam"].as_f64().is_some() && composite["seam"].as_f64().is_some());
    let stages: Vec<&str> = fusion["stage_timings"].as_array().unwrap().iter().map(|t| t["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["diff", "influence", "uv_mask", "condition", "fuse_decode"]);

    // The fused session written by the CLI holds the edit on top of the
    // original state.
    let mesh = TemplateMesh::default_head();
    let model = Model::toy(0);
    let mut s = EditSession::load(dir.path().join("fusion/session"), &mesh, &model).unwrap();
    assert_eq!(s.depth(), 2);
    assert_eq!(fusion["set_hash"], splathead::edit::set_hash(s.current_set()));
    assert!(s.undo());
}

/// A PLY exported by the CLI and rendered offline by the CLI matches the
/// session's own frame.
#[test]
fn offline_render_of_the_export_matches_the_session_frame() {
    let i = inputs();
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("head.ply");
    let out = splathead(&["export", "--session", p(&i.path("gen/session")), "--out", p(&ply)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let camera = default_camera(256);
    let cam_json = serde_json::to_string(&camera).unwrap();
    let raw = dir.path().join("frame.raw");
    let out = splathead(&[
        "render",
        "--ply",
        p(&ply),
        "--camera",
        &cam_json,
        "--out",
        p(&dir.path().join("frame.png")),
        "--raw",
        p(&raw),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let offline = frame_io::decode_raw(&std::fs::read(&raw).unwrap()).unwrap();

    let session = EditSession::load(i.path("gen/session"), &TemplateMesh::default_head(), &Model::toy(0)).unwrap();
    let live = rasterize(session.current_set(), &camera);
    // The PLY stores log-scales and logit opacities, so reloading is exact
    // only up to float rounding.
    let diff = live.max_abs_diff(&offline);
    assert!(diff <= 1e-4, "max |Δ| {diff:e}");
    assert_eq!(frame_io::to_rgb8(&live, [1.0; 3]), frame_io::to_rgb8(&offline, [1.0; 3]));
}

#[test]
fn render_accepts_artifacts_and_orbit_flags() {
    let i = inputs();
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("side.png");
    let out = splathead(&[
        "render",
        "--artifacts",
        p(&i.path("gen/artifacts")),
        "--azimuth",
        "-0.8",
        "--size",
        "96x64",
        "--out",
        p(&png),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(image_size(&png), (96, 64));
}

#[test]
fn bench_on_an_empty_scene_is_finite() {
    let out = splathead(&["bench", "--gaussians", "0", "--resolution", "64x64", "--frames", "5", "--json"]);
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["fps"].as_f64().unwrap().is_finite() && r["fps"].as_f64().unwrap() > 0.0);
    assert_eq!(r["mean_composite_us"], 0.0);
    assert_eq!(r["gaussians"], 0);
}

#[test]
fn verify_oracle_suite_passes() {
    let out = splathead(&["--deterministic", "verify", "--suite", "oracle"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("PASS raster_vs_reference")));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let i = inputs();
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = splathead(&[
            "--threads",
            threads,
            "generate",
            "--sketch",
            p(&i.path("sketch.png")),
            "--reference",
            p(&i.path("reference.png")),
            "--views",
            "1",
            "--frame-size",
            "64",
            "--out",
            p(out),
        ]);
        assert_eq!(code(&o), 0);
    }
    let run = |d: &Path| serde_json::from_str::<Value>(&std::fs::read_to_string(d.join("run.json")).unwrap()).unwrap();
    assert_eq!(run(&a)["frame_hash"], run(&b)["frame_hash"]);
    assert_eq!(run(&a)["set_hash"], run(&b)["set_hash"]);
    assert_eq!(code(&splathead(&["--threads", "0", "bench", "--frames", "1"])), 2);
}
