//! The `splathead` command line.
//!
//! Exit codes: `0` success, `1` a verification suite failed (or an
//! unexpected internal error), `2` bad usage or unreadable input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use splathead_core::ply::{load_ply, save_ply};
use splathead_core::scene::random_scene;
use splathead_core::{decode_uv_to_gaussians, frame_io, rasterize, Camera, GaussianSet, RenderedFrame, TemplateMesh};
use splathead_edit::scenario::to_json_lines;
use splathead_edit::{
    default_camera, evaluate_edit, frame_hash, run_suite, set_hash, standard_suite, EditConfig, EditSession,
    StageTiming, Strategy, StrategyReport,
};
use splathead_neural::{generate_head, ArchSpec, GenerationArtifacts, Model, ReferenceImage, SketchImage, WeightStore};
use splathead_service::{BusyPolicy, Service, ServiceConfig};
use thiserror::Error;

use crate::bench::bench_raster;
use crate::verify::{run_suite as run_checks, Suite};

const BACKGROUND: [f32; 3] = [1.0, 1.0, 1.0];

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing or unreadable inputs.
    #[error("{0}")]
    Input(String),
    /// A suite ran and found failures.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn input(context: impl std::fmt::Display) -> impl FnOnce(&dyn std::fmt::Display) -> CliError {
    move |e| CliError::Input(format!("{context}: {e}"))
}

fn failed(context: impl std::fmt::Display) -> impl FnOnce(&dyn std::fmt::Display) -> CliError {
    move |e| CliError::Failed(format!("{context}: {e}"))
}

macro_rules! ctx {
    ($expr:expr, $kind:ident, $($fmt:tt)+) => {
        $expr.map_err(|e| $kind(format!($($fmt)+))(&e))
    };
}

#[derive(Debug, Parser)]
#[command(name = "splathead", version, about = "Generate, edit, render and verify UV Gaussian heads")]
pub struct Cli {
    /// Cap the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Single worker, for bit-stable golden runs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a head from a sketch and a reference image.
    Generate(GenerateArgs),
    /// Render a head (PLY, artifact directory or session) to PNG.
    Render(RenderArgs),
    /// Apply a sketch edit to a saved session with one strategy.
    Edit(EditArgs),
    /// Run the seeded scenario suite for all strategies.
    Ablate(AblateArgs),
    /// Measure rasterizer throughput.
    Bench(BenchArgs),
    /// Run a verification suite; exits 1 on any failure.
    Verify(VerifyArgs),
    /// Export a head as 3DGS PLY.
    Export(ExportArgs),
    /// Run the HTTP/WebSocket service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Template mesh (OBJ with UVs); the built-in head when omitted.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Weight container; seeded toy weights when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed of the toy weights (ignored with --weights).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn load(&self) -> Result<(TemplateMesh, Model)> {
        let mesh = match &self.mesh {
            Some(p) => ctx!(TemplateMesh::load_obj(p), input, "mesh {}", p.display())?,
            None => TemplateMesh::default_head(),
        };
        let model = match &self.weights {
            Some(p) => {
                let w = ctx!(WeightStore::load(p), input, "weights {}", p.display())?;
                ctx!(Model::new(ArchSpec::toy(), w), input, "weights {}", p.display())?
            }
            None => Model::toy(self.seed),
        };
        ctx!(model.check_mesh(&mesh), input, "mesh does not fit the model")?;
        Ok((mesh, model))
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Side of the session camera frame.
    #[arg(long, default_value_t = 512)]
    pub frame_size: u32,
    /// Number of views in the turntable strip.
    #[arg(long, default_value_t = 8)]
    pub views: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CameraArgs {
    /// Camera as JSON (fields of the camera type), or a path to such a file.
    #[arg(long)]
    pub camera: Option<String>,
    /// Orbit azimuth in radians (without --camera).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub azimuth: f32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub elevation: f32,
    #[arg(long, default_value_t = 3.6)]
    pub distance: f32,
    /// Frame size as WxH.
    #[arg(long, default_value = "512x512", value_parser = parse_size)]
    pub size: (u32, u32),
}

impl CameraArgs {
    pub fn camera(&self) -> Result<Camera> {
        match &self.camera {
            Some(c) => parse_camera(c),
            None => ctx!(
                Camera::orbit(glam::Vec3::ZERO, self.azimuth, self.elevation, self.distance, self.size),
                input,
                "camera"
            ),
        }
    }
}

pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let w: u32 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: u32 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("frame size must be positive".into());
    }
    Ok((w, h))
}

/// Inline JSON (starting with `{`) or a path to a JSON file.
pub fn parse_camera(arg: &str) -> Result<Camera> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        ctx!(fs::read_to_string(arg), input, "camera file {arg}")?
    };
    ctx!(serde_json::from_str(&text), input, "camera")
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "source")]
pub struct SourceArgs {
    /// A 3DGS PLY file.
    #[arg(long, group = "source")]
    pub ply: Option<PathBuf>,
    /// A generation artifact directory.
    #[arg(long, group = "source")]
    pub artifacts: Option<PathBuf>,
    /// A saved session directory (its current state).
    #[arg(long, group = "source")]
    pub session: Option<PathBuf>,
}

impl SourceArgs {
    fn load(&self, model: &ModelArgs) -> Result<GaussianSet> {
        if let Some(p) = &self.ply {
            return ctx!(load_ply(p), input, "{}", p.display());
        }
        let (mesh, m) = model.load()?;
        if let Some(p) = &self.artifacts {
            let (art, _) = ctx!(GenerationArtifacts::load_dir(p), input, "{}", p.display())?;
            return ctx!(decode_uv_to_gaussians(&art.attributes, &mesh), input, "{}", p.display());
        }
        let p = self.session.as_ref().expect("clap requires one source");
        let s = ctx!(EditSession::load(p, &mesh, &m), input, "{}", p.display())?;
        Ok(s.current_set().clone())
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub camera: CameraArgs,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the raw float frame here.
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long)]
    pub sketch: PathBuf,
    /// Camera JSON (inline or file); the session camera when omitted.
    #[arg(long)]
    pub camera: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "fusion")]
    pub strategy: String,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Screen-space dilation of the sketch difference, in sketch pixels.
    #[arg(long)]
    pub dilation_radius: Option<usize>,
    /// Dilation of the scattered UV mask, in texels.
    #[arg(long)]
    pub uv_dilation: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 512)]
    pub frame_size: u32,
    /// JSON-lines report; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Random scene size (ignored with --head).
    #[arg(long, default_value_t = 13216)]
    pub gaussians: usize,
    /// Bench a generated head on an orbit instead of a random scene.
    #[arg(long)]
    pub head: bool,
    #[arg(long, default_value = "512x512", value_parser = parse_size)]
    pub resolution: (u32, u32),
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = |s: &str| s.parse::<Suite>())]
    pub suite: Suite,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Listen address; `SPLATHEAD_LISTEN` or 127.0.0.1:8087 by default.
    #[arg(long)]
    pub listen: Option<std::net::SocketAddr>,
    #[arg(long)]
    pub session_dir: Option<PathBuf>,
    #[arg(long)]
    pub capacity: Option<usize>,
    #[arg(long)]
    pub frame_size: Option<u32>,
    /// Queue concurrent edits on one session instead of answering busy.
    #[arg(long)]
    pub queue_edits: bool,
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists (e.g. when run twice in-process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Render(a) => render(a),
        Command::Edit(a) => edit(a),
        Command::Ablate(a) => ablate(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => serve(a, threads),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    ctx!(fs::write(path, text + "\n"), failed, "{}", path.display())
}

fn save_png(frame: &RenderedFrame, path: &Path) -> Result<()> {
    ctx!(frame_io::save_png(frame, path, BACKGROUND), failed, "{}", path.display())
}

/// Views side by side on a common orbit.
pub fn turntable(set: &GaussianSet, views: usize, size: u32) -> Result<RenderedFrame> {
    let views = views.max(1);
    let (s, w) = (size as usize, size as usize * views);
    let mut rgb = vec![0.0; w * s * 3];
    let mut alpha = vec![0.0; w * s];
    for v in 0..views {
        let az = std::f32::consts::TAU * v as f32 / views as f32;
        let cam = ctx!(Camera::orbit(glam::Vec3::ZERO, az, 0.0, 3.6, (size, size)), failed, "turntable camera")?;
        let f = rasterize(set, &cam);
        for y in 0..s {
            for x in 0..s {
                let (src, dst) = (y * s + x, y * w + v * s + x);
                rgb[dst * 3..dst * 3 + 3].copy_from_slice(&f.rgb()[src * 3..src * 3 + 3]);
                alpha[dst] = f.alpha()[src];
            }
        }
    }
    ctx!(RenderedFrame::from_parts(w, s, rgb, alpha), failed, "turntable")
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    sketch: String,
    reference: String,
    mesh: Option<String>,
    weights: Option<String>,
    seed: u64,
    frame_size: u32,
    arch_fingerprint: String,
    weights_fingerprint: String,
    gaussians: usize,
    set_hash: String,
    frame_hash: String,
}

fn generate(a: GenerateArgs) -> Result<()> {
    let (mesh, model) = a.model.load()?;
    let sketch = ctx!(SketchImage::load(&a.sketch), input, "sketch {}", a.sketch.display())?;
    let reference = ctx!(ReferenceImage::load(&a.reference), input, "reference {}", a.reference.display())?;
    let t = Instant::now();
    let (set, artifacts) = ctx!(generate_head(&sketch, &reference, &mesh, &model), input, "generation")?;
    let gen_ms = t.elapsed().as_secs_f64() * 1e3;

    ctx!(fs::create_dir_all(&a.out), input, "{}", a.out.display())?;
    ctx!(artifacts.save_dir(a.out.join("artifacts"), &model), failed, "artifacts")?;
    let camera = default_camera(a.frame_size);
    let id = a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "session".into());
    let session = ctx!(
        EditSession::create(id, sketch, reference, camera, EditConfig::default(), &mesh, &model),
        failed,
        "session"
    )?;
    ctx!(session.save(a.out.join("session"), &model), failed, "session")?;
    ctx!(save_ply(&set, a.out.join("head.ply")), failed, "head.ply")?;
    let front = rasterize(&set, &camera);
    save_png(&front, &a.out.join("front.png"))?;
    save_png(&turntable(&set, a.views, 256)?, &a.out.join("turntable.png"))?;
    let manifest = RunManifest {
        command: "generate",
        sketch: a.sketch.display().to_string(),
        reference: a.reference.display().to_string(),
        mesh: a.model.mesh.as_ref().map(|p| p.display().to_string()),
        weights: a.model.weights.as_ref().map(|p| p.display().to_string()),
        seed: a.model.seed,
        frame_size: a.frame_size,
        arch_fingerprint: model.arch().fingerprint(),
        weights_fingerprint: model.weights().fingerprint(),
        gaussians: set.len(),
        set_hash: set_hash(&set),
        frame_hash: frame_hash(&front),
    };
    write_json(&a.out.join("run.json"), &manifest)?;
    println!("{} gaussians in {gen_ms:.1} ms -> {}", set.len(), a.out.display());
    println!("set {}  frame {}", manifest.set_hash, manifest.frame_hash);
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let set = a.source.load(&a.model)?;
    let camera = a.camera.camera()?;
    let frame = rasterize(&set, &camera);
    save_png(&frame, &a.out)?;
    if let Some(raw) = &a.raw {
        ctx!(frame_io::save_raw(&frame, raw), failed, "{}", raw.display())?;
    }
    println!("{}x{} frame {} -> {}", frame.width(), frame.height(), frame_hash(&frame), a.out.display());
    Ok(())
}

/// One line of the `edit` report: the strategy's scores plus the reference
/// frame hash and, for fusion, per-stage timings.
#[derive(Debug, Serialize)]
pub struct EditReportLine {
    #[serde(flatten)]
    pub report: StrategyReport,
    pub original_frame_hash: String,
    pub stage_timings: Vec<StageTiming>,
}

fn edit(a: EditArgs) -> Result<()> {
    let strategy: Strategy = a.strategy.parse().map_err(CliError::Input)?;
    let (mesh, model) = a.model.load()?;
    let mut session = ctx!(EditSession::load(&a.session, &mesh, &model), input, "session {}", a.session.display())?;
    let sketch = ctx!(SketchImage::load(&a.sketch), input, "sketch {}", a.sketch.display())?;
    let camera = match &a.camera {
        Some(c) => parse_camera(c)?,
        None => *session.camera(),
    };
    if a.dilation_radius.is_some() || a.uv_dilation.is_some() {
        let mut config = *session.config();
        config.dilation_radius = a.dilation_radius.unwrap_or(config.dilation_radius);
        config.uv_dilation = a.uv_dilation.unwrap_or(config.uv_dilation);
        session = session.with_config(config).map_err(|e| CliError::Input(e.to_string()))?;
    }
    let label = a.sketch.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let run = ctx!(evaluate_edit(&session, &sketch, &camera, &mesh, &model, a.model.seed, &label), input, "edit")?;

    ctx!(fs::create_dir_all(&a.out), input, "{}", a.out.display())?;
    let (_, set, frame) = run.result(strategy);
    save_png(&run.original_frame, &a.out.join("before.png"))?;
    save_png(frame, &a.out.join("after.png"))?;
    ctx!(save_ply(set, a.out.join("result.ply")), failed, "result.ply")?;
    if strategy == Strategy::Fusion {
        ctx!(run.fused.save(a.out.join("session"), &model), failed, "session")?;
    }
    let line = EditReportLine {
        report: run.report(strategy).clone(),
        original_frame_hash: frame_hash(&run.original_frame),
        stage_timings: if strategy == Strategy::Fusion { run.summary.timings.clone() } else { Vec::new() },
    };
    let text = serde_json::to_string(&line).expect("report serializes") + "\n";
    ctx!(fs::write(a.out.join("report.jsonl"), &text), failed, "report")?;
    print!("{text}");
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let (mesh, model) = a.model.load()?;
    let reports = ctx!(
        run_suite(&standard_suite(), &default_camera(a.frame_size), EditConfig::default(), &mesh, &model),
        failed,
        "scenario suite"
    )?;
    let lines = to_json_lines(&reports).expect("reports serialize");
    match &a.out {
        Some(p) => ctx!(fs::write(p, &lines), failed, "{}", p.display())?,
        None => print!("{lines}"),
    }
    let d = crate::ablation_summary(&reports);
    eprintln!(
        "seam: fusion <= composite in {}/{}; unedited PSNR: fusion > regen in {}/{}",
        d.seam_wins, d.scenarios, d.psnr_wins, d.scenarios
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let size = a.resolution;
    let report = if a.head {
        let mesh = TemplateMesh::default_head();
        let model = Model::toy(a.seed);
        let sketch = splathead_neural::FaceSketch::random(a.seed).render(256);
        let reference = splathead_neural::synthetic_reference(a.seed, 256);
        let (set, _) = ctx!(generate_head(&sketch, &reference, &mesh, &model), failed, "generation")?;
        bench_raster(&set, a.frames, |i| {
            Camera::orbit(glam::Vec3::ZERO, 0.05 * i as f32, 0.0, 3.6, size).expect("valid orbit")
        })
    } else {
        let camera = ctx!(
            Camera::new(glam::Vec3::new(0.0, 0.0, 5.0), glam::Vec3::ZERO, glam::Vec3::Y, 0.8, size, 0.1, 50.0),
            input,
            "camera"
        )?;
        let set = random_scene(a.seed, a.gaussians, &camera);
        bench_raster(&set, a.frames, |_| camera)
    };
    if a.json {
        println!("{}", serde_json::to_string(&report).expect("report serializes"));
    } else {
        println!(
            "{} gaussians ({:.0} visible) at {}x{}: {:.1} FPS, {:.0} us/frame (project {:.0}, bin {:.0}, composite {:.0})",
            report.gaussians,
            report.mean_visible,
            report.width,
            report.height,
            report.fps,
            report.mean_frame_us,
            report.mean_project_us,
            report.mean_bin_us,
            report.mean_composite_us
        );
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<()> {
    let outcomes = run_checks(a.suite, |o| {
        println!("{} {:<32} {:>8.1} ms  {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.micros as f64 / 1e3, o.detail);
    });
    let failures = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} suite: {} passed, {failures} failed", a.suite.name(), outcomes.len() - failures);
    if failures > 0 {
        return Err(CliError::Failed(format!("{failures} check(s) failed")));
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let set = a.source.load(&a.model)?;
    ctx!(save_ply(&set, &a.out), failed, "{}", a.out.display())?;
    println!("{} gaussians -> {} (set {})", set.len(), a.out.display(), set_hash(&set));
    Ok(())
}

fn serve(a: ServeArgs, threads: Option<usize>) -> Result<()> {
    let mut config = ServiceConfig::from_env().map_err(CliError::Input)?;
    if let Some(l) = a.listen {
        config.listen = l;
    }
    if a.session_dir.is_some() {
        config.session_dir = a.session_dir.clone();
    }
    if let Some(c) = a.capacity {
        config.capacity = c;
    }
    if let Some(f) = a.frame_size {
        config.frame_size = f;
    }
    if a.queue_edits {
        config.busy_policy = BusyPolicy::Queue;
    }
    let (mesh, model) = a.model.load()?;
    let listen = config.listen;
    let service = Service::new(config, model, mesh).map_err(|e| CliError::Input(e.to_string()))?;
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        rt.worker_threads(n);
    }
    let rt = ctx!(rt.enable_all().build(), failed, "runtime")?;
    println!("listening on http://{listen}");
    ctx!(rt.block_on(splathead_service::serve(service)), input, "serve on {listen}")
}
