//! Rasterizer throughput measurement.

use std::time::Instant;

use serde::Serialize;
use splathead_core::{rasterize_with_stats, Camera, GaussianSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchReport {
    pub gaussians: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub fps: f64,
    pub mean_frame_us: f64,
    pub mean_project_us: f64,
    pub mean_bin_us: f64,
    pub mean_composite_us: f64,
    pub mean_visible: f64,
}

/// Renders `frames` frames, the `i`-th from `camera_at(i)`, after one
/// untimed warm-up frame.
pub fn bench_raster(set: &GaussianSet, frames: usize, camera_at: impl Fn(usize) -> Camera) -> BenchReport {
    let frames = frames.max(1);
    let first = camera_at(0);
    let _ = rasterize_with_stats(set, &first);
    let (mut project, mut bin, mut composite, mut visible) = (0u64, 0u64, 0u64, 0usize);
    let t = Instant::now();
    for i in 0..frames {
        let (_, s) = rasterize_with_stats(set, &camera_at(i));
        project += s.project_us;
        bin += s.bin_us;
        composite += s.composite_us;
        visible += s.visible;
    }
    let seconds = t.elapsed().as_secs_f64();
    let n = frames as f64;
    BenchReport {
        gaussians: set.len(),
        width: first.width(),
        height: first.height(),
        frames,
        fps: n / seconds.max(1e-9),
        mean_frame_us: seconds * 1e6 / n,
        mean_project_us: project as f64 / n,
        mean_bin_us: bin as f64 / n,
        mean_composite_us: composite as f64 / n,
        mean_visible: visible as f64 / n,
    }
}
