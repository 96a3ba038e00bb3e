//! Tile-binned front-to-back alpha compositing of projected Gaussians.
//!
//! Per pixel, `C = Σ cᵢ αᵢ Πⱼ<ᵢ (1 - αⱼ)` over splats sorted by view depth,
//! ties broken by ascending Gaussian index. [`rasterize_reference`] evaluates
//! the same sum without tiles or early termination and is the oracle for
//! [`rasterize`].

use std::time::Instant;

use rayon::prelude::*;
use wide::bytemuck::cast;
use wide::{f32x8, u32x8};

use crate::camera::{project_gaussian, Camera, ProjectedSplat, KERNEL_CUTOFF};
use crate::error::{CoreError, Result};
use crate::gaussian::GaussianSet;

pub const TILE_SIZE: usize = 16;
/// Compositing stops once transmittance falls below this value; the omitted
/// tail contributes at most this much to any channel.
pub const TERMINATION_THRESHOLD: f32 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    width: usize,
    height: usize,
    rgb: Vec<f32>,
    alpha: Vec<f32>,
}

impl RenderedFrame {
    pub fn transparent(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![0.0; width * height * 3],
            alpha: vec![0.0; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, rgb: Vec<f32>, alpha: Vec<f32>) -> Result<Self> {
        if rgb.len() != width * height * 3 || alpha.len() != width * height {
            return Err(CoreError::Dimension(format!("frame buffers do not match {width}x{height}")));
        }
        Ok(Self {
            width,
            height,
            rgb,
            alpha,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved RGB, row-major.
    pub fn rgb(&self) -> &[f32] {
        &self.rgb
    }

    pub fn alpha(&self) -> &[f32] {
        &self.alpha
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn alpha_at(&self, x: usize, y: usize) -> f32 {
        self.alpha[y * self.width + x]
    }

    /// Largest per-channel absolute difference (rgb and alpha).
    pub fn max_abs_diff(&self, other: &RenderedFrame) -> f32 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.rgb
            .iter()
            .zip(&other.rgb)
            .chain(self.alpha.iter().zip(&other.alpha))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Screen-space boolean mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % w, i / w))
    }
}

/// One composited splat at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub gaussian: u32,
    pub alpha: f32,
    /// Transmittance before this splat was composited.
    pub transmittance: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelContributions {
    pub x: usize,
    pub y: usize,
    pub entries: Vec<Contribution>,
}

/// The exact `(αᵢ(p), Tᵢ(p))` sequences the rasterizer composited, for a set
/// of pixels, in row-major pixel order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContributionLog {
    pub pixels: Vec<PixelContributions>,
}

impl ContributionLog {
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.pixels.iter().map(|p| p.entries.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RasterStats {
    pub visible: usize,
    pub tile_entries: usize,
    pub project_us: u64,
    pub bin_us: u64,
    pub composite_us: u64,
}

/// Projected splats in compositing order, binned to tiles.
struct Prepared {
    splats: Vec<(u32, ProjectedSplat)>,
    /// Per tile, positions into `splats`, ascending (hence depth-ordered).
    tiles: Vec<Vec<u32>>,
    tiles_x: usize,
}

/// Depth-sorted list of visible splats; ties broken by Gaussian index.
fn project_sorted(set: &GaussianSet, camera: &Camera) -> Vec<(u32, ProjectedSplat)> {
    let mut splats: Vec<(u32, ProjectedSplat)> = set
        .primitives()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| project_gaussian(camera, p).map(|s| (i as u32, s)))
        .collect();
    splats.sort_by(|(ia, a), (ib, b)| a.depth.total_cmp(&b.depth).then(ia.cmp(ib)));
    splats
}

fn prepare(set: &GaussianSet, camera: &Camera, stats: &mut RasterStats) -> Prepared {
    let t0 = Instant::now();
    let splats = project_sorted(set, camera);
    stats.project_us = t0.elapsed().as_micros() as u64;
    let t1 = Instant::now();
    let (w, h) = (camera.width(), camera.height());
    let tiles_x = w.div_ceil(TILE_SIZE);
    let tiles_y = h.div_ceil(TILE_SIZE);
    let mut tiles: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (pos, (_, s)) in splats.iter().enumerate() {
        let (rx, ry) = extent(s);
        let x0 = ((s.mean.x - rx).floor().max(0.0) as usize) / TILE_SIZE;
        let y0 = ((s.mean.y - ry).floor().max(0.0) as usize) / TILE_SIZE;
        let x1 = (((s.mean.x + rx).ceil().max(0.0) as usize) / TILE_SIZE).min(tiles_x - 1);
        let y1 = (((s.mean.y + ry).ceil().max(0.0) as usize) / TILE_SIZE).min(tiles_y - 1);
        for ty in y0..=y1.min(tiles_y - 1) {
            for tx in x0.min(tiles_x - 1)..=x1 {
                tiles[ty * tiles_x + tx].push(pos as u32);
            }
        }
    }
    stats.visible = splats.len();
    stats.tile_entries = tiles.iter().map(Vec::len).sum();
    stats.bin_us = t1.elapsed().as_micros() as u64;
    Prepared { splats, tiles, tiles_x }
}

/// Half-widths of the axis-aligned box around a splat's cutoff ellipse
/// (`k·sqrt(Σxx)`, `k·sqrt(Σyy)`), padded by half a pixel so f32 rounding
/// never drops a pixel the exact cutoff test accepts.
#[inline]
fn extent(s: &ProjectedSplat) -> (f32, f32) {
    (
        KERNEL_CUTOFF * s.covariance[0].sqrt() + 0.5,
        KERNEL_CUTOFF * s.covariance[2].sqrt() + 0.5,
    )
}

/// Compact per-tile copy of the splat fields touched in the inner loop.
#[derive(Clone, Copy)]
struct TileSplat {
    mx: f32,
    my: f32,
    a: f32,
    b: f32,
    c: f32,
    opacity: f32,
    color: [f32; 3],
    pos: u32,
    rx: f32,
    ry: f32,
}

/// Composites one pixel. `visit(pos, alpha, transmittance_before)` sees each
/// splat in compositing order.
#[inline(always)]
fn composite_pixel(
    list: &[TileSplat],
    px: f32,
    py: f32,
    mut visit: impl FnMut(u32, f32, f32),
) -> ([f32; 3], f32) {
    const CUTOFF_SQ: f32 = KERNEL_CUTOFF * KERNEL_CUTOFF;
    let mut color = [0.0f32; 3];
    let mut t = 1.0f32;
    for s in list {
        if (px - s.mx).abs() > s.rx || (py - s.my).abs() > s.ry {
            continue;
        }
        let dx = px - s.mx;
        let dy = py - s.my;
        let m = s.a * dx * dx + 2.0 * s.b * dx * dy + s.c * dy * dy;
        if m > CUTOFF_SQ {
            continue;
        }
        let alpha = s.opacity * exp_neg(-0.5 * m);
        visit(s.pos, alpha, t);
        let w = alpha * t;
        color[0] += s.color[0] * w;
        color[1] += s.color[1] * w;
        color[2] += s.color[2] * w;
        t *= 1.0 - alpha;
        if t < TERMINATION_THRESHOLD {
            break;
        }
    }
    (color, 1.0 - t)
}

/// Splat-major compositing of one tile. Each pixel sees exactly the
/// operation sequence of [`composite_pixel`] — rejected or finished pixels
/// receive `alpha = 0`, which leaves color and transmittance bit-unchanged —
/// so results are bit-identical. Returns RGBA per tile pixel.
fn composite_tile(list: &[TileSplat], x0: usize, y0: usize, w: usize, h: usize) -> Vec<f32> {
    type Rows = [[f32; TILE_SIZE]; TILE_SIZE];
    let tw = TILE_SIZE.min(w - x0);
    let th = TILE_SIZE.min(h - y0);
    let mut red: Rows = [[0.0; TILE_SIZE]; TILE_SIZE];
    let mut green: Rows = [[0.0; TILE_SIZE]; TILE_SIZE];
    let mut blue: Rows = [[0.0; TILE_SIZE]; TILE_SIZE];
    let mut trans: Rows = [[1.0; TILE_SIZE]; TILE_SIZE];
    // 1.0 while a pixel is still accumulating, 0.0 once it terminated.
    let mut live: Rows = [[1.0; TILE_SIZE]; TILE_SIZE];
    let mut px = [0.0f32; TILE_SIZE];
    for (lx, p) in px.iter_mut().enumerate() {
        *p = (x0 + lx) as f32 + 0.5;
    }
    for (k, s) in list.iter().enumerate() {
        // Conservative row range; the exact per-row test below decides.
        let ly0 = ((s.my - s.ry - y0 as f32 - 1.5).ceil().max(0.0) as usize).min(th);
        let ly1 = ((s.my + s.ry - y0 as f32 + 0.5).floor() as isize + 1).clamp(0, th as isize) as usize;
        for ly in ly0..ly1 {
            let py = (y0 + ly) as f32 + 0.5;
            if (py - s.my).abs() > s.ry {
                continue;
            }
            let dy = py - s.my;
            composite_row(s, dy, &px, &mut red[ly], &mut green[ly], &mut blue[ly], &mut trans[ly], &mut live[ly]);
        }
        if k % 32 == 31 && live[..th].iter().all(|row| row[..tw].iter().all(|l| *l == 0.0)) {
            break;
        }
    }
    let mut buf = vec![0.0f32; TILE_SIZE * TILE_SIZE * 4];
    for ly in 0..TILE_SIZE {
        for lx in 0..TILE_SIZE {
            let o = (ly * TILE_SIZE + lx) * 4;
            buf[o] = red[ly][lx];
            buf[o + 1] = green[ly][lx];
            buf[o + 2] = blue[ly][lx];
            buf[o + 3] = 1.0 - trans[ly][lx];
        }
    }
    buf
}

type Lane = [f32; TILE_SIZE];

/// One splat over one tile row, eight pixels per vector. Every lane performs
/// the same IEEE operations, in the same order, as [`composite_pixel`].
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn composite_row(
    s: &TileSplat,
    dy: f32,
    px: &Lane,
    red: &mut Lane,
    green: &mut Lane,
    blue: &mut Lane,
    trans: &mut Lane,
    live: &mut Lane,
) {
    const CUTOFF_SQ: f32 = KERNEL_CUTOFF * KERNEL_CUTOFF;
    let mx = f32x8::splat(s.mx);
    let cutoff = f32x8::splat(CUTOFF_SQ);
    let dyv = f32x8::splat(dy);
    // Row-constant part of the quadratic form, evaluated per lane exactly
    // like the scalar expression `a·dx·dx + 2·b·dx·dy + c·dy·dy`.
    let a = f32x8::splat(s.a);
    let b2 = f32x8::splat(2.0 * s.b);
    let cyy = f32x8::splat(s.c * dy * dy);
    for chunk in 0..TILE_SIZE / 8 {
        let r = chunk * 8..chunk * 8 + 8;
        // Chunks wholly outside the splat's box would receive alpha = 0.
        if px[r.start] - s.mx > s.rx || s.mx - px[r.end - 1] > s.rx {
            continue;
        }
        let load = |lane: &Lane| f32x8::new(lane[r.clone()].try_into().expect("8 lanes"));
        let dx = load(px) - mx;
        let m = a * dx * dx + b2 * dx * dyv + cyy;
        let inside = dx.abs().simd_le(f32x8::splat(s.rx)) & m.simd_le(cutoff);
        let e = exp_neg_x8(f32x8::splat(-0.5) * m.min(cutoff));
        let alpha = inside & (f32x8::splat(s.opacity) * e * load(live));
        let t = load(trans);
        let wgt = alpha * t;
        let store = |lane: &mut Lane, v: f32x8| lane[r.clone()].copy_from_slice(&v.to_array());
        store(red, load(red) + f32x8::splat(s.color[0]) * wgt);
        store(green, load(green) + f32x8::splat(s.color[1]) * wgt);
        store(blue, load(blue) + f32x8::splat(s.color[2]) * wgt);
        let t = t * (f32x8::ONE - alpha);
        store(trans, t);
        let still = t.simd_ge(f32x8::splat(TERMINATION_THRESHOLD));
        store(live, still & load(live));
    }
}

// Shared by both forms of `exp_neg`.
const LOG2E: f32 = std::f32::consts::LOG2_E;
const LN2: f32 = std::f32::consts::LN_2;
// Adding 1.5·2^23 rounds to an integer held in the low mantissa bits.
const SHIFTER: f32 = 12_582_912.0;
const C: [f32; 6] = [1.0 / 720.0, 1.0 / 120.0, 1.0 / 24.0, 1.0 / 6.0, 0.5, 1.0];

/// `exp(x)` for `x` in `[-4.5, 0]` (the kernel cutoff range): reduction to
/// `2^n · e^r` with `|r| ≤ ln2/2` and a degree-6 Taylor polynomial; relative
/// error below 2e-7. Shared by every compositing path that must agree
/// bit-for-bit with the vector form [`exp_neg_x8`].
#[inline(always)]
fn exp_neg(x: f32) -> f32 {
    let shifted = x * LOG2E + SHIFTER;
    let n = shifted - SHIFTER;
    let r = x - n * LN2;
    let mut p = C[0];
    for c in &C[1..] {
        p = p * r + c;
    }
    let p = p * r + 1.0;
    let exponent = shifted.to_bits().wrapping_sub(SHIFTER.to_bits()).wrapping_add(127) << 23;
    p * f32::from_bits(exponent)
}

#[inline(always)]
fn exp_neg_x8(x: f32x8) -> f32x8 {
    let shifter = f32x8::splat(SHIFTER);
    let shifted = x * f32x8::splat(LOG2E) + shifter;
    let n = shifted - shifter;
    let r = x - n * f32x8::splat(LN2);
    let mut p = f32x8::splat(C[0]);
    for c in &C[1..] {
        p = p * r + f32x8::splat(*c);
    }
    let p = p * r + f32x8::ONE;
    let bits: u32x8 = cast(shifted);
    let exponent = (bits - u32x8::splat(SHIFTER.to_bits()) + u32x8::splat(127)) << 23;
    p * cast::<u32x8, f32x8>(exponent)
}

fn tile_splats(prepared: &Prepared, tile: usize) -> Vec<TileSplat> {
    prepared.tiles[tile]
        .iter()
        .map(|&pos| {
            let s = &prepared.splats[pos as usize].1;
            let (rx, ry) = extent(s);
            TileSplat {
                rx,
                ry,
                mx: s.mean.x,
                my: s.mean.y,
                a: s.conic[0],
                b: s.conic[1],
                c: s.conic[2],
                opacity: s.opacity,
                color: s.color,
                pos,
            }
        })
        .collect()
}

/// Renders `set` with the tile-based compositor.
pub fn rasterize(set: &GaussianSet, camera: &Camera) -> RenderedFrame {
    rasterize_with_stats(set, camera).0
}

pub fn rasterize_with_stats(set: &GaussianSet, camera: &Camera) -> (RenderedFrame, RasterStats) {
    let mut stats = RasterStats::default();
    let (w, h) = (camera.width(), camera.height());
    if set.is_empty() {
        return (RenderedFrame::transparent(w, h), stats);
    }
    let prepared = prepare(set, camera, &mut stats);
    let t0 = Instant::now();
    let tiles_x = prepared.tiles_x;
    let tile_buffers: Vec<(usize, Vec<f32>)> = (0..prepared.tiles.len())
        .into_par_iter()
        .filter(|&t| !prepared.tiles[t].is_empty())
        .map(|tile| {
            let list = tile_splats(&prepared, tile);
            let (tx, ty) = (tile % tiles_x, tile / tiles_x);
            (tile, composite_tile(&list, tx * TILE_SIZE, ty * TILE_SIZE, w, h))
        })
        .collect();
    let mut frame = RenderedFrame::transparent(w, h);
    for (tile, buf) in tile_buffers {
        let (tx, ty) = (tile % tiles_x, tile / tiles_x);
        for ly in 0..TILE_SIZE {
            let y = ty * TILE_SIZE + ly;
            if y >= h {
                break;
            }
            for lx in 0..TILE_SIZE {
                let x = tx * TILE_SIZE + lx;
                if x >= w {
                    break;
                }
                let o = (ly * TILE_SIZE + lx) * 4;
                let p = y * w + x;
                frame.rgb[p * 3..p * 3 + 3].copy_from_slice(&buf[o..o + 3]);
                frame.alpha[p] = buf[o + 3];
            }
        }
    }
    stats.composite_us = t0.elapsed().as_micros() as u64;
    (frame, stats)
}

/// Brute-force compositor: global depth sort, every splat tested at every
/// pixel, no early termination, 64-bit accumulation.
pub fn rasterize_reference(set: &GaussianSet, camera: &Camera) -> RenderedFrame {
    let (w, h) = (camera.width(), camera.height());
    let splats = project_sorted(set, camera);
    // Exact axis-aligned extent of each cutoff ellipse: |dx| ≤ k·sqrt(Σxx).
    let extents: Vec<(f32, f32)> = splats
        .iter()
        .map(|(_, s)| {
            (
                KERNEL_CUTOFF * s.covariance[0].sqrt() + 0.5,
                KERNEL_CUTOFF * s.covariance[2].sqrt() + 0.5,
            )
        })
        .collect();
    let mut frame = RenderedFrame::transparent(w, h);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            let mut color = [0.0f64; 3];
            let mut t = 1.0f64;
            for ((_, s), &(ex, ey)) in splats.iter().zip(&extents) {
                if (px - s.mean.x).abs() > ex || (py - s.mean.y).abs() > ey {
                    continue;
                }
                let Some(alpha) = s.alpha_at(px, py) else {
                    continue;
                };
                let alpha = alpha as f64;
                for (acc, c) in color.iter_mut().zip(s.color) {
                    *acc += c as f64 * alpha * t;
                }
                t *= 1.0 - alpha;
            }
            let p = y * w + x;
            for (dst, c) in frame.rgb[p * 3..p * 3 + 3].iter_mut().zip(color) {
                *dst = c as f32;
            }
            frame.alpha[p] = (1.0 - t) as f32;
        }
    }
    frame
}

/// Replays the tiled compositor on masked pixels and logs every composited
/// splat with its alpha and the transmittance in front of it.
pub fn record_contributions(set: &GaussianSet, camera: &Camera, pixels: &PixelMask) -> Result<ContributionLog> {
    let (w, h) = (camera.width(), camera.height());
    if (pixels.width(), pixels.height()) != (w, h) {
        return Err(CoreError::Dimension(format!(
            "mask {}x{} does not match camera {w}x{h}",
            pixels.width(),
            pixels.height()
        )));
    }
    if pixels.is_empty() || set.is_empty() {
        return Ok(ContributionLog::default());
    }
    let mut stats = RasterStats::default();
    let prepared = prepare(set, camera, &mut stats);
    let tiles_x = prepared.tiles_x;
    let mut cache: Vec<Option<Vec<TileSplat>>> = vec![None; prepared.tiles.len()];
    let mut log = ContributionLog::default();
    for (x, y) in pixels.iter_set() {
        let tile = (y / TILE_SIZE) * tiles_x + x / TILE_SIZE;
        let list = cache[tile].get_or_insert_with(|| tile_splats(&prepared, tile));
        let mut entries = Vec::new();
        composite_pixel(list, x as f32 + 0.5, y as f32 + 0.5, |pos, alpha, transmittance| {
            entries.push(Contribution {
                gaussian: prepared.splats[pos as usize].0,
                alpha,
                transmittance,
            })
        });
        log.pixels.push(PixelContributions { x, y, entries });
    }
    Ok(log)
}
