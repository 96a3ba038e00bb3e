//! Image and state metrics for the editing harness.

use sha2::{Digest, Sha256};
use splathead_core::{GaussianSet, PixelMask, RenderedFrame, UvAttributeMap};

/// PSNR values are clipped here; identical images report this value.
pub const PSNR_CLIP_DB: f64 = 100.0;

/// PSNR over the pixels where `region` is set (all pixels when `None`), on
/// colours quantized to 8 bits as they would be displayed. `None` when the
/// region is empty.
pub fn psnr(a: &RenderedFrame, b: &RenderedFrame, region: Option<&PixelMask>) -> Option<f64> {
    assert_eq!((a.width(), a.height()), (b.width(), b.height()), "frames differ in size");
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as f64;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if region.is_some_and(|m| !m.get(x, y)) {
                continue;
            }
            let (pa, pb) = (a.pixel(x, y), b.pixel(x, y));
            for c in 0..3 {
                let d = q(pa[c]) - q(pb[c]);
                sum += d * d;
            }
            n += 3;
        }
    }
    if n == 0 {
        return None;
    }
    let mse = sum / n as f64;
    Some(if mse == 0.0 { PSNR_CLIP_DB } else { (10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CLIP_DB) })
}

/// Mean absolute change of the image gradient across the boundary of
/// `region`, relative to `reference`: for every 4-neighbour pair `(p, q)`
/// with `p` inside and `q` outside, `|(I(p) − I(q)) − (R(p) − R(q))|`
/// averaged over pairs and channels. `None` when the region has no boundary.
pub fn seam_metric(image: &RenderedFrame, reference: &RenderedFrame, region: &PixelMask) -> Option<f64> {
    let (w, h) = (image.width(), image.height());
    let mut sum = 0.0f64;
    let mut pairs = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !region.get(x, y) {
                continue;
            }
            let neighbours = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
            for (nx, ny) in neighbours {
                if nx >= w || ny >= h || region.get(nx, ny) {
                    continue;
                }
                let (ip, iq) = (image.pixel(x, y), image.pixel(nx, ny));
                let (rp, rq) = (reference.pixel(x, y), reference.pixel(nx, ny));
                for c in 0..3 {
                    sum += (((ip[c] - iq[c]) - (rp[c] - rq[c])) as f64).abs();
                }
                pairs += 1;
            }
        }
    }
    (pairs > 0).then(|| sum / (3 * pairs) as f64)
}

pub fn frame_hash(frame: &RenderedFrame) -> String {
    let mut h = Sha256::new();
    h.update((frame.width() as u64).to_le_bytes());
    h.update((frame.height() as u64).to_le_bytes());
    for v in frame.rgb().iter().chain(frame.alpha()) {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn set_hash(set: &GaussianSet) -> String {
    let mut h = Sha256::new();
    for (p, t) in set.primitives().iter().zip(set.texel_indices()) {
        let fields = p.position().to_array().into_iter().chain(p.scale().to_array()).chain(p.rotation_wxyz());
        for v in fields.chain([p.opacity()]).chain(p.color().to_array()) {
            h.update(v.to_bits().to_le_bytes());
        }
        match t {
            Some(t) => h.update([1, 0, 0, 0].iter().chain(&t.x.to_le_bytes()).chain(&t.y.to_le_bytes()).copied().collect::<Vec<u8>>()),
            None => h.update([0u8; 4]),
        }
    }
    hex::encode(h.finalize())
}

pub fn attributes_hash(map: &UvAttributeMap) -> String {
    let mut h = Sha256::new();
    for v in map.data() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}
