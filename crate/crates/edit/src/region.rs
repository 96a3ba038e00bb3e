//! Screen regions reached by a subset of Gaussians.

use splathead_core::{record_contributions, Camera, GaussianSet, PixelMask};

use crate::error::Result;

const BAND_ROWS: usize = 64;

/// Pixels at which at least one flagged Gaussian was composited. The log is
/// replayed in horizontal bands to bound memory.
pub fn touched_pixels(set: &GaussianSet, camera: &Camera, flagged: &[bool]) -> Result<PixelMask> {
    let (w, h) = (camera.width(), camera.height());
    let mut out = PixelMask::new(w, h);
    for y0 in (0..h).step_by(BAND_ROWS) {
        let band = PixelMask::from_fn(w, h, |_, y| (y0..y0 + BAND_ROWS).contains(&y));
        for p in record_contributions(set, camera, &band)?.pixels {
            if p.entries.iter().any(|c| flagged[c.gaussian as usize]) {
                out.set(p.x, p.y, true);
            }
        }
    }
    Ok(out)
}

/// Flags the Gaussians bound to texels set in a row-major texel grid.
pub fn flag_texels(set: &GaussianSet, texels: &[bool]) -> Vec<bool> {
    let res = set.uv_resolution().unwrap_or(0);
    (0..set.len())
        .map(|i| set.texel_of(i).is_some_and(|t| texels[t.linear(res)]))
        .collect()
}
