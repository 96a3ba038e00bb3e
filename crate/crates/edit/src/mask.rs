//! Screen-space sketch masks and UV-space mask pyramids.

use splathead_core::{GaussianSet, PixelMask};
use splathead_neural::SketchImage;

use crate::error::{EditError, Result};

/// Offsets of the discrete disk `dx² + dy² ≤ r²`.
fn disk(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Morphological dilation of a row-major `width × height` grid by a disk.
pub fn dilate(bits: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return bits.to_vec();
    }
    let offsets = disk(radius);
    let mut out = vec![false; bits.len()];
    for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
        let (x, y) = ((i % width) as isize, (i / width) as isize);
        for &(dx, dy) in &offsets {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
                out[ny as usize * width + nx as usize] = true;
            }
        }
    }
    out
}

/// Pixels where the binarized sketches disagree, dilated by a disk of
/// `dilation_radius` pixels.
pub fn diff_sketches(old: &SketchImage, new: &SketchImage, dilation_radius: usize) -> Result<PixelMask> {
    let res = old.resolution();
    if new.resolution() != res {
        return Err(EditError::Dimension(format!("sketches are {res}² and {}²", new.resolution())));
    }
    let changed: Vec<bool> = old.ink().iter().zip(new.ink()).map(|(a, b)| *a != b).collect();
    let bits = dilate(&changed, res, res, dilation_radius);
    Ok(PixelMask::from_fn(res, res, |x, y| bits[y * res + x]))
}

/// Nearest-neighbour resize; output pixel centres sample the source pixel
/// they fall into.
pub fn resize_mask(mask: &PixelMask, width: usize, height: usize) -> PixelMask {
    let (sw, sh) = (mask.width(), mask.height());
    if (sw, sh) == (width, height) {
        return mask.clone();
    }
    PixelMask::from_fn(width, height, |x, y| {
        let sx = ((2 * x + 1) * sw / (2 * width)).min(sw - 1);
        let sy = ((2 * y + 1) * sh / (2 * height)).min(sh - 1);
        mask.get(sx, sy)
    })
}

/// Square boolean grid over the UV atlas, row-major with `(x, y)` matching
/// texel indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UvMask {
    resolution: usize,
    bits: Vec<bool>,
}

impl UvMask {
    pub fn empty(resolution: usize) -> Self {
        Self { resolution, bits: vec![false; resolution * resolution] }
    }

    pub fn full(resolution: usize) -> Self {
        Self { resolution, bits: vec![true; resolution * resolution] }
    }

    pub fn from_bits(resolution: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != resolution * resolution {
            return Err(EditError::Dimension(format!("{} mask bits for {resolution}²", bits.len())));
        }
        Ok(Self { resolution, bits })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.resolution + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn union(&self, other: &UvMask) -> Result<UvMask> {
        if other.resolution != self.resolution {
            return Err(EditError::Dimension("mask resolutions differ".into()));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(UvMask { resolution: self.resolution, bits })
    }

    /// Any-true pooling to a coarser grid, or nearest-neighbour upsampling to
    /// a finer one. Resolutions must divide one another.
    pub fn resample(&self, resolution: usize) -> Result<UvMask> {
        let base = self.resolution;
        if resolution == 0 || (resolution <= base && !base.is_multiple_of(resolution)) || (resolution > base && !resolution.is_multiple_of(base))
        {
            return Err(EditError::Dimension(format!("cannot resample a {base}² mask to {resolution}²")));
        }
        let mut bits = vec![false; resolution * resolution];
        if resolution <= base {
            let f = base / resolution;
            for (i, _) in self.bits.iter().enumerate().filter(|(_, b)| **b) {
                let (x, y) = (i % base / f, i / base / f);
                bits[y * resolution + x] = true;
            }
        } else {
            let f = resolution / base;
            for (i, b) in bits.iter_mut().enumerate() {
                *b = self.get(i % resolution / f, i / resolution / f);
            }
        }
        Ok(UvMask { resolution, bits })
    }
}

/// Base UV mask plus one resampled level per synthesis layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UvMaskPyramid {
    pub base: UvMask,
    pub levels: Vec<UvMask>,
}

impl UvMaskPyramid {
    pub fn resolutions(&self) -> Vec<usize> {
        self.levels.iter().map(UvMask::resolution).collect()
    }

    pub fn level(&self, k: usize) -> Option<&UvMask> {
        self.levels.get(k)
    }

    /// The level with the highest resolution; it decides the final attributes.
    pub fn final_level(&self) -> &UvMask {
        self.levels.last().unwrap_or(&self.base)
    }
}

pub fn resample_mask_pyramid(base: &UvMask, layer_resolutions: &[usize]) -> Result<UvMaskPyramid> {
    let levels = layer_resolutions.iter().map(|&r| base.resample(r)).collect::<Result<_>>()?;
    Ok(UvMaskPyramid { base: base.clone(), levels })
}

/// Marks the texels bound to the selected Gaussians, then dilates by a disk
/// of `uv_dilation` texels.
pub fn build_uv_mask(indices: &[usize], set: &GaussianSet, base_resolution: usize, uv_dilation: usize) -> Result<UvMask> {
    if !indices.is_empty() && set.uv_resolution() != Some(base_resolution as u32) {
        return Err(EditError::Contract(format!(
            "set is bound at {:?}, mask requested at {base_resolution}",
            set.uv_resolution()
        )));
    }
    let mut bits = vec![false; base_resolution * base_resolution];
    for &i in indices {
        let t = set
            .texel_of(i)
            .ok_or_else(|| EditError::Contract(format!("gaussian {i} is not bound to a texel")))?;
        bits[t.linear(base_resolution as u32)] = true;
    }
    UvMask::from_bits(base_resolution, dilate(&bits, base_resolution, base_resolution, uv_dilation))
}
