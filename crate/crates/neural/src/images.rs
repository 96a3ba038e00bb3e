//! Input rasters for the generator: near-binary sketches and RGB references
//! at the fixed input resolution, PNG decoding at the boundary, and seeded
//! synthetic inputs for tests and demos.

use std::f32::consts::PI;
use std::path::Path;

use image::imageops::FilterType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{NeuralError, Result};
use crate::tensor::Tensor;

pub const INPUT_RESOLUTION: usize = 256;

/// Luminance below this is ink.
pub const SKETCH_THRESHOLD: f32 = 0.5;

fn luminance(rgb: &[f32]) -> f32 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Square RGB raster with values in `[0, 1]`, stored row-major HWC.
#[derive(Debug, Clone, PartialEq)]
pub struct InputImage {
    resolution: usize,
    data: Vec<f32>,
}

impl InputImage {
    pub fn new(resolution: usize, data: Vec<f32>) -> Result<Self> {
        if resolution == 0 || data.len() != resolution * resolution * 3 {
            return Err(NeuralError::Input(format!("{} values for a {resolution}² RGB image", data.len())));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(NeuralError::Input(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { resolution, data })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.resolution + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.resolution, self.resolution, 3], self.data.clone()).expect("consistent shape")
    }

    /// Decodes any PNG (or other format the `image` crate sniffs) and resamples
    /// it bilinearly to `resolution`².
    pub fn decode(bytes: &[u8], resolution: usize) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| NeuralError::Input(format!("undecodable image: {e}")))?;
        let rgb = img.to_rgb32f();
        let resized = if rgb.width() as usize == resolution && rgb.height() as usize == resolution {
            rgb
        } else {
            image::imageops::resize(&rgb, resolution as u32, resolution as u32, FilterType::Triangle)
        };
        let data = resized.into_raw().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(resolution, data)
    }

    pub fn to_png(&self) -> Vec<u8> {
        let bytes: Vec<u8> = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        let img = image::RgbImage::from_raw(self.resolution as u32, self.resolution as u32, bytes).expect("buffer size");
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG encoding");
        out.into_inner()
    }
}

/// Line drawing: white paper, black ink, binarized at [`SKETCH_THRESHOLD`].
#[derive(Debug, Clone, PartialEq)]
pub struct SketchImage(InputImage);

impl SketchImage {
    /// Binarizes an RGB raster.
    pub fn from_image(image: InputImage) -> Self {
        let res = image.resolution;
        let mut data = image.data;
        for px in data.chunks_exact_mut(3) {
            let v = if luminance(px) < SKETCH_THRESHOLD { 0.0 } else { 1.0 };
            px.fill(v);
        }
        Self(InputImage { resolution: res, data })
    }

    /// Builds a sketch from an ink mask (`true` = stroke).
    pub fn from_ink(resolution: usize, ink: &[bool]) -> Result<Self> {
        if ink.len() != resolution * resolution {
            return Err(NeuralError::Input(format!("{} ink values for {resolution}²", ink.len())));
        }
        let data = ink.iter().flat_map(|&i| [if i { 0.0 } else { 1.0 }; 3]).collect();
        Ok(Self(InputImage::new(resolution, data)?))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        Ok(Self::from_image(InputImage::decode(bytes, INPUT_RESOLUTION)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn image(&self) -> &InputImage {
        &self.0
    }

    pub fn resolution(&self) -> usize {
        self.0.resolution
    }

    /// Ink mask, row-major.
    pub fn ink(&self) -> Vec<bool> {
        self.0.data.chunks_exact(3).map(|px| luminance(px) < SKETCH_THRESHOLD).collect()
    }

    pub fn to_png(&self) -> Vec<u8> {
        self.0.to_png()
    }
}

/// RGB appearance reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceImage(InputImage);

impl ReferenceImage {
    pub fn new(image: InputImage) -> Self {
        Self(image)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        Ok(Self(InputImage::decode(bytes, INPUT_RESOLUTION)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn image(&self) -> &InputImage {
        &self.0
    }

    pub fn resolution(&self) -> usize {
        self.0.resolution
    }

    pub fn to_png(&self) -> Vec<u8> {
        self.0.to_png()
    }
}

/// Hard-edged stroke canvas in normalized `[0, 1]²` coordinates.
struct Canvas {
    res: usize,
    ink: Vec<bool>,
}

impl Canvas {
    fn new(res: usize) -> Self {
        Self { res, ink: vec![false; res * res] }
    }

    fn stamp(&mut self, cx: f32, cy: f32, radius: f32) {
        let (px, py) = (cx * self.res as f32, cy * self.res as f32);
        let r = radius.ceil() as i64 + 1;
        for y in (py as i64 - r)..=(py as i64 + r) {
            for x in (px as i64 - r)..=(px as i64 + r) {
                if x < 0 || y < 0 || x >= self.res as i64 || y >= self.res as i64 {
                    continue;
                }
                let (dx, dy) = (x as f32 + 0.5 - px, y as f32 + 0.5 - py);
                if dx * dx + dy * dy <= radius * radius {
                    self.ink[y as usize * self.res + x as usize] = true;
                }
            }
        }
    }

    fn polyline(&mut self, pts: &[(f32, f32)], radius: f32) {
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt() * self.res as f32;
            let steps = (len * 2.0).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f32 / steps as f32;
                self.stamp(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), radius);
            }
        }
    }

    /// Elliptical arc from angle `a0` to `a1` (radians, y down).
    fn arc(&mut self, c: (f32, f32), r: (f32, f32), a0: f32, a1: f32, radius: f32) {
        let n = 48;
        let pts: Vec<_> = (0..=n)
            .map(|i| {
                let a = a0 + (a1 - a0) * i as f32 / n as f32;
                (c.0 + r.0 * a.cos(), c.1 + r.1 * a.sin())
            })
            .collect();
        self.polyline(&pts, radius);
    }
}

/// Parametric frontal face line drawing. Coordinates are normalized to the
/// canvas; the face is centred at `(0.5, 0.52)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSketch {
    pub face_width: f32,
    pub face_height: f32,
    pub eye_y: f32,
    pub eye_spacing: f32,
    pub eye_size: f32,
    pub brow_lift: f32,
    pub brow_tilt: f32,
    pub nose_length: f32,
    pub mouth_y: f32,
    pub mouth_width: f32,
    pub smile: f32,
    pub hairline: f32,
    pub stroke_radius: f32,
}

impl Default for FaceSketch {
    fn default() -> Self {
        Self {
            face_width: 0.30,
            face_height: 0.38,
            eye_y: 0.46,
            eye_spacing: 0.11,
            eye_size: 0.035,
            brow_lift: 0.045,
            brow_tilt: 0.0,
            nose_length: 0.10,
            mouth_y: 0.70,
            mouth_width: 0.09,
            smile: 0.02,
            hairline: 0.25,
            stroke_radius: 1.2,
        }
    }
}

/// Local sketch edits used by the scenario suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchEdit {
    WidenSmile,
    Frown,
    RaiseBrows,
    TiltBrows,
    EnlargeEyes,
    LengthenNose,
    WidenMouth,
    LowerHairline,
    NarrowEyes,
    ShiftMouth,
}

impl SketchEdit {
    pub const ALL: [SketchEdit; 10] = [
        Self::WidenSmile,
        Self::Frown,
        Self::RaiseBrows,
        Self::TiltBrows,
        Self::EnlargeEyes,
        Self::LengthenNose,
        Self::WidenMouth,
        Self::LowerHairline,
        Self::NarrowEyes,
        Self::ShiftMouth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::WidenSmile => "widen_smile",
            Self::Frown => "frown",
            Self::RaiseBrows => "raise_brows",
            Self::TiltBrows => "tilt_brows",
            Self::EnlargeEyes => "enlarge_eyes",
            Self::LengthenNose => "lengthen_nose",
            Self::WidenMouth => "widen_mouth",
            Self::LowerHairline => "lower_hairline",
            Self::NarrowEyes => "narrow_eyes",
            Self::ShiftMouth => "shift_mouth",
        }
    }
}

impl FaceSketch {
    /// Seeded jitter around the default proportions.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = |v: f32, spread: f32| v + rng.random_range(-spread..=spread);
        let d = Self::default();
        Self {
            face_width: j(d.face_width, 0.03),
            face_height: j(d.face_height, 0.03),
            eye_y: j(d.eye_y, 0.015),
            eye_spacing: j(d.eye_spacing, 0.012),
            eye_size: j(d.eye_size, 0.008),
            brow_lift: j(d.brow_lift, 0.01),
            brow_tilt: j(d.brow_tilt, 0.01),
            nose_length: j(d.nose_length, 0.02),
            mouth_y: j(d.mouth_y, 0.02),
            mouth_width: j(d.mouth_width, 0.015),
            smile: j(d.smile, 0.015),
            hairline: j(d.hairline, 0.03),
            stroke_radius: d.stroke_radius,
        }
    }

    pub fn edited(&self, edit: SketchEdit) -> Self {
        let mut s = self.clone();
        match edit {
            SketchEdit::WidenSmile => s.smile += 0.035,
            SketchEdit::Frown => s.smile -= 0.04,
            SketchEdit::RaiseBrows => s.brow_lift += 0.025,
            SketchEdit::TiltBrows => s.brow_tilt += 0.03,
            SketchEdit::EnlargeEyes => s.eye_size += 0.015,
            SketchEdit::LengthenNose => s.nose_length += 0.04,
            SketchEdit::WidenMouth => s.mouth_width += 0.035,
            SketchEdit::LowerHairline => s.hairline += 0.05,
            SketchEdit::NarrowEyes => s.eye_size -= 0.012,
            SketchEdit::ShiftMouth => s.mouth_y += 0.03,
        }
        s
    }

    pub fn ink(&self, res: usize) -> Vec<bool> {
        let mut c = Canvas::new(res);
        let r = self.stroke_radius * res as f32 / INPUT_RESOLUTION as f32;
        let centre = (0.5, 0.52);
        c.arc(centre, (self.face_width, self.face_height), 0.0, 2.0 * PI, r);
        // Hairline: an arc across the forehead.
        let top = centre.1 - self.face_height;
        c.arc((0.5, self.hairline + 0.08), (self.face_width * 0.85, 0.08), PI * 1.08, PI * 1.92, r);
        c.polyline(&[(0.5 - self.face_width * 0.9, top + 0.12), (0.5 - self.face_width * 0.7, self.hairline + 0.04)], r);
        c.polyline(&[(0.5 + self.face_width * 0.9, top + 0.12), (0.5 + self.face_width * 0.7, self.hairline + 0.04)], r);
        for side in [-1.0f32, 1.0] {
            let ex = 0.5 + side * self.eye_spacing;
            c.arc((ex, self.eye_y), (self.eye_size * 1.4, self.eye_size * 0.8), 0.0, 2.0 * PI, r);
            c.stamp(ex, self.eye_y, (self.eye_size * 0.35 * res as f32).max(r));
            let by = self.eye_y - self.brow_lift;
            let inner = (ex - side * self.eye_size * 1.5, by + self.brow_tilt);
            let outer = (ex + side * self.eye_size * 1.7, by - self.brow_tilt);
            c.polyline(&[inner, (ex, by - 0.008), outer], r);
        }
        let nose_top = self.eye_y + 0.02;
        let nose_tip = nose_top + self.nose_length;
        c.polyline(&[(0.5, nose_top), (0.515, nose_tip), (0.49, nose_tip + 0.008)], r);
        let (mw, my, sm) = (self.mouth_width, self.mouth_y, self.smile);
        let pts: Vec<_> = (0..=24)
            .map(|i| {
                let t = i as f32 / 24.0 * 2.0 - 1.0;
                (0.5 + t * mw, my + sm * (1.0 - t * t) - 0.5 * sm)
            })
            .collect();
        c.polyline(&pts, r);
        c.ink
    }

    pub fn render(&self, res: usize) -> SketchImage {
        SketchImage::from_ink(res, &self.ink(res)).expect("canvas size matches")
    }
}

/// Seeded synthetic portrait: backdrop, hair mass, skin-toned face oval with
/// shaded features. Only its colour statistics and layout matter downstream.
pub fn synthetic_reference(seed: u64, res: usize) -> ReferenceImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |lo: f32, hi: f32| rng.random_range(lo..=hi);
    let skin = [pick(0.45, 0.95), pick(0.3, 0.75), pick(0.2, 0.6)];
    let hair = [pick(0.05, 0.6), pick(0.03, 0.45), pick(0.02, 0.3)];
    let back = [pick(0.1, 0.9), pick(0.1, 0.9), pick(0.1, 0.9)];
    let iris = [pick(0.1, 0.5), pick(0.2, 0.6), pick(0.2, 0.7)];
    let lip = [pick(0.6, 0.9), pick(0.2, 0.4), pick(0.25, 0.45)];
    let mut data = Vec::with_capacity(res * res * 3);
    for y in 0..res {
        for x in 0..res {
            let (u, v) = ((x as f32 + 0.5) / res as f32, (y as f32 + 0.5) / res as f32);
            let face = ((u - 0.5) / 0.3).powi(2) + ((v - 0.53) / 0.38).powi(2);
            let hair_d = ((u - 0.5) / 0.36).powi(2) + ((v - 0.42) / 0.36).powi(2);
            let mut c = if face < 1.0 && v > 0.3 {
                let shade = 1.0 - 0.25 * face;
                skin.map(|s| s * shade)
            } else if hair_d < 1.0 {
                hair
            } else {
                back.map(|b| b * (0.8 + 0.2 * v))
            };
            for side in [-1.0f32, 1.0] {
                let e = ((u - 0.5 - side * 0.11) / 0.04).powi(2) + ((v - 0.46) / 0.022).powi(2);
                if e < 1.0 {
                    c = if e < 0.35 { iris } else { [0.95, 0.95, 0.95] };
                }
            }
            let m = ((u - 0.5) / 0.08).powi(2) + ((v - 0.7) / 0.02).powi(2);
            if m < 1.0 {
                c = lip;
            }
            data.extend(c.map(|v| v.clamp(0.0, 1.0)));
        }
    }
    ReferenceImage(InputImage::new(res, data).expect("generated values are in range"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_and_resample() {
        let r = synthetic_reference(1, 64);
        let back = InputImage::decode(&r.to_png(), 64).unwrap();
        for (a, b) in r.image().data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
        assert_eq!(InputImage::decode(&r.to_png(), 256).unwrap().resolution(), 256);
        assert!(InputImage::decode(b"not a png", 256).is_err());
    }

    #[test]
    fn sketch_is_binary_and_edits_are_local() {
        let s = FaceSketch::default();
        let img = s.render(256);
        assert!(img.image().data().iter().all(|v| *v == 0.0 || *v == 1.0));
        let ink = img.ink();
        let inked = ink.iter().filter(|i| **i).count();
        assert!(inked > 1000 && inked < 20000, "{inked}");
        for edit in SketchEdit::ALL {
            let other = s.edited(edit).ink(256);
            let diff = ink.iter().zip(&other).filter(|(a, b)| a != b).count();
            assert!(diff > 20 && diff < inked, "{edit:?}: {diff}");
        }
    }

    #[test]
    fn thresholding_binarizes_grey() {
        let data = vec![0.49, 0.49, 0.49, 0.51, 0.51, 0.51, 0.2, 0.9, 0.9, 1.0, 1.0, 1.0];
        let s = SketchImage::from_image(InputImage::new(2, data).unwrap());
        assert_eq!(s.ink(), vec![true, false, false, false]);
    }
}
