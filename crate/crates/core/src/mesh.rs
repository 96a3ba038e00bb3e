//! Template head mesh with a per-corner UV atlas.
//!
//! Meshes are stored as a subset of Wavefront OBJ: `v x y z`, `vt u v` and
//! triangular (or fan-triangulated polygonal) `f v/vt ...` records. UVs keep
//! the OBJ convention (origin bottom-left, V up) and texel row 0 is the top
//! of the atlas, so texel `(x, y)` has its center at
//! `((x + 0.5) / N, 1 - (y + 0.5) / N)`. A `# uv_resolution N` comment sets
//! the atlas resolution `N` (default 128).

use std::f32::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use glam::{Vec2, Vec3};

use crate::error::{format_err, CoreError, Result};
use crate::gaussian::TexelIndex;

pub const DEFAULT_UV_RESOLUTION: u32 = 128;
pub const MAX_UV_RESOLUTION: u32 = 512;

const DEFAULT_HEAD_OBJ: &str = include_str!("../assets/head_template.obj");

/// Face covering one texel center and the barycentric weights of that center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelBinding {
    pub face: u32,
    pub barycentric: [f32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    uv_coords: Vec<[Vec2; 3]>,
    uv_resolution: u32,
    texels: Vec<Option<TexelBinding>>,
    valid_count: usize,
}

impl TemplateMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, uv_coords: Vec<[Vec2; 3]>, uv_resolution: u32) -> Result<Self> {
        if faces.len() != uv_coords.len() {
            return Err(CoreError::Dimension(format!(
                "{} faces but {} UV triangles",
                faces.len(),
                uv_coords.len()
            )));
        }
        if !(4..=MAX_UV_RESOLUTION).contains(&uv_resolution) {
            return Err(CoreError::Dimension(format!(
                "uv resolution {uv_resolution} outside [4, {MAX_UV_RESOLUTION}]"
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(format_err("mesh", format!("non-finite vertex {v}")));
        }
        for (f, face) in faces.iter().enumerate() {
            if let Some(i) = face.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(CoreError::Index(format!("face {f} references vertex {i}")));
            }
        }
        for (f, uv) in uv_coords.iter().enumerate() {
            if !uv.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(&c.x) && (0.0..=1.0).contains(&c.y)) {
                return Err(format_err("mesh", format!("face {f} has UVs outside [0, 1]")));
            }
        }
        let texels = build_texel_table(&uv_coords, uv_resolution)?;
        let valid_count = texels.iter().filter(|t| t.is_some()).count();
        Ok(Self {
            vertices,
            faces,
            uv_coords,
            uv_resolution,
            texels,
            valid_count,
        })
    }

    /// The shipped procedural head template.
    pub fn default_head() -> Self {
        Self::from_obj_str(DEFAULT_HEAD_OBJ).expect("bundled head template is valid")
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn uv_coords(&self) -> &[[Vec2; 3]] {
        &self.uv_coords
    }

    pub fn uv_resolution(&self) -> u32 {
        self.uv_resolution
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn valid_texel_count(&self) -> usize {
        self.valid_count
    }

    /// Row-major texel table; `None` marks texels no UV triangle covers.
    pub fn texel_bindings(&self) -> &[Option<TexelBinding>] {
        &self.texels
    }

    pub fn binding(&self, texel: TexelIndex) -> Result<Option<TexelBinding>> {
        let r = self.uv_resolution;
        if texel.x >= r || texel.y >= r {
            return Err(CoreError::Index(format!("texel ({}, {}) outside {r}x{r}", texel.x, texel.y)));
        }
        Ok(self.texels[texel.linear(r)])
    }

    pub fn validity(&self) -> Vec<bool> {
        self.texels.iter().map(Option::is_some).collect()
    }

    /// Valid texels in row-major order.
    pub fn valid_texels(&self) -> impl Iterator<Item = (TexelIndex, TexelBinding)> + '_ {
        let r = self.uv_resolution as usize;
        self.texels
            .iter()
            .enumerate()
            .filter_map(move |(i, b)| b.map(|b| (TexelIndex::new((i % r) as u32, (i / r) as u32), b)))
    }

    pub fn surface_point(&self, binding: &TexelBinding) -> Vec3 {
        let [a, b, c] = self.faces[binding.face as usize];
        let [wa, wb, wc] = binding.barycentric;
        self.vertices[a as usize] * wa + self.vertices[b as usize] * wb + self.vertices[c as usize] * wc
    }

    /// Same mesh with the atlas rasterized at a different resolution.
    pub fn with_uv_resolution(&self, uv_resolution: u32) -> Result<Self> {
        Self::new(self.vertices.clone(), self.faces.clone(), self.uv_coords.clone(), uv_resolution)
    }

    pub fn from_obj_str(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut tex = Vec::new();
        let mut faces = Vec::new();
        let mut uv_coords = Vec::new();
        let mut resolution = DEFAULT_UV_RESOLUTION;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            let lineno = n + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("uv_resolution") {
                    resolution = it
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| format_err("obj", format!("line {lineno}: bad uv_resolution")))?;
                }
                continue;
            }
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let c = parse_floats::<3>(&mut it, lineno)?;
                    vertices.push(Vec3::from_array(c));
                }
                Some("vt") => {
                    let c = parse_floats::<2>(&mut it, lineno)?;
                    tex.push(Vec2::new(c[0], c[1]));
                }
                Some("f") => {
                    let corners = it
                        .map(|tok| parse_corner(tok, vertices.len(), tex.len(), lineno))
                        .collect::<Result<Vec<_>>>()?;
                    if corners.len() < 3 {
                        return Err(format_err("obj", format!("line {lineno}: face with < 3 corners")));
                    }
                    for k in 1..corners.len() - 1 {
                        let tri = [corners[0], corners[k], corners[k + 1]];
                        faces.push(tri.map(|(v, _)| v as u32));
                        uv_coords.push(tri.map(|(_, t)| tex[t]));
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, faces, uv_coords, resolution)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_obj_str(&std::fs::read_to_string(path)?)
    }

    /// Writes the mesh as OBJ; per-corner UVs become one `vt` per corner.
    pub fn to_obj_string(&self) -> String {
        let mut out = String::new();
        out.push_str("# splathead template mesh\n");
        let _ = writeln!(out, "# uv_resolution {}", self.uv_resolution);
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for uv in self.uv_coords.iter().flatten() {
            let _ = writeln!(out, "vt {} {}", uv.x, uv.y);
        }
        for (f, face) in self.faces.iter().enumerate() {
            let t = 3 * f + 1;
            let _ = writeln!(
                out,
                "f {}/{} {}/{} {}/{}",
                face[0] + 1,
                t,
                face[1] + 1,
                t + 1,
                face[2] + 1,
                t + 2
            );
        }
        out
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_obj_string())?;
        Ok(())
    }
}

fn parse_floats<'a, const N: usize>(it: &mut impl Iterator<Item = &'a str>, lineno: usize) -> Result<[f32; N]> {
    let mut out = [0.0; N];
    for v in out.iter_mut() {
        *v = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format_err("obj", format!("line {lineno}: expected {N} numbers")))?;
    }
    Ok(out)
}

fn parse_corner(tok: &str, nv: usize, nt: usize, lineno: usize) -> Result<(usize, usize)> {
    let mut parts = tok.split('/');
    let resolve = |s: Option<&str>, n: usize| -> Option<usize> {
        let i: i64 = s?.parse().ok()?;
        let idx = if i < 0 { n as i64 + i } else { i - 1 };
        (0..n as i64).contains(&idx).then_some(idx as usize)
    };
    let v = resolve(parts.next(), nv);
    let t = resolve(parts.next(), nt);
    match (v, t) {
        (Some(v), Some(t)) => Ok((v, t)),
        _ => Err(format_err("obj", format!("line {lineno}: corner '{tok}' needs valid v/vt indices"))),
    }
}

/// Rasterizes UV triangles onto texel centers. Faces are visited in index
/// order and a texel keeps the first face that covers it, so shared edges go
/// to the lower face index.
fn build_texel_table(uv_coords: &[[Vec2; 3]], resolution: u32) -> Result<Vec<Option<TexelBinding>>> {
    const EDGE_EPS: f64 = 1e-7;
    let r = resolution as usize;
    let mut table: Vec<Option<TexelBinding>> = vec![None; r * r];
    for (f, tri) in uv_coords.iter().enumerate() {
        let p = atlas_points(tri);
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        if area2.abs() < 1e-14 {
            continue;
        }
        let lo = |k: usize| p.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
        let hi = |k: usize| p.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
        let to_texel = |v: f64| (v * r as f64 - 0.5).floor().clamp(0.0, r as f64 - 1.0) as usize;
        let (x0, x1) = (to_texel(lo(0)), (to_texel(hi(0)) + 1).min(r - 1));
        let (y0, y1) = (to_texel(lo(1)), (to_texel(hi(1)) + 1).min(r - 1));
        for ty in y0..=y1 {
            for tx in x0..=x1 {
                let c = [(tx as f64 + 0.5) / r as f64, (ty as f64 + 0.5) / r as f64];
                let l1 = ((c[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (c[1] - p[0][1])) / area2;
                let l2 = ((p[1][0] - p[0][0]) * (c[1] - p[0][1]) - (c[0] - p[0][0]) * (p[1][1] - p[0][1])) / area2;
                let l0 = 1.0 - l1 - l2;
                if l0 < -EDGE_EPS || l1 < -EDGE_EPS || l2 < -EDGE_EPS {
                    continue;
                }
                let slot = &mut table[ty * r + tx];
                if let Some(existing) = slot {
                    // Overlap deeper than one texel inside both triangles is
                    // an atlas defect.
                    let texel = 1.0 / r as f64;
                    let q = atlas_points(&uv_coords[existing.face as usize]);
                    let b = existing.barycentric.map(f64::from);
                    if edge_depth(&p, [l0, l1, l2]) > texel && edge_depth(&q, b) > texel {
                        return Err(format_err(
                            "mesh",
                            format!("UV faces {} and {f} overlap at texel ({tx}, {ty})", existing.face),
                        ));
                    }
                    continue;
                }
                let w = [l0.max(0.0), l1.max(0.0), l2.max(0.0)];
                let s = w[0] + w[1] + w[2];
                *slot = Some(TexelBinding {
                    face: f as u32,
                    barycentric: [(w[0] / s) as f32, (w[1] / s) as f32, (w[2] / s) as f32],
                });
            }
        }
    }
    Ok(table)
}

/// UV corners in atlas space (V down).
fn atlas_points(tri: &[Vec2; 3]) -> [[f64; 2]; 3] {
    tri.map(|c| [c.x as f64, 1.0 - c.y as f64])
}

/// Distance from a barycentric point to the nearest triangle edge, UV units.
fn edge_depth(p: &[[f64; 2]; 3], l: [f64; 3]) -> f64 {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let len = |a: usize, b: usize| ((p[a][0] - p[b][0]).powi(2) + (p[a][1] - p[b][1]).powi(2)).sqrt();
    let edges = [len(1, 2), len(2, 0), len(0, 1)];
    (0..3)
        .map(|k| l[k] * area2.abs() / edges[k])
        .fold(f64::INFINITY, f64::min)
}

/// Procedural head: a deformed sphere with nose, brow, eye sockets, narrowed
/// jaw and neck, split into a face chart and a back-of-head chart packed side
/// by side in the atlas.
pub fn procedural_head(azimuth_segments: usize, polar_segments: usize, uv_resolution: u32) -> Result<TemplateMesh> {
    assert!(azimuth_segments.is_multiple_of(2) && azimuth_segments >= 4 && polar_segments >= 3);
    let half = azimuth_segments / 2;
    let mut vertices = Vec::with_capacity(2 + (polar_segments - 1) * azimuth_segments);
    vertices.push(head_surface(0.0, 0.0));
    for i in 1..polar_segments {
        let theta = PI * i as f32 / polar_segments as f32;
        for c in 0..azimuth_segments {
            vertices.push(head_surface(theta, azimuth(c, half)));
        }
    }
    vertices.push(head_surface(PI, 0.0));
    let bottom = vertices.len() as u32 - 1;
    let vid = |i: usize, c: usize| -> u32 {
        match i {
            0 => 0,
            i if i == polar_segments => bottom,
            i => (1 + (i - 1) * azimuth_segments + c % azimuth_segments) as u32,
        }
    };

    // Face chart on the left half of the atlas, back chart on the right.
    let charts = [(0.012f32, 0.488f32), (0.512f32, 0.988f32)];
    let (v0, v1) = (0.06f32, 0.94f32);
    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    for (chart, &(u0, u1)) in charts.iter().enumerate() {
        let uv = |i: usize, j: f32| {
            let down = v0 + (v1 - v0) * i as f32 / polar_segments as f32;
            Vec2::new(u0 + (u1 - u0) * j / half as f32, 1.0 - down)
        };
        for i in 0..polar_segments {
            for j in 0..half {
                let c = chart * half + j;
                let (a, b, cc, d) = (vid(i, c), vid(i, c + 1), vid(i + 1, c), vid(i + 1, c + 1));
                let jf = j as f32;
                if i == 0 {
                    faces.push([a, d, cc]);
                    uvs.push([uv(0, jf + 0.5), uv(1, jf + 1.0), uv(1, jf)]);
                } else if i == polar_segments - 1 {
                    faces.push([a, b, cc]);
                    uvs.push([uv(i, jf), uv(i, jf + 1.0), uv(i + 1, jf + 0.5)]);
                } else {
                    faces.push([a, b, cc]);
                    uvs.push([uv(i, jf), uv(i, jf + 1.0), uv(i + 1, jf)]);
                    faces.push([b, d, cc]);
                    uvs.push([uv(i, jf + 1.0), uv(i + 1, jf + 1.0), uv(i + 1, jf)]);
                }
            }
        }
    }
    TemplateMesh::new(vertices, faces, uvs, uv_resolution)
}

/// The generator behind the bundled `head_template.obj`.
pub fn default_procedural_head() -> Result<TemplateMesh> {
    procedural_head(56, 44, DEFAULT_UV_RESOLUTION)
}

fn azimuth(column: usize, half: usize) -> f32 {
    -FRAC_PI_2 + PI * column as f32 / half as f32
}

fn bump(theta: f32, phi: f32, t0: f32, p0: f32, st: f32, sp: f32) -> f32 {
    let dp = wrap_angle(phi - p0);
    (-((theta - t0) / st).powi(2) - (dp / sp).powi(2)).exp()
}

fn wrap_angle(a: f32) -> f32 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

fn smoothstep(e0: f32, e1: f32, x: f32) -> f32 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Polar angle `theta` from +Y, azimuth `phi` from +Z toward +X.
fn head_surface(theta: f32, phi: f32) -> Vec3 {
    let dir = Vec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos());
    let mut radial = 1.0
        + 0.14 * bump(theta, phi, 1.78, 0.0, 0.20, 0.16)
        + 0.05 * bump(theta, phi, 1.32, 0.0, 0.12, 0.55)
        - 0.05 * bump(theta, phi, 1.52, 0.36, 0.13, 0.15)
        - 0.05 * bump(theta, phi, 1.52, -0.36, 0.13, 0.15)
        + 0.04 * bump(theta, phi, 2.12, 0.0, 0.12, 0.30);
    let jaw = 1.0 - 0.22 * smoothstep(1.9, 2.5, theta);
    let neck = 1.0 - 0.35 * smoothstep(2.45, 2.9, theta);
    radial *= neck;
    Vec3::new(0.78 * jaw * dir.x, 1.0 * dir.y, 0.9 * jaw * dir.z) * radial
}
