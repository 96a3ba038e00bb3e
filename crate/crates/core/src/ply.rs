//! Gaussian sets in the common 3DGS PLY layout.
//!
//! Writer output is `binary_little_endian 1.0` with one `vertex` element:
//!
//! ```text
//! float x y z nx ny nz            position, zero normals
//! float f_dc_0 f_dc_1 f_dc_2      (color - 0.5) / SH_C0
//! float opacity                   logit(opacity)
//! float scale_0 scale_1 scale_2   ln(scale)
//! float rot_0 rot_1 rot_2 rot_3   quaternion w, x, y, z
//! int   texel_x texel_y           UV texel, -1 when unbound
//! ```
//!
//! The reader accepts these properties in any order, ignores unknown ones
//! (including higher-order `f_rest_*`), and reads `float`, `double`, `int`,
//! `uint`, `short`, `ushort`, `char` and `uchar` scalars.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use glam::Vec3;

use crate::error::{format_err, Result};
use crate::gaussian::{GaussianPrimitive, GaussianSet, TexelIndex};
use crate::uv::activation::{logit, sigmoid};

pub const SH_C0: f32 = 0.282_094_8;

const FLOAT_PROPS: [&str; 17] = [
    "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
    "rot_1", "rot_2", "rot_3",
];

pub fn write_ply(set: &GaussianSet, mut out: impl Write) -> Result<()> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    if let Some(r) = set.uv_resolution() {
        header.push_str(&format!("comment uv_resolution {r}\n"));
    }
    header.push_str(&format!("element vertex {}\n", set.len()));
    for p in FLOAT_PROPS {
        header.push_str(&format!("property float {p}\n"));
    }
    header.push_str("property int texel_x\nproperty int texel_y\nend_header\n");
    out.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(set.len() * 76);
    for (p, texel) in set.primitives().iter().zip(set.texel_indices()) {
        let pos = p.position();
        let c = p.color();
        let s = p.scale();
        // Keep the logit finite for fully opaque or transparent splats.
        let opacity = logit(p.opacity().clamp(1e-7, 1.0 - 1e-7));
        let values = [
            pos.x,
            pos.y,
            pos.z,
            0.0,
            0.0,
            0.0,
            (c.x - 0.5) / SH_C0,
            (c.y - 0.5) / SH_C0,
            (c.z - 0.5) / SH_C0,
            opacity,
            s.x.ln(),
            s.y.ln(),
            s.z.ln(),
        ];
        for v in values.iter().chain(p.rotation_wxyz().iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let (tx, ty) = texel.map_or((-1i32, -1i32), |t| (t.x as i32, t.y as i32));
        buf.extend_from_slice(&tx.to_le_bytes());
        buf.extend_from_slice(&ty.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn save_ply(set: &GaussianSet, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_ply(set, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy)]
enum Scalar {
    F32,
    F64,
    I32,
    U32,
    I16,
    U16,
    I8,
    U8,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::F64 => 8,
            Self::F32 | Self::I32 | Self::U32 => 4,
            Self::I16 | Self::U16 => 2,
            Self::I8 | Self::U8 => 1,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
        }
    }
}

pub fn read_ply(input: impl Read) -> Result<GaussianSet> {
    let mut reader = std::io::BufReader::new(input);
    let mut line = String::new();
    let mut count = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut uv_resolution = None;
    let mut in_vertex = false;
    let mut first = true;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(format_err("ply", "missing end_header"));
        }
        let l = line.trim();
        if first {
            if l != "ply" {
                return Err(format_err("ply", "missing 'ply' magic"));
            }
            first = false;
            continue;
        }
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["format", fmt, _] if *fmt != "binary_little_endian" => {
                return Err(format_err("ply", format!("unsupported format {fmt}")));
            }
            ["comment", "uv_resolution", r] => uv_resolution = r.parse().ok(),
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    count = Some(n.parse::<usize>().map_err(|_| format_err("ply", "bad vertex count"))?);
                } else if count.is_none() {
                    return Err(format_err("ply", format!("element '{name}' before vertex is unsupported")));
                }
            }
            ["property", "list", ..] if in_vertex => return Err(format_err("ply", "list properties unsupported")),
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| format_err("ply", format!("unknown type {ty}")))?;
                props.push((name.to_string(), s));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let count = count.ok_or_else(|| format_err("ply", "no vertex element"))?;
    let find = |name: &str| props.iter().position(|(n, _)| n == name);
    let required = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"];
    let idx: Vec<usize> = required
        .iter()
        .map(|p| find(p).ok_or_else(|| format_err("ply", format!("missing property {p}"))))
        .collect::<Result<_>>()?;
    let texel_idx = find("texel_x").zip(find("texel_y"));
    let offsets: Vec<usize> = props
        .iter()
        .scan(0, |acc, (_, s)| {
            let o = *acc;
            *acc += s.size();
            Some(o)
        })
        .collect();
    let stride: usize = props.iter().map(|(_, s)| s.size()).sum();
    let mut record = vec![0u8; stride];
    let mut primitives = Vec::with_capacity(count);
    let mut texels = Vec::with_capacity(count);
    for _ in 0..count {
        reader.read_exact(&mut record)?;
        let get = |k: usize| props[k].1.read(&record[offsets[k]..]);
        let v: Vec<f32> = idx.iter().map(|&k| get(k) as f32).collect();
        let color = Vec3::new(v[3], v[4], v[5]).map(|c| (0.5 + SH_C0 * c).clamp(0.0, 1.0));
        let scale = Vec3::new(v[7].exp(), v[8].exp(), v[9].exp());
        let q = [v[10], v[11], v[12], v[13]];
        let n = q.iter().map(|c| c * c).sum::<f32>().sqrt();
        let q = if n > 1e-12 { q.map(|c| c / n) } else { [1.0, 0.0, 0.0, 0.0] };
        primitives.push(GaussianPrimitive::new(Vec3::new(v[0], v[1], v[2]), scale, q, sigmoid(v[6]), color)?);
        texels.push(texel_idx.and_then(|(a, b)| {
            let (x, y) = (get(a), get(b));
            (x >= 0.0 && y >= 0.0).then(|| TexelIndex::new(x as u32, y as u32))
        }));
    }
    let uv_resolution = if texels.iter().any(Option::is_some) { uv_resolution } else { None };
    GaussianSet::new(primitives, texels, uv_resolution)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianSet> {
    read_ply(std::fs::File::open(path)?)
}
