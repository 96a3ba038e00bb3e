//! Named-tensor container shared by UV maps, feature dumps and weight files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        8 bytes   "SPLTHEAD"
//! version      u32       1
//! meta_count   u32
//!   key_len    u16, key bytes (UTF-8)
//!   value_len  u32, value bytes (UTF-8)
//! tensor_count u32
//!   name_len   u16, name bytes (UTF-8)
//!   ndim       u8
//!   dims       u32 x ndim
//!   data       f32 x prod(dims)
//! ```
//!
//! Metadata keys are written in sorted order and tensors in insertion order,
//! so equal containers serialize to identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{format_err, CoreError, Result};

pub const MAGIC: [u8; 8] = *b"SPLTHEAD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(CoreError::Dimension(format!(
                "tensor '{name}' shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        if shape.len() > u8::MAX as usize || name.len() > u16::MAX as usize {
            return Err(CoreError::Dimension(format!("tensor '{name}' header too large")));
        }
        Ok(Self { name, shape, data })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_parts(self) -> (String, Vec<usize>, Vec<f32>) {
        (self.name, self.shape, self.data)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    metadata: BTreeMap<String, String>,
    tensors: Vec<NamedTensor>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Appends a tensor, replacing any existing tensor of the same name.
    pub fn push(&mut self, tensor: NamedTensor) {
        if let Some(slot) = self.tensors.iter_mut().find(|t| t.name == tensor.name) {
            *slot = tensor;
        } else {
            self.tensors.push(tensor);
        }
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&NamedTensor> {
        self.get(name)
            .ok_or_else(|| format_err("container", format!("missing tensor '{name}'")))
    }

    pub fn into_tensors(self) -> Vec<NamedTensor> {
        self.tensors
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.tensors.iter().map(|t| t.data.len() * 4 + 64).sum();
        let mut out = Vec::with_capacity(payload + 64);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            out.extend_from_slice(&(k.len() as u16).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            out.extend_from_slice(&(v.len() as u32).to_le_bytes());
            out.extend_from_slice(v.as_bytes());
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for d in &t.shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(format_err("container", "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format_err("container", format!("unsupported version {version}")));
        }
        let mut metadata = BTreeMap::new();
        for _ in 0..r.u32()? {
            let klen = r.u16()? as usize;
            let k = r.string(klen)?;
            let vlen = r.u32()? as usize;
            let v = r.string(vlen)?;
            metadata.insert(k, v);
        }
        let count = r.u32()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let nlen = r.u16()? as usize;
            let name = r.string(nlen)?;
            let ndim = r.take(1)?[0] as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d))
                .ok_or_else(|| format_err("container", "tensor size overflow"))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| format_err("container", "tensor size overflow"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(NamedTensor::new(name, shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(format_err("container", "trailing bytes"));
        }
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| format_err("container", "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format_err("container", "invalid UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn header_layout() {
        let mut c = TensorContainer::new();
        c.set_meta("k", "v");
        c.push(NamedTensor::new("t", vec![2], vec![1.0, -2.0]).unwrap());
        let b = c.to_bytes();
        assert_eq!(&b[..8], b"SPLTHEAD");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(b.len(), 8 + 4 + 4 + (2 + 1 + 4 + 1) + 4 + (2 + 1 + 1 + 4) + 8);
        assert_eq!(&b[b.len() - 4..], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let mut c = TensorContainer::new();
        c.push(NamedTensor::new("t", vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let b = c.to_bytes();
        assert!(TensorContainer::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(TensorContainer::from_bytes(&bad).is_err());
        let mut extra = b;
        extra.push(0);
        assert!(TensorContainer::from_bytes(&extra).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(
            meta in proptest::collection::btree_map("[a-z_]{1,8}", "[ -~]{0,16}", 0..4),
            tensors in proptest::collection::vec((1usize..4, 1usize..5, proptest::num::f32::ANY), 0..4),
        ) {
            let mut c = TensorContainer::new();
            for (k, v) in &meta {
                c.set_meta(k.clone(), v.clone());
            }
            for (i, (a, b, v)) in tensors.iter().enumerate() {
                c.push(NamedTensor::new(format!("t{i}"), vec![*a, *b], vec![*v; a * b]).unwrap());
            }
            let bytes = c.to_bytes();
            let back = TensorContainer::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
