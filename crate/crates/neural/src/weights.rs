use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use splathead_core::{NamedTensor, TensorContainer};

use crate::arch::{ArchSpec, Init};
use crate::error::{NeuralError, Result};
use crate::tensor::Tensor;

const KIND: &str = "weights";

/// Immutable named weight tensors plus the seed and architecture fingerprint
/// they were produced for.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
    seed: u64,
    arch_fingerprint: String,
}

impl WeightStore {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn arch_fingerprint(&self) -> &str {
        &self.arch_fingerprint
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| NeuralError::Weights(format!("missing tensor '{name}'")))
    }

    /// Replaces one tensor, keeping its declared shape. Used to build
    /// hand-crafted weights in tests and examples.
    pub fn set(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| NeuralError::Weights(format!("unknown tensor '{name}'")))?;
        if slot.shape() != tensor.shape() {
            return Err(NeuralError::Dimension(format!(
                "'{name}': expected {:?}, got {:?}",
                slot.shape(),
                tensor.shape()
            )));
        }
        *slot = tensor;
        Ok(())
    }

    /// Checks that every tensor the architecture declares is present with the
    /// declared shape, that nothing else is stored, and that all values are finite.
    pub fn validate(&self, arch: &ArchSpec) -> Result<()> {
        if self.arch_fingerprint != arch.fingerprint() {
            return Err(NeuralError::Weights("architecture fingerprint mismatch".into()));
        }
        let decls = arch.layers();
        for d in &decls {
            let t = self.get(&d.name)?;
            if t.shape() != d.shape.as_slice() {
                return Err(NeuralError::Weights(format!("'{}': expected {:?}, got {:?}", d.name, d.shape, t.shape())));
            }
            if !t.is_finite() {
                return Err(NeuralError::Weights(format!("'{}' holds non-finite values", d.name)));
            }
        }
        if decls.len() != self.tensors.len() {
            return Err(NeuralError::Weights(format!(
                "{} tensors stored, architecture declares {}",
                self.tensors.len(),
                decls.len()
            )));
        }
        Ok(())
    }

    pub fn to_container(&self) -> TensorContainer {
        let mut c = TensorContainer::new();
        c.set_meta("kind", KIND);
        c.set_meta("seed", self.seed.to_string());
        c.set_meta("arch_fingerprint", &self.arch_fingerprint);
        for (name, t) in &self.tensors {
            c.push(NamedTensor::new(name.clone(), t.shape().to_vec(), t.data().to_vec()).expect("tensor shape is consistent"));
        }
        c
    }

    pub fn from_container(c: TensorContainer) -> Result<Self> {
        if c.meta("kind") != Some(KIND) {
            return Err(NeuralError::Weights("container is not a weight file".into()));
        }
        let seed = c
            .meta("seed")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| NeuralError::Weights("missing seed".into()))?;
        let arch_fingerprint = c
            .meta("arch_fingerprint")
            .ok_or_else(|| NeuralError::Weights("missing architecture fingerprint".into()))?
            .to_string();
        let tensors = c
            .into_tensors()
            .into_iter()
            .map(|t| {
                let (name, shape, data) = t.into_parts();
                Ok((name, Tensor::new(shape, data)?))
            })
            .collect::<Result<_>>()?;
        Ok(Self { tensors, seed, arch_fingerprint })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_container().to_bytes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(TensorContainer::load(path)?)
    }

    /// SHA-256 of the serialized container (tensors, seed and architecture).
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

/// Deterministic initialization: each tensor draws from its own ChaCha stream
/// keyed by `(seed, tensor name)`, so adding a layer never perturbs the others.
pub fn init_weights(arch: &ArchSpec, seed: u64) -> WeightStore {
    let mut tensors = BTreeMap::new();
    for decl in arch.layers() {
        let n: usize = decl.shape.iter().product();
        let mut key = Sha256::new();
        key.update(seed.to_le_bytes());
        key.update(decl.name.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(key.finalize().into());
        let data = match &decl.init {
            Init::Constant(v) => vec![*v; n],
            Init::Values(v) => v.clone(),
            Init::Normal(std) => {
                let dist = Normal::new(0.0f32, *std).expect("finite std");
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
            Init::NormalPerColumn(stds) => {
                let unit = Normal::new(0.0f32, 1.0).expect("unit normal");
                (0..n).map(|i| unit.sample(&mut rng) * stds[i % stds.len()]).collect()
            }
        };
        let t = Tensor::new(decl.shape.clone(), data).expect("declared shape matches init");
        tensors.insert(decl.name, t);
    }
    WeightStore { tensors, seed, arch_fingerprint: arch.fingerprint() }
}
