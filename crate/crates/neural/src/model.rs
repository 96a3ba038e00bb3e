use std::sync::Arc;

use crate::arch::ArchSpec;
use crate::error::{NeuralError, Result};
use crate::weights::{init_weights, WeightStore};

/// A validated architecture/weights pair. Cheap to clone and safe to share
/// between concurrent generations.
#[derive(Debug, Clone)]
pub struct Model {
    arch: Arc<ArchSpec>,
    weights: Arc<WeightStore>,
}

impl Model {
    pub fn new(arch: ArchSpec, weights: WeightStore) -> Result<Self> {
        weights.validate(&arch)?;
        Ok(Self { arch: Arc::new(arch), weights: Arc::new(weights) })
    }

    /// The shipped toy architecture with freshly seeded weights.
    pub fn toy(seed: u64) -> Self {
        let arch = ArchSpec::toy();
        let weights = init_weights(&arch, seed);
        Self::new(arch, weights).expect("initialized weights match their architecture")
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    /// Checks that a template mesh matches the architecture's vertex count
    /// and UV resolution.
    pub fn check_mesh(&self, mesh: &splathead_core::TemplateMesh) -> Result<()> {
        let t = &self.arch.template;
        if mesh.vertex_count() != t.vertices || mesh.uv_resolution() as usize != t.uv_resolution {
            return Err(NeuralError::Dimension(format!(
                "mesh has {} vertices at UV {}; architecture expects {} at {}",
                mesh.vertex_count(),
                mesh.uv_resolution(),
                t.vertices,
                t.uv_resolution
            )));
        }
        Ok(())
    }
}
