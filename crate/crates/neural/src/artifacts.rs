//! Directory serialization of [`GenerationArtifacts`].
//!
//! ```text
//! <dir>/manifest.json    format, model fingerprints, SHA-256 of every file
//! <dir>/coarse.bin       coarse UV map and both identity vectors
//! <dir>/latent.bin       style vectors, [layers, style_dim]
//! <dir>/modulation.bin   global latent and spatial pyramid
//! <dir>/pyramid.bin      captured synthesis features
//! <dir>/attributes.bin   raw UV attribute map
//! ```
//!
//! All `.bin` files use the shared tensor container format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use splathead_core::{NamedTensor, TensorContainer, UvAttributeMap, UvFeatureMap};

use crate::coarse::CoarseOutput;
use crate::error::{NeuralError, Result};
use crate::fine::{FeaturePyramid, GenerationArtifacts, LatentCode, ModulationBundle};
use crate::model::Model;
use crate::tensor::Tensor;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub format: u32,
    pub arch_fingerprint: String,
    pub weights_fingerprint: String,
    pub weights_seed: u64,
    pub files: BTreeMap<String, String>,
}

fn tensor(name: &str, shape: Vec<usize>, data: &[f32]) -> NamedTensor {
    NamedTensor::new(name, shape, data.to_vec()).expect("artifact tensor shapes are consistent")
}

fn uv_tensor(name: &str, m: &UvFeatureMap) -> NamedTensor {
    let r = m.resolution() as usize;
    tensor(name, vec![r, r, m.channels()], m.data())
}

fn read_uv(c: &TensorContainer, name: &str) -> Result<UvFeatureMap> {
    let t = c.require(name)?;
    match t.shape() {
        [r, r2, ch] if r == r2 => Ok(UvFeatureMap::from_data(*r as u32, *ch, t.data().to_vec())?),
        s => Err(NeuralError::Dimension(format!("'{name}' has non-square shape {s:?}"))),
    }
}

fn indexed<'a>(c: &'a TensorContainer, prefix: &str) -> Vec<&'a NamedTensor> {
    (0..).map_while(|k| c.get(&format!("{prefix}{k}"))).collect()
}

impl GenerationArtifacts {
    fn containers(&self) -> Vec<(&'static str, TensorContainer)> {
        let mut coarse = TensorContainer::new();
        coarse.set_meta("kind", "coarse");
        coarse.push(uv_tensor("coarse_uv", &self.coarse.coarse_uv));
        coarse.push(tensor("id_geometry", vec![self.coarse.id_geometry.len()], &self.coarse.id_geometry));
        coarse.push(tensor("id_appearance", vec![self.coarse.id_appearance.len()], &self.coarse.id_appearance));

        let mut latent = TensorContainer::new();
        latent.set_meta("kind", "latent");
        let flat: Vec<f32> = self.latent.styles().concat();
        latent.push(tensor("styles", vec![self.latent.layer_count(), self.latent.style_dim()], &flat));

        let mut modulation = TensorContainer::new();
        modulation.set_meta("kind", "modulation");
        let g = &self.modulation.global_latent;
        modulation.push(tensor("global_latent", vec![g.len()], g));
        for (k, m) in self.modulation.spatial_pyramid.iter().enumerate() {
            modulation.push(uv_tensor(&format!("spatial{k}"), m));
        }

        let mut pyramid = TensorContainer::new();
        pyramid.set_meta("kind", "feature_pyramid");
        for (k, l) in self.pyramid.layers().iter().enumerate() {
            pyramid.push(tensor(&format!("layer{k}"), l.shape().to_vec(), l.data()));
        }

        vec![
            ("coarse.bin", coarse),
            ("latent.bin", latent),
            ("modulation.bin", modulation),
            ("pyramid.bin", pyramid),
            ("attributes.bin", self.attributes.to_container()),
        ]
    }

    /// Writes the artifact directory (created if missing) and returns its manifest.
    pub fn save_dir(&self, dir: impl AsRef<Path>, model: &Model) -> Result<ArtifactManifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut files = BTreeMap::new();
        for (name, c) in self.containers() {
            let bytes = c.to_bytes();
            files.insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
            std::fs::write(dir.join(name), bytes)?;
        }
        let manifest = ArtifactManifest {
            format: 1,
            arch_fingerprint: model.arch().fingerprint(),
            weights_fingerprint: model.weights().fingerprint(),
            weights_seed: model.weights().seed(),
            files,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST), json)?;
        Ok(manifest)
    }

    /// Reads an artifact directory, verifying every file against the manifest.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<(Self, ArtifactManifest)> {
        let dir = dir.as_ref();
        let manifest: ArtifactManifest = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST))?)
            .map_err(|e| NeuralError::Weights(format!("bad artifact manifest: {e}")))?;
        let load = |name: &str| -> Result<TensorContainer> {
            let bytes = std::fs::read(dir.join(name))?;
            let expected = manifest
                .files
                .get(name)
                .ok_or_else(|| NeuralError::Contract(format!("manifest does not list {name}")))?;
            if hex::encode(Sha256::digest(&bytes)) != *expected {
                return Err(NeuralError::Contract(format!("{name} does not match its manifest hash")));
            }
            Ok(TensorContainer::from_bytes(&bytes)?)
        };

        let c = load("coarse.bin")?;
        let coarse = CoarseOutput {
            coarse_uv: read_uv(&c, "coarse_uv")?,
            id_geometry: c.require("id_geometry")?.data().to_vec(),
            id_appearance: c.require("id_appearance")?.data().to_vec(),
        };

        let l = load("latent.bin")?;
        let styles = l.require("styles")?;
        let [_, s] = styles.shape() else {
            return Err(NeuralError::Dimension("styles must be rank 2".into()));
        };
        let latent = LatentCode::new(styles.data().chunks_exact((*s).max(1)).map(<[f32]>::to_vec).collect())?;

        let m = load("modulation.bin")?;
        let spatial_pyramid = indexed(&m, "spatial")
            .into_iter()
            .map(|t| read_uv(&m, t.name()))
            .collect::<Result<_>>()?;
        let modulation =
            ModulationBundle { global_latent: m.require("global_latent")?.data().to_vec(), spatial_pyramid };

        let p = load("pyramid.bin")?;
        let layers = indexed(&p, "layer")
            .into_iter()
            .map(|t| Tensor::new(t.shape().to_vec(), t.data().to_vec()))
            .collect::<Result<_>>()?;
        let pyramid = FeaturePyramid::new(layers)?;

        let attributes = UvAttributeMap::from_container(&load("attributes.bin")?)?;
        Ok((Self { coarse, latent, modulation, pyramid, attributes }, manifest))
    }
}
