//! Forward-only toy generator for UV-parameterized Gaussian heads.
//!
//! The pipeline runs in two stages:
//!
//! * **coarse** — a patch embedder encodes the sketch and the reference; two
//!   cross-attention branches turn learnable per-vertex queries into
//!   geometry and appearance features plus identity vectors; the features are
//!   projected into UV space and the geometry map is AdaIN-aligned to
//!   statistics predicted from the appearance map;
//! * **fine** — a U-Net turns the coarse map into a global latent and a
//!   spatial modulation pyramid, an MLP fuses the latent with both identity
//!   vectors into per-layer styles, and a style-modulated synthesis stack
//!   produces the raw UV attribute map that decodes to one Gaussian per
//!   valid texel.
//!
//! Weights are seeded, not trained; every block is a deterministic pure
//! function of its inputs and the [`WeightStore`].

pub mod arch;
mod artifacts;
pub mod blocks;
pub mod coarse;
mod error;
pub mod fine;
pub mod images;
mod model;
pub mod tensor;
mod weights;

pub use arch::ArchSpec;
pub use artifacts::{ArtifactManifest, MANIFEST};
pub use blocks::{adain, cross_attention, modulated_synthesis_layer, ChannelStats};
pub use coarse::{
    align_appearance, build_coarse_uv, encode_image, run_branch, AppearanceFeatures, BranchOutput, CoarseOutput, QueryBank,
};
pub use error::{NeuralError, Result};
pub use fine::{
    condition, extract_modulation, fuse_latent, generate_head, synthesize_uv, Conditioning, FeaturePyramid, FusionHook,
    GenerationArtifacts, LatentCode, ModulationBundle,
};
pub use images::{synthetic_reference, FaceSketch, InputImage, ReferenceImage, SketchEdit, SketchImage};
pub use model::Model;
pub use tensor::Tensor;
pub use weights::{init_weights, WeightStore};
