//! Architecture spec: the text file that fixes the toy topology.
//!
//! The spec lists channel widths, depths and resolutions; [`ArchSpec::layers`]
//! expands it into the complete list of named weight tensors with their shapes
//! and initialization rules.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use splathead_core::uv::ATTRIBUTE_CHANNELS;

use crate::error::{NeuralError, Result};

const TOY_ARCH: &str = include_str!("../assets/toy_arch.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub version: u32,
    pub name: String,
    pub input: InputSpec,
    pub encoder: EncoderSpec,
    pub geometry: BranchSpec,
    pub appearance: BranchSpec,
    pub template: TemplateSpec,
    pub unet: UnetSpec,
    pub synthesis: SynthesisSpec,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub resolution: usize,
    pub patch_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub widths: [usize; 2],
    pub embed_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub dim: usize,
    pub blocks: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    pub identity_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub vertices: usize,
    pub uv_resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnetSpec {
    pub widths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub resolutions: Vec<usize>,
    pub widths: Vec<usize>,
    pub style_dim: usize,
    pub mapping_hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub bias: Vec<f32>,
    pub gain: Vec<f32>,
}

/// How a weight tensor is initialized.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Zero-mean normal with the given standard deviation.
    Normal(f32),
    /// Normal with a per-output-channel standard deviation (last axis).
    NormalPerColumn(Vec<f32>),
    Constant(f32),
    Values(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDecl {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ArchSpec {
    /// The shipped toy architecture.
    pub fn toy() -> Self {
        Self::from_toml_str(TOY_ARCH).expect("shipped architecture spec is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| NeuralError::Arch(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("architecture spec serializes")
    }

    /// SHA-256 of the canonical serialization; stable under reformatting of
    /// the source file.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(NeuralError::Arch(m));
        if self.version != 1 {
            return fail(format!("unsupported version {}", self.version));
        }
        let i = &self.input;
        if i.patch_grid == 0 || i.resolution != i.patch_grid * 16 {
            return fail("input resolution must be 16 × patch_grid (4·2·2 downsampling)".into());
        }
        for (name, b) in [("geometry", &self.geometry), ("appearance", &self.appearance)] {
            if b.dim == 0 || b.heads == 0 || b.dim % b.heads != 0 || b.ffn_mult == 0 || b.identity_tokens == 0 {
                return fail(format!("{name}: dim must be a positive multiple of heads; counts positive"));
            }
        }
        let s = &self.synthesis;
        if s.resolutions.is_empty() || s.resolutions.len() != s.widths.len() {
            return fail("synthesis resolutions and widths must be non-empty and equally long".into());
        }
        if s.resolutions.windows(2).any(|w| w[1] != 2 * w[0]) {
            return fail("synthesis resolutions must double at every layer".into());
        }
        if *s.resolutions.last().unwrap() != self.template.uv_resolution {
            return fail("last synthesis resolution must equal the UV resolution".into());
        }
        let u = &self.unet;
        if u.widths.len() + 1 != s.resolutions.len() {
            return fail("unet needs one stride-2 stage per synthesis resolution below the UV resolution".into());
        }
        if s.widths.iter().chain(&u.widths).any(|w| *w == 0) || s.style_dim == 0 || s.mapping_hidden == 0 {
            return fail("widths must be positive".into());
        }
        if self.output.bias.len() != ATTRIBUTE_CHANNELS || self.output.gain.len() != ATTRIBUTE_CHANNELS {
            return fail(format!("output bias/gain need {ATTRIBUTE_CHANNELS} entries"));
        }
        Ok(())
    }

    /// Channels of the coarse UV map: geometry features plus aligned features.
    pub fn coarse_channels(&self) -> usize {
        2 * self.geometry.dim
    }

    pub fn latent_dim(&self) -> usize {
        *self.unet.widths.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.synthesis.resolutions.len()
    }

    /// Input width of the identity-aware mapping MLP.
    pub fn mapping_input(&self) -> usize {
        self.latent_dim() + self.geometry.dim + self.appearance.dim
    }

    /// Every weight tensor the pipeline references, in a fixed order.
    pub fn layers(&self) -> Vec<LayerDecl> {
        let mut out = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, init: Init| out.push(LayerDecl { name, shape, init });
        let he = |fan_in: usize| Init::Normal((2.0 / fan_in as f32).sqrt());
        let lin = |fan_in: usize| Init::Normal((1.0 / fan_in as f32).sqrt());

        let e = &self.encoder;
        let convs = [(4, 3, e.widths[0]), (2, e.widths[0], e.widths[1]), (2, e.widths[1], e.embed_dim)];
        for (i, (k, ci, co)) in convs.into_iter().enumerate() {
            push(format!("encoder.conv{i}.weight"), vec![k, k, ci, co], he(k * k * ci));
            push(format!("encoder.conv{i}.bias"), vec![co], Init::Constant(0.0));
        }
        let grid = self.input.patch_grid * self.input.patch_grid;
        push("encoder.pos_embed".into(), vec![grid, e.embed_dim], Init::Normal(0.5));

        for (prefix, b) in [("geometry", &self.geometry), ("appearance", &self.appearance)] {
            let d = b.dim;
            push(format!("{prefix}.vertex_queries"), vec![self.template.vertices, d], Init::Normal(1.0));
            push(format!("{prefix}.identity_tokens"), vec![b.identity_tokens, d], Init::Normal(1.0));
            push(format!("{prefix}.kv_proj.weight"), vec![e.embed_dim, d], lin(e.embed_dim));
            push(format!("{prefix}.kv_proj.bias"), vec![d], Init::Constant(0.0));
            for k in 0..b.blocks {
                let p = format!("{prefix}.block{k}");
                for ln in ["ln1", "ln2", "ln_kv"] {
                    push(format!("{p}.{ln}.gamma"), vec![d], Init::Constant(1.0));
                    push(format!("{p}.{ln}.beta"), vec![d], Init::Constant(0.0));
                }
                for m in ["wq", "wk", "wv", "wo"] {
                    push(format!("{p}.attn.{m}"), vec![d, d], lin(d));
                }
                let h = d * b.ffn_mult;
                push(format!("{p}.ffn.w1"), vec![d, h], he(d));
                push(format!("{p}.ffn.b1"), vec![h], Init::Constant(0.0));
                push(format!("{p}.ffn.w2"), vec![h, d], lin(h));
                push(format!("{p}.ffn.b2"), vec![d], Init::Constant(0.0));
            }
            push(format!("{prefix}.out_ln.gamma"), vec![d], Init::Constant(1.0));
            push(format!("{prefix}.out_ln.beta"), vec![d], Init::Constant(0.0));
        }

        let (g, a) = (self.geometry.dim, self.appearance.dim);
        push("align.style.weight".into(), vec![2 * a, 2 * g], lin(2 * a));
        push("align.style.bias".into(), vec![2 * g], Init::Constant(0.0));
        push("align.refine.weight".into(), vec![1, 1, g, g], lin(g));
        push("align.refine.bias".into(), vec![g], Init::Constant(0.0));

        let u = &self.unet.widths;
        let mut cin = self.coarse_channels();
        for (i, &w) in u.iter().enumerate() {
            push(format!("unet.enc{i}.weight"), vec![3, 3, cin, w], he(9 * cin));
            push(format!("unet.enc{i}.bias"), vec![w], Init::Constant(0.0));
            cin = w;
        }
        // Decoder level j runs at synthesis resolution j and emits that
        // layer's spatial modulation map.
        let s = &self.synthesis;
        let n = s.resolutions.len();
        for j in 0..n {
            let skip = if j + 1 < n { u[n - 2 - j] } else { self.coarse_channels() };
            let cin = if j == 0 { *u.last().unwrap() } else { s.widths[j - 1] + skip };
            push(format!("unet.dec{j}.weight"), vec![3, 3, cin, s.widths[j]], he(9 * cin));
            push(format!("unet.dec{j}.bias"), vec![s.widths[j]], Init::Constant(0.0));
        }

        let mi = self.mapping_input();
        push("mapping.fc0.weight".into(), vec![mi, s.mapping_hidden], he(mi));
        push("mapping.fc0.bias".into(), vec![s.mapping_hidden], Init::Constant(0.0));
        push("mapping.fc1.weight".into(), vec![s.mapping_hidden, n * s.style_dim], lin(s.mapping_hidden));
        push("mapping.fc1.bias".into(), vec![n * s.style_dim], Init::Constant(0.0));

        push("synthesis.const".into(), vec![s.resolutions[0], s.resolutions[0], s.widths[0]], Init::Normal(1.0));
        for k in 0..n {
            let cin = if k == 0 { s.widths[0] } else { s.widths[k - 1] };
            let p = format!("synthesis.layer{k}");
            push(format!("{p}.affine.weight"), vec![s.style_dim, cin], lin(s.style_dim));
            push(format!("{p}.affine.bias"), vec![cin], Init::Constant(1.0));
            push(format!("{p}.conv.weight"), vec![3, 3, cin, s.widths[k]], Init::Normal(1.0));
            push(format!("{p}.conv.bias"), vec![s.widths[k]], Init::Constant(0.0));
        }
        let last = *s.widths.last().unwrap();
        push("synthesis.output.affine.weight".into(), vec![s.style_dim, last], lin(s.style_dim));
        push("synthesis.output.affine.bias".into(), vec![last], Init::Constant(1.0));
        let gains = self.output.gain.iter().map(|g| g / (last as f32).sqrt()).collect();
        push("synthesis.output.conv.weight".into(), vec![1, 1, last, ATTRIBUTE_CHANNELS], Init::NormalPerColumn(gains));
        push("synthesis.output.conv.bias".into(), vec![ATTRIBUTE_CHANNELS], Init::Values(self.output.bias.clone()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_spec_parses_and_is_consistent() {
        let a = ArchSpec::toy();
        assert_eq!(a.layer_count(), 6);
        assert_eq!(a.synthesis.resolutions, vec![4, 8, 16, 32, 64, 128]);
        assert_eq!(a.coarse_channels(), 32);
        let layers = a.layers();
        let mut names: Vec<_> = layers.iter().map(|l| l.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), layers.len(), "duplicate layer names");
    }

    #[test]
    fn fingerprint_ignores_formatting() {
        let a = ArchSpec::toy();
        let b = ArchSpec::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.geometry.blocks = 3;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn rejects_inconsistent_specs() {
        let base = ArchSpec::toy().to_toml_string();
        let bad = base.replace("resolutions = [4, 8, 16, 32, 64, 128]", "resolutions = [4, 8, 16, 32, 64, 100]");
        assert!(ArchSpec::from_toml_str(&bad).is_err());
        assert!(ArchSpec::from_toml_str("version = 2").is_err());
    }
}
