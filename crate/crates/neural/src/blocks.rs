//! Network blocks: AdaIN, cross-attention, feed-forward, and the
//! style-modulated synthesis layer.

use splathead_core::UvFeatureMap;

use crate::error::{NeuralError, Result};
use crate::tensor::{conv2d, layer_norm, leaky_relu, linear, matmul_transposed, softmax_rows, upsample2x, Tensor};
use crate::weights::WeightStore;

/// Floor applied to standard deviations before dividing by them.
pub const STD_EPS: f32 = 1e-8;

/// Per-channel target statistics for [`adain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl ChannelStats {
    /// Statistics of an `[H, W, C]` map, optionally over masked positions only.
    pub fn of(x: &Tensor, mask: Option<&[bool]>) -> Result<Self> {
        let (mean, std) = crate::tensor::channel_stats(x, mask)?;
        Ok(Self { mean, std })
    }
}

/// Adaptive instance normalization: each channel of `content` is normalized
/// to zero mean and unit deviation, then scaled and shifted to `style`.
///
/// With a mask, statistics are taken over masked positions only and the
/// remaining positions are written as zero.
pub fn adain(content: &Tensor, style: &ChannelStats, mask: Option<&[bool]>) -> Result<Tensor> {
    let (_, _, c) = content.hwc()?;
    if style.mean.len() != c || style.std.len() != c {
        return Err(NeuralError::Dimension(format!(
            "adain: {c} content channels, style has {}/{}",
            style.mean.len(),
            style.std.len()
        )));
    }
    let own = ChannelStats::of(content, mask)?;
    let scale: Vec<f32> = (0..c).map(|k| style.std[k] / own.std[k].max(STD_EPS)).collect();
    let mut out = content.clone();
    for (i, px) in out.data_mut().chunks_exact_mut(c).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            px.fill(0.0);
            continue;
        }
        for k in 0..c {
            px[k] = (px[k] - own.mean[k]) * scale[k] + style.mean[k];
        }
    }
    Ok(out)
}

/// Scaled dot-product attention on already projected `q: [N, D]`,
/// `k, v: [M, D]`, split into `heads` column groups. Returns the attended
/// values `[N, D]` and the attention probabilities `[heads·N, M]`.
pub fn attend(q: &Tensor, k: &Tensor, v: &Tensor, heads: usize) -> Result<(Tensor, Tensor)> {
    q.expect_rank("attention queries", 2)?;
    k.expect_rank("attention keys", 2)?;
    v.expect_rank("attention values", 2)?;
    let (n, d) = (q.rows(), q.cols());
    let m = k.rows();
    if k.cols() != d || v.cols() != d || v.rows() != m {
        return Err(NeuralError::Dimension(format!(
            "attention: q {:?}, k {:?}, v {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    if heads == 0 || d % heads != 0 {
        return Err(NeuralError::Dimension(format!("{heads} heads do not divide width {d}")));
    }
    let dh = d / heads;
    let split = |t: &Tensor, h: usize| -> Tensor {
        let rows = t.rows();
        let data = (0..rows).flat_map(|r| t.row(r)[h * dh..(h + 1) * dh].iter().copied()).collect();
        Tensor::new(vec![rows, dh], data).expect("head split shape")
    };
    let inv = 1.0 / (dh as f32).sqrt();
    let mut out = vec![0.0f32; n * d];
    let mut probs = Vec::with_capacity(heads * n * m);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 { (q.clone(), k.clone(), v.clone()) } else { (split(q, h), split(k, h), split(v, h)) };
        let mut s = matmul_transposed(&qh, &kh)?.map(|x| x * inv);
        softmax_rows(&mut s);
        for r in 0..n {
            let dst = &mut out[r * d + h * dh..r * d + (h + 1) * dh];
            for (j, &p) in s.row(r).iter().enumerate() {
                dst.iter_mut().zip(vh.row(j)).for_each(|(o, vv)| *o += p * vv);
            }
        }
        probs.extend_from_slice(s.data());
    }
    Ok((Tensor::new(vec![n, d], out)?, Tensor::new(vec![heads * n, m], probs)?))
}

/// Projection matrices of one attention layer.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights<'a> {
    pub wq: &'a Tensor,
    pub wk: &'a Tensor,
    pub wv: &'a Tensor,
    pub wo: &'a Tensor,
    pub heads: usize,
}

impl<'a> AttentionWeights<'a> {
    pub fn from_store(store: &'a WeightStore, prefix: &str, heads: usize) -> Result<Self> {
        Ok(Self {
            wq: store.get(&format!("{prefix}.wq"))?,
            wk: store.get(&format!("{prefix}.wk"))?,
            wv: store.get(&format!("{prefix}.wv"))?,
            wo: store.get(&format!("{prefix}.wo"))?,
            heads,
        })
    }
}

/// Queries attend to `keys_values`; the attended values pass through the
/// output projection.
pub fn cross_attention(queries: &Tensor, keys_values: &Tensor, w: &AttentionWeights) -> Result<Tensor> {
    if queries.cols() != keys_values.cols() {
        return Err(NeuralError::Dimension(format!(
            "cross_attention: query width {} vs key/value width {}",
            queries.cols(),
            keys_values.cols()
        )));
    }
    let q = linear(queries, w.wq, None)?;
    let k = linear(keys_values, w.wk, None)?;
    let v = linear(keys_values, w.wv, None)?;
    let (attended, _) = attend(&q, &k, &v, w.heads)?;
    linear(&attended, w.wo, None)
}

/// Two-layer feed-forward network with a leaky rectifier in between.
pub fn feed_forward(x: &Tensor, store: &WeightStore, prefix: &str) -> Result<Tensor> {
    let h = linear(x, store.get(&format!("{prefix}.w1"))?, Some(store.get(&format!("{prefix}.b1"))?))?;
    linear(&h.map(leaky_relu), store.get(&format!("{prefix}.w2"))?, Some(store.get(&format!("{prefix}.b2"))?))
}

pub fn layer_norm_at(x: &Tensor, store: &WeightStore, prefix: &str) -> Result<Tensor> {
    layer_norm(x, store.get(&format!("{prefix}.gamma"))?, store.get(&format!("{prefix}.beta"))?)
}

/// Per-input-channel style scales `latent · A + b`.
fn style_scales(latent: &[f32], affine_w: &Tensor, affine_b: &Tensor) -> Result<Vec<f32>> {
    let x = Tensor::new(vec![1, latent.len()], latent.to_vec())?;
    Ok(linear(&x, affine_w, Some(affine_b))?.into_data())
}

/// One style-modulated convolution layer at `path` in the store
/// (`affine.weight/bias`, `conv.weight/bias`):
///
/// 1. optional nearest ×2 upsampling of `features`,
/// 2. 3×3 convolution whose weights are scaled per input channel by the
///    affine map of `latent`, then demodulated per output channel,
/// 3. addition of `spatial_mod` (at the output resolution),
/// 4. leaky rectifier.
pub fn modulated_synthesis_layer(
    features: &Tensor,
    latent: &[f32],
    spatial_mod: Option<&UvFeatureMap>,
    store: &WeightStore,
    path: &str,
    upsample: bool,
) -> Result<Tensor> {
    let (h, w, cin) = features.hwc()?;
    let conv_w = store.get(&format!("{path}.conv.weight"))?;
    let conv_b = store.get(&format!("{path}.conv.bias"))?;
    let affine_w = store.get(&format!("{path}.affine.weight"))?;
    let affine_b = store.get(&format!("{path}.affine.bias"))?;
    if affine_w.shape() != [latent.len(), cin] || conv_w.shape().len() != 4 || conv_w.shape()[2] != cin {
        return Err(NeuralError::Dimension(format!(
            "{path}: latent {} / features {cin} vs affine {:?}, conv {:?}",
            latent.len(),
            affine_w.shape(),
            conv_w.shape()
        )));
    }
    let (k, cout) = (conv_w.shape()[0], conv_w.shape()[3]);
    let (ho, wo) = if upsample { (2 * h, 2 * w) } else { (h, w) };
    if let Some(m) = spatial_mod {
        if m.resolution() as usize != ho || ho != wo || m.channels() != cout {
            return Err(NeuralError::Dimension(format!(
                "{path}: spatial modulation {}x{}x{} for output {ho}x{wo}x{cout}",
                m.resolution(),
                m.resolution(),
                m.channels()
            )));
        }
    }

    let s = style_scales(latent, affine_w, affine_b)?;
    let mut wmod = conv_w.clone();
    for tap in wmod.data_mut().chunks_exact_mut(cin * cout) {
        for (ci, row) in tap.chunks_exact_mut(cout).enumerate() {
            row.iter_mut().for_each(|v| *v *= s[ci]);
        }
    }
    let mut sq = vec![0.0f32; cout];
    for row in wmod.data().chunks_exact(cout) {
        sq.iter_mut().zip(row).for_each(|(a, v)| *a += v * v);
    }
    let demod: Vec<f32> = sq.iter().map(|a| 1.0 / (a + 1e-8).sqrt()).collect();
    for row in wmod.data_mut().chunks_exact_mut(cout) {
        row.iter_mut().zip(&demod).for_each(|(v, d)| *v *= d);
    }

    let input = if upsample { upsample2x(features)? } else { features.clone() };
    let mut out = conv2d(&input, &wmod, Some(conv_b), 1, k / 2)?;
    if let Some(m) = spatial_mod {
        out.data_mut().iter_mut().zip(m.data()).for_each(|(o, a)| *o += a);
    }
    Ok(out.map(leaky_relu))
}

/// Final modulated 1×1 projection to raw attribute channels: style scaling
/// without demodulation and without a nonlinearity.
pub fn modulated_projection(features: &Tensor, latent: &[f32], store: &WeightStore, path: &str) -> Result<Tensor> {
    let (_, _, cin) = features.hwc()?;
    let conv_w = store.get(&format!("{path}.conv.weight"))?;
    let affine_w = store.get(&format!("{path}.affine.weight"))?;
    if affine_w.shape() != [latent.len(), cin] || conv_w.shape()[..3] != [1, 1, cin] {
        return Err(NeuralError::Dimension(format!("{path}: features {cin}, conv {:?}", conv_w.shape())));
    }
    let s = style_scales(latent, affine_w, store.get(&format!("{path}.affine.bias"))?)?;
    let cout = conv_w.shape()[3];
    let mut wmod = conv_w.clone();
    for (ci, row) in wmod.data_mut().chunks_exact_mut(cout).enumerate() {
        row.iter_mut().for_each(|v| *v *= s[ci]);
    }
    conv2d(features, &wmod, Some(store.get(&format!("{path}.conv.bias"))?), 1, 0)
}
