//! Row-major `f32` tensors and the handful of dense kernels the toy networks
//! need. Spatial maps are stored height × width × channels.

use rayon::prelude::*;

use crate::error::{NeuralError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NeuralError::Dimension(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn filled(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![value; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Last-axis length.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn expect_shape(&self, what: &str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(NeuralError::Dimension(format!("{what}: expected {shape:?}, got {:?}", self.shape)));
        }
        Ok(())
    }

    pub fn expect_rank(&self, what: &str, rank: usize) -> Result<()> {
        if self.shape.len() != rank {
            return Err(NeuralError::Dimension(format!("{what}: expected rank {rank}, got {:?}", self.shape)));
        }
        Ok(())
    }

    /// `(H, W, C)` of a rank-3 map.
    pub fn hwc(&self) -> Result<(usize, usize, usize)> {
        self.expect_rank("feature map", 3)?;
        Ok((self.shape[0], self.shape[1], self.shape[2]))
    }

    pub fn map(mut self, f: impl Fn(f32) -> f32) -> Self {
        self.data.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(NeuralError::Dimension(format!("add: {:?} vs {:?}", self.shape, other.shape)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    /// Concatenates rank-2 tensors along rows.
    pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
        let cols = parts.first().map_or(0, |t| t.cols());
        let mut data = Vec::new();
        let mut rows = 0;
        for t in parts {
            t.expect_rank("concat_rows", 2)?;
            if t.cols() != cols {
                return Err(NeuralError::Dimension(format!("concat_rows: {} vs {cols} columns", t.cols())));
            }
            rows += t.rows();
            data.extend_from_slice(&t.data);
        }
        Tensor::new(vec![rows, cols], data)
    }

    /// Concatenates rank-3 maps along channels.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (h, w, ca) = a.hwc()?;
        let (hb, wb, cb) = b.hwc()?;
        if (h, w) != (hb, wb) {
            return Err(NeuralError::Dimension(format!("concat_channels: {h}x{w} vs {hb}x{wb}")));
        }
        let mut data = Vec::with_capacity(h * w * (ca + cb));
        for (pa, pb) in a.data.chunks_exact(ca).zip(b.data.chunks_exact(cb)) {
            data.extend_from_slice(pa);
            data.extend_from_slice(pb);
        }
        Tensor::new(vec![h, w, ca + cb], data)
    }

    /// Rows `start..end` of a rank-2 tensor.
    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor {
        let c = self.cols();
        Tensor { shape: vec![end - start, c], data: self.data[start * c..end * c].to_vec() }
    }

    pub fn mean_rows(&self) -> Vec<f32> {
        let c = self.cols();
        let n = self.rows().max(1);
        let mut out = vec![0.0f32; c];
        for r in self.data.chunks_exact(c) {
            out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o /= n as f32);
        out
    }
}

pub fn leaky_relu(x: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        0.2 * x
    }
}

/// `x · w + b` for `x: [N, I]`, `w: [I, O]`, `b: [O]`.
pub fn linear(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    x.expect_rank("linear input", 2)?;
    w.expect_rank("linear weight", 2)?;
    let (n, i) = (x.shape[0], x.shape[1]);
    let (wi, o) = (w.shape[0], w.shape[1]);
    if wi != i {
        return Err(NeuralError::Dimension(format!("linear: input width {i} vs weight rows {wi}")));
    }
    if let Some(b) = b {
        b.expect_shape("linear bias", &[o])?;
    }
    let mut out = vec![0.0f32; n * o];
    let body = |(row, dst): (usize, &mut [f32])| {
        if let Some(b) = b {
            dst.copy_from_slice(&b.data);
        }
        for (k, &xv) in x.data[row * i..(row + 1) * i].iter().enumerate() {
            let wr = &w.data[k * o..(k + 1) * o];
            dst.iter_mut().zip(wr).for_each(|(d, wv)| *d += xv * wv);
        }
    };
    if n * i * o > 1 << 16 {
        out.par_chunks_mut(o.max(1)).enumerate().for_each(body);
    } else {
        out.chunks_mut(o.max(1)).enumerate().for_each(body);
    }
    Tensor::new(vec![n, o], out)
}

/// `a · bᵀ` for `a: [N, D]`, `b: [M, D]`.
pub fn matmul_transposed(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.expect_rank("matmul lhs", 2)?;
    b.expect_rank("matmul rhs", 2)?;
    let (n, d, m) = (a.shape[0], a.shape[1], b.shape[0]);
    if b.shape[1] != d {
        return Err(NeuralError::Dimension(format!("matmul: inner {d} vs {}", b.shape[1])));
    }
    let mut out = vec![0.0f32; n * m];
    out.par_chunks_mut(m.max(1)).enumerate().for_each(|(r, dst)| {
        let ar = &a.data[r * d..(r + 1) * d];
        for (j, o) in dst.iter_mut().enumerate() {
            let br = &b.data[j * d..(j + 1) * d];
            *o = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        }
    });
    Tensor::new(vec![n, m], out)
}

/// In-place numerically stable softmax over each row.
pub fn softmax_rows(t: &mut Tensor) {
    let c = t.cols();
    for row in t.data.chunks_exact_mut(c) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        row.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Layer normalization over the last axis with learned gain and bias.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
    let c = x.cols();
    gamma.expect_shape("layer_norm gamma", &[c])?;
    beta.expect_shape("layer_norm beta", &[c])?;
    let mut data = x.data.clone();
    for row in data.chunks_exact_mut(c) {
        let mean = row.iter().sum::<f32>() / c as f32;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / c as f32;
        let inv = 1.0 / (var + 1e-5).sqrt();
        for ((v, g), b) in row.iter_mut().zip(&gamma.data).zip(&beta.data) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    Tensor::new(x.shape.clone(), data)
}

/// 2-D convolution over an `[H, W, Cin]` map with weight `[K, K, Cin, Cout]`
/// and zero padding. Output rows are computed in parallel.
pub fn conv2d(x: &Tensor, w: &Tensor, b: Option<&Tensor>, stride: usize, pad: usize) -> Result<Tensor> {
    let (h, wd, cin) = x.hwc()?;
    w.expect_rank("conv weight", 4)?;
    let (k, k2, wc, cout) = (w.shape[0], w.shape[1], w.shape[2], w.shape[3]);
    if k != k2 || wc != cin {
        return Err(NeuralError::Dimension(format!("conv2d: weight {:?} for {cin} input channels", w.shape)));
    }
    if let Some(b) = b {
        b.expect_shape("conv bias", &[cout])?;
    }
    if stride == 0 || h + 2 * pad < k || wd + 2 * pad < k {
        return Err(NeuralError::Dimension(format!("conv2d: kernel {k} stride {stride} on {h}x{wd}")));
    }
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (wd + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0f32; ho * wo * cout];
    out.par_chunks_mut(wo * cout).enumerate().for_each(|(oy, row)| {
        for ox in 0..wo {
            let dst = &mut row[ox * cout..(ox + 1) * cout];
            if let Some(b) = b {
                dst.copy_from_slice(&b.data);
            }
            for ky in 0..k {
                let iy = (oy * stride + ky) as isize - pad as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * stride + kx) as isize - pad as isize;
                    if ix < 0 || ix >= wd as isize {
                        continue;
                    }
                    let src = &x.data[(iy as usize * wd + ix as usize) * cin..][..cin];
                    let wbase = (ky * k + kx) * cin * cout;
                    for (ci, &xv) in src.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let wr = &w.data[wbase + ci * cout..][..cout];
                        dst.iter_mut().zip(wr).for_each(|(d, wv)| *d += xv * wv);
                    }
                }
            }
        }
    });
    Tensor::new(vec![ho, wo, cout], out)
}

/// Nearest-neighbour ×2 upsampling of an `[H, W, C]` map.
pub fn upsample2x(x: &Tensor) -> Result<Tensor> {
    let (h, w, c) = x.hwc()?;
    let mut data = Vec::with_capacity(4 * h * w * c);
    for y in 0..2 * h {
        for xx in 0..2 * w {
            data.extend_from_slice(&x.data[((y / 2) * w + xx / 2) * c..][..c]);
        }
    }
    Tensor::new(vec![2 * h, 2 * w, c], data)
}

/// Per-channel mean and (population) standard deviation of an `[H, W, C]`
/// map, optionally restricted to positions where `mask` is true.
pub fn channel_stats(x: &Tensor, mask: Option<&[bool]>) -> Result<(Vec<f32>, Vec<f32>)> {
    let (h, w, c) = x.hwc()?;
    if let Some(m) = mask {
        if m.len() != h * w {
            return Err(NeuralError::Dimension(format!("stats mask {} vs {}", m.len(), h * w)));
        }
    }
    let mut sum = vec![0.0f64; c];
    let mut sq = vec![0.0f64; c];
    let mut n = 0usize;
    for (i, px) in x.data.chunks_exact(c).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        n += 1;
        for ((s, q), &v) in sum.iter_mut().zip(sq.iter_mut()).zip(px) {
            *s += v as f64;
            *q += (v as f64) * (v as f64);
        }
    }
    let n = n.max(1) as f64;
    let mean: Vec<f32> = sum.iter().map(|s| (s / n) as f32).collect();
    let std = sum
        .iter()
        .zip(&sq)
        .map(|(s, q)| {
            let m = s / n;
            ((q / n - m * m).max(0.0)).sqrt() as f32
        })
        .collect();
    Ok((mean, std))
}
