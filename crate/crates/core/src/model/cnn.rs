//! Compact trainable CNN: `[conv k×k → ReLU → 2×2 max-pool]*`, global
//! average pool, a ReLU embedding layer and a linear two-class head.
//!
//! Activations are channel-last (`N × H × W × C`) so a convolution is one
//! matrix product between an im2col buffer and the `(k·k·Cin) × Cout` weight.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::MultiBandImage;
use crate::linalg::{gemm, Op};
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnConfig {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    /// Output channels of each conv stage.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub embed_dim: usize,
}

impl CnnConfig {
    /// Two 3×3 stages of 16 and 32 channels and a 64-wide embedding.
    pub fn compact(input_channels: usize, input_size: usize) -> Self {
        Self {
            input_channels,
            input_height: input_size,
            input_width: input_size,
            conv_channels: vec![16, 32],
            kernel: 3,
            embed_dim: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.input_height == 0 || self.input_width == 0 {
            return Err(Error::Argument("network input shape must be positive".into()));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::Argument("need at least one conv stage with positive width".into()));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::Argument(format!("kernel size {} must be odd", self.kernel)));
        }
        if self.embed_dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        Ok(())
    }

    /// Spatial size entering each conv stage plus the final pooled size.
    fn spatial_sizes(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![(self.input_height, self.input_width)];
        for _ in &self.conv_channels {
            let (h, w) = *sizes.last().unwrap();
            sizes.push((h.div_ceil(2), w.div_ceil(2)));
        }
        sizes
    }

    fn feature_dim(&self) -> usize {
        *self.conv_channels.last().unwrap()
    }
}

/// A named flat parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    fn zeros(name: String, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name,
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Embedding rows and two-class logits.
pub type Inference = (Vec<Vec<f64>>, Vec<[f64; 2]>);

#[derive(Debug, Clone, PartialEq)]
pub struct CompactCnn {
    config: CnnConfig,
    params: Vec<Param>,
}

/// Per-stage values kept for the backward pass.
#[derive(Debug, Clone)]
struct StageCache {
    cols: Vec<f64>,
    /// Post-ReLU activations before pooling.
    act: Vec<f64>,
    /// For every pooled output, the index of the winning activation.
    argmax: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    stages: Vec<StageCache>,
    features: Vec<f64>,
    embeddings: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Row-major `N × embed_dim`.
    pub embeddings: Vec<f64>,
    pub logits: Vec<[f64; 2]>,
    pub cache: ForwardCache,
}

impl ForwardOutput {
    pub fn embedding(&self, row: usize, dim: usize) -> &[f64] {
        &self.embeddings[row * dim..(row + 1) * dim]
    }
}

impl CompactCnn {
    /// All parameters zero.
    pub fn zeros(config: CnnConfig) -> Result<Self> {
        config.validate()?;
        let k = config.kernel;
        let mut params = Vec::new();
        let mut cin = config.input_channels;
        for (i, &cout) in config.conv_channels.iter().enumerate() {
            params.push(Param::zeros(format!("conv{i}.weight"), vec![k, k, cin, cout]));
            params.push(Param::zeros(format!("conv{i}.bias"), vec![cout]));
            cin = cout;
        }
        let (f, e) = (config.feature_dim(), config.embed_dim);
        params.push(Param::zeros("embed.weight".into(), vec![f, e]));
        params.push(Param::zeros("embed.bias".into(), vec![e]));
        params.push(Param::zeros("head.weight".into(), vec![e, 2]));
        params.push(Param::zeros("head.bias".into(), vec![2]));
        Ok(Self { config, params })
    }

    /// He-uniform weights (`U(±sqrt(6 / fan_in))`) and zero biases.
    pub fn new(config: CnnConfig, rng: &mut RngState) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        for p in net.params.iter_mut().filter(|p| p.name.ends_with(".weight")) {
            let fan_in: usize = p.shape[..p.shape.len() - 1].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in &mut p.data {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from tensors in [`CompactCnn::params`] order.
    pub fn from_params(config: CnnConfig, params: Vec<Param>) -> Result<Self> {
        let template = Self::zeros(config)?;
        if template.params.len() != params.len() {
            return Err(Error::Dimension(format!(
                "expected {} tensors, got {}",
                template.params.len(),
                params.len()
            )));
        }
        for (t, p) in template.params.iter().zip(&params) {
            if t.name != p.name || t.shape != p.shape || p.data.len() != t.data.len() {
                return Err(Error::Dimension(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    p.name, p.shape, t.name, t.shape
                )));
            }
            if p.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("tensor {} has non-finite values", p.name)));
            }
        }
        Ok(Self {
            config: template.config,
            params,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    /// Rounds every parameter to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            for v in &mut p.data {
                *v = *v as f32 as f64;
            }
        }
    }

    fn conv(&self, stage: usize) -> (&[f64], &[f64]) {
        (&self.params[2 * stage].data, &self.params[2 * stage + 1].data)
    }

    fn tail(&self) -> [&[f64]; 4] {
        let n = self.params.len();
        [
            &self.params[n - 4].data,
            &self.params[n - 3].data,
            &self.params[n - 2].data,
            &self.params[n - 1].data,
        ]
    }

    fn pack(&self, images: &[MultiBandImage]) -> Result<Vec<f64>> {
        let want = (self.config.input_height, self.config.input_width, self.config.input_channels);
        let mut x = Vec::with_capacity(images.len() * want.0 * want.1 * want.2);
        for img in images {
            if img.shape() != want {
                return Err(Error::Dimension(format!(
                    "network expects {want:?} inputs, got {:?}",
                    img.shape()
                )));
            }
            x.extend_from_slice(img.data());
        }
        Ok(x)
    }

    /// Forward pass over a batch, keeping what backpropagation needs.
    pub fn forward(&self, images: &[MultiBandImage]) -> Result<ForwardOutput> {
        if images.is_empty() {
            return Err(Error::EmptyDataset("forward pass on an empty batch".into()));
        }
        let n = images.len();
        let k = self.config.kernel;
        let sizes = self.config.spatial_sizes();
        let mut x = self.pack(images)?;
        let mut cin = self.config.input_channels;
        let mut stages = Vec::with_capacity(self.config.conv_channels.len());

        for (s, &cout) in self.config.conv_channels.iter().enumerate() {
            let (h, w) = sizes[s];
            let rows = n * h * w;
            let cols = im2col(&x, n, h, w, cin, k);
            let (weight, bias) = self.conv(s);
            let mut act = vec![0.0; rows * cout];
            for row in act.chunks_exact_mut(cout) {
                row.copy_from_slice(bias);
            }
            gemm(rows, k * k * cin, cout, &cols, Op::N, weight, Op::N, &mut act, true);
            for v in &mut act {
                *v = v.max(0.0);
            }
            let (pooled, argmax) = max_pool(&act, n, h, w, cout);
            stages.push(StageCache { cols, act, argmax });
            x = pooled;
            cin = cout;
        }

        // Global average pool.
        let (ph, pw) = *sizes.last().unwrap();
        let npix = ph * pw;
        let fdim = cin;
        let mut features = vec![0.0; n * fdim];
        for (b, feat) in features.chunks_exact_mut(fdim).enumerate() {
            for px in x[b * npix * fdim..(b + 1) * npix * fdim].chunks_exact(fdim) {
                for (f, v) in feat.iter_mut().zip(px) {
                    *f += v;
                }
            }
            for f in feat.iter_mut() {
                *f /= npix as f64;
            }
        }

        let [ew, eb, hw, hb] = self.tail();
        let edim = self.config.embed_dim;
        let mut embeddings = vec![0.0; n * edim];
        for row in embeddings.chunks_exact_mut(edim) {
            row.copy_from_slice(eb);
        }
        gemm(n, fdim, edim, &features, Op::N, ew, Op::N, &mut embeddings, true);
        for v in &mut embeddings {
            *v = v.max(0.0);
        }
        let mut flat_logits = vec![0.0; n * 2];
        for row in flat_logits.chunks_exact_mut(2) {
            row.copy_from_slice(hb);
        }
        gemm(n, edim, 2, &embeddings, Op::N, hw, Op::N, &mut flat_logits, true);
        let logits = flat_logits.chunks_exact(2).map(|r| [r[0], r[1]]).collect();

        Ok(ForwardOutput {
            embeddings: embeddings.clone(),
            logits,
            cache: ForwardCache {
                batch: n,
                stages,
                features,
                embeddings,
            },
        })
    }

    /// Gradients of the loss for every parameter, given `dL/dlogits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
        let n = cache.batch;
        if dlogits.len() != n {
            return Err(Error::Dimension(format!(
                "{} logit gradients for a batch of {n}",
                dlogits.len()
            )));
        }
        let k = self.config.kernel;
        let sizes = self.config.spatial_sizes();
        let edim = self.config.embed_dim;
        let fdim = self.config.feature_dim();
        let [ew, _, hw, _] = self.tail();
        let mut grads: Vec<Vec<f64>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        let np = grads.len();

        let dl: Vec<f64> = dlogits.iter().flatten().copied().collect();
        // Head.
        gemm(edim, n, 2, &cache.embeddings, Op::T, &dl, Op::N, &mut grads[np - 2], false);
        grads[np - 1] = column_sums(&dl, 2);
        let mut demb = vec![0.0; n * edim];
        gemm(n, 2, edim, &dl, Op::N, hw, Op::T, &mut demb, false);
        for (d, e) in demb.iter_mut().zip(&cache.embeddings) {
            if *e <= 0.0 {
                *d = 0.0;
            }
        }
        // Embedding layer.
        gemm(fdim, n, edim, &cache.features, Op::T, &demb, Op::N, &mut grads[np - 4], false);
        grads[np - 3] = column_sums(&demb, edim);
        let mut dfeat = vec![0.0; n * fdim];
        gemm(n, edim, fdim, &demb, Op::N, ew, Op::T, &mut dfeat, false);

        // Global average pool: spread evenly over the last pooled map.
        let (ph, pw) = *sizes.last().unwrap();
        let npix = ph * pw;
        let mut dpooled = vec![0.0; n * npix * fdim];
        for b in 0..n {
            let g = &dfeat[b * fdim..(b + 1) * fdim];
            for px in dpooled[b * npix * fdim..(b + 1) * npix * fdim].chunks_exact_mut(fdim) {
                for (d, gv) in px.iter_mut().zip(g) {
                    *d = gv / npix as f64;
                }
            }
        }

        let mut cout = fdim;
        for s in (0..self.config.conv_channels.len()).rev() {
            let cin = if s == 0 {
                self.config.input_channels
            } else {
                self.config.conv_channels[s - 1]
            };
            let (h, w) = sizes[s];
            let rows = n * h * w;
            let st = &cache.stages[s];
            let mut dact = vec![0.0; rows * cout];
            for (&idx, &g) in st.argmax.iter().zip(&dpooled) {
                dact[idx] += g;
            }
            for (d, a) in dact.iter_mut().zip(&st.act) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let kk = k * k * cin;
            gemm(kk, rows, cout, &st.cols, Op::T, &dact, Op::N, &mut grads[2 * s], false);
            grads[2 * s + 1] = column_sums(&dact, cout);
            if s > 0 {
                let mut dcols = vec![0.0; rows * kk];
                let (weight, _) = self.conv(s);
                gemm(rows, cout, kk, &dact, Op::N, weight, Op::T, &mut dcols, false);
                dpooled = col2im(&dcols, n, h, w, cin, k);
            }
            cout = cin;
        }
        Ok(grads)
    }

    /// Embeddings and logits without keeping a cache, in chunks of `chunk`.
    pub fn infer(&self, images: &[MultiBandImage], chunk: usize) -> Result<Inference> {
        let mut emb = Vec::with_capacity(images.len());
        let mut logits = Vec::with_capacity(images.len());
        let d = self.config.embed_dim;
        for part in images.chunks(chunk.max(1)) {
            let out = self.forward(part)?;
            emb.extend(out.embeddings.chunks_exact(d).map(<[f64]>::to_vec));
            logits.extend(out.logits);
        }
        Ok((emb, logits))
    }
}

fn column_sums(m: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for row in m.chunks_exact(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

/// Rows are output pixels `(b, y, x)`; columns are `(ky, kx, c)` taps with
/// zero "same" padding.
fn im2col(x: &[f64], n: usize, h: usize, w: usize, c: usize, k: usize) -> Vec<f64> {
    let pad = k / 2;
    let kk = k * k * c;
    let mut cols = vec![0.0; n * h * w * kk];
    for b in 0..n {
        for y in 0..h {
            for xx in 0..w {
                let row = &mut cols[((b * h + y) * w + xx) * kk..][..kk];
                for ky in 0..k {
                    let iy = y + ky;
                    if iy < pad || iy - pad >= h {
                        continue;
                    }
                    let iy = iy - pad;
                    for kx in 0..k {
                        let ix = xx + kx;
                        if ix < pad || ix - pad >= w {
                            continue;
                        }
                        let ix = ix - pad;
                        let src = ((b * h + iy) * w + ix) * c;
                        row[(ky * k + kx) * c..][..c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im(cols: &[f64], n: usize, h: usize, w: usize, c: usize, k: usize) -> Vec<f64> {
    let pad = k / 2;
    let kk = k * k * c;
    let mut x = vec![0.0; n * h * w * c];
    for b in 0..n {
        for y in 0..h {
            for xx in 0..w {
                let row = &cols[((b * h + y) * w + xx) * kk..][..kk];
                for ky in 0..k {
                    let iy = y + ky;
                    if iy < pad || iy - pad >= h {
                        continue;
                    }
                    let iy = iy - pad;
                    for kx in 0..k {
                        let ix = xx + kx;
                        if ix < pad || ix - pad >= w {
                            continue;
                        }
                        let ix = ix - pad;
                        let dst = ((b * h + iy) * w + ix) * c;
                        for (d, v) in x[dst..dst + c].iter_mut().zip(&row[(ky * k + kx) * c..][..c]) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
    x
}

/// 2×2 stride-2 max pool; odd edges form partial windows. First maximum wins.
fn max_pool(act: &[f64], n: usize, h: usize, w: usize, c: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = vec![f64::NEG_INFINITY; n * oh * ow * c];
    let mut arg = vec![0usize; n * oh * ow * c];
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o = ((b * oh + oy) * ow + ox) * c;
                for y in 2 * oy..(2 * oy + 2).min(h) {
                    for x in 2 * ox..(2 * ox + 2).min(w) {
                        let i = ((b * h + y) * w + x) * c;
                        for ch in 0..c {
                            if act[i + ch] > out[o + ch] {
                                out[o + ch] = act[i + ch];
                                arg[o + ch] = i + ch;
                            }
                        }
                    }
                }
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> CnnConfig {
        CnnConfig {
            input_channels: 2,
            input_height: 1,
            input_width: 1,
            conv_channels: vec![2],
            kernel: 1,
            embed_dim: 2,
        }
    }

    #[test]
    fn parameter_layout() {
        let net = CompactCnn::zeros(CnnConfig::compact(12, 32)).unwrap();
        let names: Vec<_> = net.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            ["conv0.weight", "conv0.bias", "conv1.weight", "conv1.bias", "embed.weight", "embed.bias", "head.weight", "head.bias"]
        );
        assert_eq!(net.param("conv1.weight").unwrap().shape, vec![3, 3, 16, 32]);
        assert_eq!(net.param("embed.weight").unwrap().shape, vec![32, 64]);
        assert_eq!(net.num_parameters(), 3 * 3 * 12 * 16 + 16 + 3 * 3 * 16 * 32 + 32 + 32 * 64 + 64 + 64 * 2 + 2);
    }

    #[test]
    fn zero_head_gives_even_logits() {
        let mut net = CompactCnn::new(CnnConfig::compact(3, 8), &mut RngState::new(1)).unwrap();
        for name in ["head.weight", "head.bias"] {
            net.param_mut(name).unwrap().data.fill(0.0);
        }
        let img = MultiBandImage::from_fn(8, 8, 3, |r, c, b| (r * c + b) as f64 * 0.1).unwrap();
        let out = net.forward(&[img.clone(), img]).unwrap();
        for l in &out.logits {
            assert_eq!(*l, [0.0, 0.0]);
        }
    }

    #[test]
    fn duplicated_rows_identical() {
        let net = CompactCnn::new(CnnConfig::compact(2, 6), &mut RngState::new(4)).unwrap();
        let a = MultiBandImage::from_fn(6, 6, 2, |r, c, b| ((r + 2 * c + b) % 5) as f64 - 2.0).unwrap();
        let b = MultiBandImage::from_fn(6, 6, 2, |r, c, _| (r as f64 - c as f64) * 0.3).unwrap();
        let out = net.forward(&[a.clone(), b, a]).unwrap();
        assert_eq!(out.logits[0], out.logits[2]);
        assert_eq!(out.embedding(0, 64), out.embedding(2, 64));
    }

    #[test]
    fn tiny_network_by_hand() {
        // x = (1, -2); conv 1×1: W = [[1, 2], [3, -1]] (rows = input channel), b = (0.5, 0)
        // z = (1*1 + -2*3 + 0.5, 1*2 + -2*-1) = (-4.5, 4) -> relu (0, 4)
        // embed: We = [[1, 0], [0.5, -1]], be = (0, 1): (0 + 2, 0 - 4 + 1) = (2, -3) -> (2, 0)
        // head: Wh = [[1, -1], [2, 2]], bh = (0.25, 0): (2.25, -2)
        let mut net = CompactCnn::zeros(tiny_config()).unwrap();
        net.param_mut("conv0.weight").unwrap().data = vec![1.0, 2.0, 3.0, -1.0];
        net.param_mut("conv0.bias").unwrap().data = vec![0.5, 0.0];
        net.param_mut("embed.weight").unwrap().data = vec![1.0, 0.0, 0.5, -1.0];
        net.param_mut("embed.bias").unwrap().data = vec![0.0, 1.0];
        net.param_mut("head.weight").unwrap().data = vec![1.0, -1.0, 2.0, 2.0];
        net.param_mut("head.bias").unwrap().data = vec![0.25, 0.0];
        let img = MultiBandImage::new(1, 1, 2, vec![1.0, -2.0]).unwrap();
        let out = net.forward(&[img]).unwrap();
        assert_eq!(out.embeddings, vec![2.0, 0.0]);
        assert_eq!(out.logits, vec![[2.25, -2.0]]);
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), y> == <x, col2im(y)>
        let (n, h, w, c, k) = (2, 3, 4, 2, 3);
        let x: Vec<f64> = (0..n * h * w * c).map(|i| (i as f64 * 0.37).sin()).collect();
        let cols = im2col(&x, n, h, w, c, k);
        let y: Vec<f64> = (0..cols.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, n, h, w, c, k)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn odd_pooling_keeps_edges() {
        let act: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let (out, arg) = max_pool(&act, 1, 3, 3, 1);
        assert_eq!(out, vec![4.0, 5.0, 7.0, 8.0]);
        assert_eq!(arg, vec![4, 5, 7, 8]);
    }

    #[test]
    fn wrong_input_shape() {
        let net = CompactCnn::zeros(CnnConfig::compact(3, 8)).unwrap();
        assert!(matches!(
            net.forward(&[MultiBandImage::zeros(8, 8, 2)]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn from_params_checks_layout() {
        let net = CompactCnn::new(CnnConfig::compact(2, 4), &mut RngState::new(0)).unwrap();
        let rebuilt = CompactCnn::from_params(net.config().clone(), net.params().to_vec()).unwrap();
        assert_eq!(rebuilt, net);
        let mut params = net.params().to_vec();
        params.swap(0, 1);
        assert!(CompactCnn::from_params(net.config().clone(), params).is_err());
    }
}
