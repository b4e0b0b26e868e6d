//! Frequency-axis convolutions (kernels are 1 wide in time), batch
//! normalization, ELU, composite layers, gated convolutions and Conv-DC
//! blocks. Tensors are `[batch, channel, time, freq]`.

use crate::error::{Error, Result};
use crate::par;

use super::linalg::{axpy, dot, sigmoid};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; caches kept for backward.
    Train,
    /// Running statistics in batch norm.
    Inference,
}

/// 1×K convolution along frequency with zero padding and stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreqConv {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl FreqConv {
    pub fn out_freq(&self, f_in: usize) -> Result<usize> {
        if f_in + 2 * self.pad < self.kernel || self.stride == 0 {
            return Err(Error::shape(format!("{f_in} bins too few for kernel {} pad {}", self.kernel, self.pad)));
        }
        Ok((f_in + 2 * self.pad - self.kernel) / self.stride + 1)
    }

    pub fn weight_len(&self) -> usize {
        self.c_out * self.c_in * self.kernel
    }

    /// Length of each stride phase of a zero-padded input row.
    fn phase_len(&self, f_in: usize) -> usize {
        (f_in + 2 * self.pad).div_ceil(self.stride)
    }

    /// Start of tap `k` inside a phase-split row: output bin `fo` reads
    /// `row[tap_offset(k) + fo]`.
    fn tap_offset(&self, k: usize, plen: usize) -> usize {
        (k % self.stride) * plen + k / self.stride
    }

    fn check_input(&self, x: &Tensor, exact: bool) -> Result<(usize, usize, usize, usize)> {
        let (b, c, t, f) = x.dims4()?;
        if c < self.c_in || (exact && c != self.c_in) {
            return Err(Error::shape(format!("convolution expects {} input channels, got {c}", self.c_in)));
        }
        Ok((b, c, t, f))
    }
}

/// Read-only view of a convolution's weights `[c_out, c_in, k]` and bias.
#[derive(Debug, Clone, Copy)]
pub struct ConvView<'a> {
    pub geom: FreqConv,
    pub w: &'a [f64],
    pub b: &'a [f64],
}

impl ConvView<'_> {
    fn check(&self) -> Result<()> {
        if self.w.len() != self.geom.weight_len() || self.b.len() != self.geom.c_out {
            return Err(Error::shape("convolution parameter sizes do not match the layer"));
        }
        Ok(())
    }
}

/// Frames per parallel work item. Fixed so partial sums reduce in the same
/// order whatever the thread count.
const FRAME_CHUNK: usize = 16;

/// Writes one input row into a zero-padded row split by stride phase, so
/// every tap reads a contiguous slice: phase `r`, index `j` holds padded bin
/// `j * stride + r`. Padding slots are never written and stay zero.
fn write_phase_row(s: &FreqConv, plen: usize, xr: &[f64], row: &mut [f64]) {
    if s.stride == 1 {
        row[s.pad..s.pad + xr.len()].copy_from_slice(xr);
        return;
    }
    for (r, prow) in row.chunks_exact_mut(plen).enumerate() {
        for (j, v) in prow.iter_mut().enumerate() {
            if let Some(f) = (j * s.stride + r).checked_sub(s.pad) {
                if f < xr.len() {
                    *v = xr[f];
                }
            }
        }
    }
}

/// Inverse of [`write_phase_row`], dropping padding slots.
fn read_phase_row(s: &FreqConv, plen: usize, row: &[f64], out: &mut [f64]) {
    if s.stride == 1 {
        out.copy_from_slice(&row[s.pad..s.pad + out.len()]);
        return;
    }
    for (r, prow) in row.chunks_exact(plen).enumerate() {
        for (j, &v) in prow.iter().enumerate() {
            if let Some(f) = (j * s.stride + r).checked_sub(s.pad) {
                if f < out.len() {
                    out[f] = v;
                }
            }
        }
    }
}

fn frame_chunks(n_frames: usize) -> usize {
    n_frames.div_ceil(FRAME_CHUNK)
}

fn chunk_frames(c: usize, n_frames: usize) -> std::ops::Range<usize> {
    c * FRAME_CHUNK..((c + 1) * FRAME_CHUNK).min(n_frames)
}

/// Convolves the first `geom.c_in` channels of `x`.
pub(crate) fn conv_prefix_forward(x: &Tensor, p: &ConvView) -> Result<Tensor> {
    p.check()?;
    let s = p.geom;
    let (nb, c_tot, nt, f_in) = s.check_input(x, false)?;
    let f_out = s.out_freq(f_in)?;
    let plen = s.phase_len(f_in);
    let row_len = s.stride * plen;
    let n_frames = nb * nt;
    let xd = x.data();
    // work frame by frame so one frame's rows stay in cache for every output channel
    let parts = par::map_range(frame_chunks(n_frames), |c| {
        let frames = chunk_frames(c, n_frames);
        let mut buf = vec![0.0; frames.len() * s.c_out * f_out];
        let mut rows = vec![0.0; s.c_in * row_len];
        for (j, fr) in frames.enumerate() {
            let (bi, t) = (fr / nt, fr % nt);
            for (ci, row) in rows.chunks_exact_mut(row_len).enumerate() {
                let base = ((bi * c_tot + ci) * nt + t) * f_in;
                write_phase_row(&s, plen, &xd[base..base + f_in], row);
            }
            for (co, orow) in buf[j * s.c_out * f_out..(j + 1) * s.c_out * f_out].chunks_exact_mut(f_out).enumerate() {
                orow.fill(p.b[co]);
                for (ci, row) in rows.chunks_exact(row_len).enumerate() {
                    for k in 0..s.kernel {
                        let off = s.tap_offset(k, plen);
                        axpy(p.w[(co * s.c_in + ci) * s.kernel + k], &row[off..off + f_out], orow);
                    }
                }
            }
        }
        buf
    });
    let mut out = vec![0.0; nb * s.c_out * nt * f_out];
    for (c, buf) in parts.iter().enumerate() {
        for (j, fr) in chunk_frames(c, n_frames).enumerate() {
            let (bi, t) = (fr / nt, fr % nt);
            for co in 0..s.c_out {
                let dst = ((bi * s.c_out + co) * nt + t) * f_out;
                let src = (j * s.c_out + co) * f_out;
                out[dst..dst + f_out].copy_from_slice(&buf[src..src + f_out]);
            }
        }
    }
    Ok(Tensor::from_raw(vec![nb, s.c_out, nt, f_out], out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    /// Gradient for the first `c_in` input channels.
    pub input: Tensor,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

pub(crate) fn conv_prefix_backward(x: &Tensor, gy: &Tensor, p: &ConvView) -> Result<ConvGrads> {
    p.check()?;
    let s = p.geom;
    let (nb, c_tot, nt, f_in) = s.check_input(x, false)?;
    let f_out = s.out_freq(f_in)?;
    if gy.shape() != [nb, s.c_out, nt, f_out] {
        return Err(Error::shape(format!("upstream gradient {:?} does not match output", gy.shape())));
    }
    let plen = s.phase_len(f_in);
    let row_len = s.stride * plen;
    let n_frames = nb * nt;
    let (xd, gd) = (x.data(), gy.data());

    struct Part {
        gw: Vec<f64>,
        gb: Vec<f64>,
        gx: Vec<f64>,
    }
    let parts = par::map_range(frame_chunks(n_frames), |c| {
        let frames = chunk_frames(c, n_frames);
        let mut part = Part {
            gw: vec![0.0; s.weight_len()],
            gb: vec![0.0; s.c_out],
            gx: vec![0.0; frames.len() * s.c_in * f_in],
        };
        let mut rows = vec![0.0; s.c_in * row_len];
        let mut grows = vec![0.0; s.c_in * row_len];
        for (j, fr) in frames.enumerate() {
            let (bi, t) = (fr / nt, fr % nt);
            for (ci, row) in rows.chunks_exact_mut(row_len).enumerate() {
                let base = ((bi * c_tot + ci) * nt + t) * f_in;
                write_phase_row(&s, plen, &xd[base..base + f_in], row);
            }
            grows.fill(0.0);
            for co in 0..s.c_out {
                let base = ((bi * s.c_out + co) * nt + t) * f_out;
                let g = &gd[base..base + f_out];
                part.gb[co] += g.iter().sum::<f64>();
                for (ci, (row, grow)) in rows.chunks_exact(row_len).zip(grows.chunks_exact_mut(row_len)).enumerate() {
                    for k in 0..s.kernel {
                        let off = s.tap_offset(k, plen);
                        let wi = (co * s.c_in + ci) * s.kernel + k;
                        part.gw[wi] += dot(g, &row[off..off + f_out]);
                        axpy(p.w[wi], g, &mut grow[off..off + f_out]);
                    }
                }
            }
            for (ci, grow) in grows.chunks_exact(row_len).enumerate() {
                let dst = (j * s.c_in + ci) * f_in;
                read_phase_row(&s, plen, grow, &mut part.gx[dst..dst + f_in]);
            }
        }
        part
    });

    let mut gw = vec![0.0; s.weight_len()];
    let mut gb = vec![0.0; s.c_out];
    let mut gx = vec![0.0; nb * s.c_in * nt * f_in];
    for (c, part) in parts.iter().enumerate() {
        gw.iter_mut().zip(&part.gw).for_each(|(a, b)| *a += b);
        gb.iter_mut().zip(&part.gb).for_each(|(a, b)| *a += b);
        for (j, fr) in chunk_frames(c, n_frames).enumerate() {
            let (bi, t) = (fr / nt, fr % nt);
            for ci in 0..s.c_in {
                let dst = ((bi * s.c_in + ci) * nt + t) * f_in;
                let src = (j * s.c_in + ci) * f_in;
                gx[dst..dst + f_in].copy_from_slice(&part.gx[src..src + f_in]);
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::from_raw(vec![nb, s.c_in, nt, f_in], gx),
        w: gw,
        b: gb,
    })
}

pub fn conv_forward(x: &Tensor, p: &ConvView) -> Result<Tensor> {
    p.geom.check_input(x, true)?;
    conv_prefix_forward(x, p)
}

pub fn conv_backward(x: &Tensor, gy: &Tensor, p: &ConvView) -> Result<ConvGrads> {
    p.geom.check_input(x, true)?;
    conv_prefix_backward(x, gy, p)
}

/// Batch-norm parameters and running statistics of one layer.
#[derive(Debug, Clone, Copy)]
pub struct BnView<'a> {
    pub gamma: &'a [f64],
    pub beta: &'a [f64],
    pub running_mean: &'a [f64],
    pub running_var: &'a [f64],
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    /// Biased batch variance.
    pub var: Vec<f64>,
}

fn channel_planes(x: &Tensor, c: usize) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
    let (nb, nc, nt, nf) = x.dims4().expect("4-d");
    let plane = nt * nf;
    (0..nb).map(move |b| (b * nc + c) * plane..(b * nc + c + 1) * plane)
}

/// Normalizes each channel over (batch, time, freq).
pub fn batchnorm_forward(x: &Tensor, p: &BnView, mode: Mode) -> Result<(Tensor, Option<BnCache>)> {
    let (_, nc, _, _) = x.dims4()?;
    if [p.gamma.len(), p.beta.len(), p.running_mean.len(), p.running_var.len()] != [nc; 4] {
        return Err(Error::shape(format!("batch norm over {nc} channels has mismatched parameters")));
    }
    let xd = x.data();
    let (mean, var) = match mode {
        Mode::Inference => (p.running_mean.to_vec(), p.running_var.to_vec()),
        Mode::Train => {
            let mut mean = vec![0.0; nc];
            let mut var = vec![0.0; nc];
            for c in 0..nc {
                let mut n = 0usize;
                let mut s = 0.0;
                for r in channel_planes(x, c) {
                    s += xd[r.clone()].iter().sum::<f64>();
                    n += r.len();
                }
                let m = s / n.max(1) as f64;
                let mut v = 0.0;
                for r in channel_planes(x, c) {
                    v += xd[r].iter().map(|a| (a - m) * (a - m)).sum::<f64>();
                }
                mean[c] = m;
                var[c] = v / n.max(1) as f64;
            }
            (mean, var)
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + p.eps).sqrt()).collect();
    let mut xhat = vec![0.0; xd.len()];
    let mut y = vec![0.0; xd.len()];
    for c in 0..nc {
        for r in channel_planes(x, c) {
            for i in r {
                let h = (xd[i] - mean[c]) * inv_std[c];
                xhat[i] = h;
                y[i] = p.gamma[c] * h + p.beta[c];
            }
        }
    }
    let shape = x.shape().to_vec();
    let cache = (mode == Mode::Train).then(|| BnCache {
        xhat: Tensor::from_raw(shape.clone(), xhat),
        inv_std,
        mean,
        var,
    });
    Ok((Tensor::from_raw(shape, y), cache))
}

pub struct BnGrads {
    pub input: Tensor,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn batchnorm_backward(gy: &Tensor, cache: &BnCache, gamma: &[f64]) -> Result<BnGrads> {
    if gy.shape() != cache.xhat.shape() {
        return Err(Error::shape("batch-norm gradient shape mismatch"));
    }
    let (_, nc, _, _) = gy.dims4()?;
    let (g, h) = (gy.data(), cache.xhat.data());
    let mut gx = vec![0.0; g.len()];
    let mut ggamma = vec![0.0; nc];
    let mut gbeta = vec![0.0; nc];
    for c in 0..nc {
        let (mut sg, mut sgh, mut n) = (0.0, 0.0, 0usize);
        for r in channel_planes(gy, c) {
            for i in r {
                sg += g[i];
                sgh += g[i] * h[i];
                n += 1;
            }
        }
        ggamma[c] = sgh;
        gbeta[c] = sg;
        let n = n as f64;
        let k = gamma[c] * cache.inv_std[c] / n;
        for r in channel_planes(gy, c) {
            for i in r {
                gx[i] = k * (n * g[i] - sg - h[i] * sgh);
            }
        }
    }
    Ok(BnGrads {
        input: Tensor::from_raw(gy.shape().to_vec(), gx),
        gamma: ggamma,
        beta: gbeta,
    })
}

#[inline]
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// ELU derivative from its output.
#[inline]
pub fn elu_grad_from_output(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else {
        y + 1.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompositeView<'a> {
    pub conv: ConvView<'a>,
    pub bn: BnView<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeCache {
    pub bn: Option<BnCache>,
    pub out: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGrads {
    pub input: Tensor,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

fn composite_prefix_forward(x: &Tensor, p: &CompositeView, mode: Mode) -> Result<(Tensor, CompositeCache)> {
    let pre = conv_prefix_forward(x, &p.conv)?;
    let (mut z, bn) = batchnorm_forward(&pre, &p.bn, mode)?;
    z.data_mut().iter_mut().for_each(|v| *v = elu(*v));
    Ok((z.clone(), CompositeCache { bn, out: z }))
}

fn composite_prefix_backward(x: &Tensor, gy: &Tensor, p: &CompositeView, cache: &CompositeCache) -> Result<CompositeGrads> {
    let bn_cache = cache.bn.as_ref().ok_or(Error::MissingCache)?;
    let mut gz = gy.clone();
    for (g, y) in gz.data_mut().iter_mut().zip(cache.out.data()) {
        *g *= elu_grad_from_output(*y);
    }
    let bn = batchnorm_backward(&gz, bn_cache, p.bn.gamma)?;
    let conv = conv_prefix_backward(x, &bn.input, &p.conv)?;
    Ok(CompositeGrads {
        input: conv.input,
        w: conv.w,
        b: conv.b,
        gamma: bn.gamma,
        beta: bn.beta,
    })
}

/// conv(1×K, pad) → batch norm → ELU; time and frequency sizes preserved.
pub fn composite_layer_forward(x: &Tensor, p: &CompositeView, mode: Mode) -> Result<(Tensor, CompositeCache)> {
    p.conv.geom.check_input(x, true)?;
    composite_prefix_forward(x, p, mode)
}

pub fn composite_layer_backward(x: &Tensor, gy: &Tensor, p: &CompositeView, cache: &CompositeCache) -> Result<CompositeGrads> {
    p.conv.geom.check_input(x, true)?;
    composite_prefix_backward(x, gy, p, cache)
}

/// `v = (u∗W1 + b1) ⊙ σ(u∗W2 + b2)`.
#[derive(Debug, Clone, Copy)]
pub struct GatedView<'a> {
    pub linear: ConvView<'a>,
    pub gate: ConvView<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatedCache {
    pub input: Tensor,
    pub m1: Tensor,
    /// σ(m2)
    pub gate: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatedGrads {
    pub input: Tensor,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub fn gated_conv_forward(u: &Tensor, p: &GatedView) -> Result<(Tensor, GatedCache)> {
    if p.linear.geom != p.gate.geom {
        return Err(Error::shape("gated convolution halves must share one geometry"));
    }
    p.linear.geom.check_input(u, true)?;
    let m1 = conv_prefix_forward(u, &p.linear)?;
    let mut gate = conv_prefix_forward(u, &p.gate)?;
    gate.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
    let mut v = m1.clone();
    v.data_mut().iter_mut().zip(gate.data()).for_each(|(a, s)| *a *= s);
    Ok((
        v,
        GatedCache {
            input: u.clone(),
            m1,
            gate,
        },
    ))
}

/// `∇v → ∇m1 = ∇v⊙σ(m2)`, `∇m2 = ∇v⊙m1⊙σ'(m2)`, chained through both
/// convolutions.
pub fn gated_conv_backward(grad_v: &Tensor, p: &GatedView, cache: Option<&GatedCache>) -> Result<GatedGrads> {
    let cache = cache.ok_or(Error::MissingCache)?;
    if grad_v.shape() != cache.m1.shape() {
        return Err(Error::shape("gated gradient shape mismatch"));
    }
    let mut g1 = grad_v.clone();
    let mut g2 = grad_v.clone();
    for ((a, b), (m, s)) in g1
        .data_mut()
        .iter_mut()
        .zip(g2.data_mut().iter_mut())
        .zip(cache.m1.data().iter().zip(cache.gate.data()))
    {
        *a *= s;
        *b *= m * s * (1.0 - s);
    }
    let lin = conv_prefix_backward(&cache.input, &g1, &p.linear)?;
    let gat = conv_prefix_backward(&cache.input, &g2, &p.gate)?;
    let mut input = lin.input;
    input.data_mut().iter_mut().zip(gat.input.data()).for_each(|(a, b)| *a += b);
    Ok(GatedGrads {
        input,
        w1: lin.w,
        b1: lin.b,
        w2: gat.w,
        b2: gat.b,
    })
}

#[derive(Debug, Clone)]
pub struct BlockView<'a> {
    pub composites: Vec<CompositeView<'a>>,
    pub gated: GatedView<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCache {
    pub composites: Vec<CompositeCache>,
    /// Its `input` is the full dense stack `[c_0, c_1, …, c_L]`.
    pub gated: GatedCache,
    pub in_channels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads {
    pub input: Tensor,
    pub composites: Vec<CompositeGrads>,
    pub gated: GatedGrads,
}

fn write_channels(dst: &mut Tensor, start: usize, src: &Tensor) {
    let (nb, nc, nt, nf) = dst.dims4().unwrap();
    let (_, sc, _, _) = src.dims4().unwrap();
    let plane = nt * nf;
    for b in 0..nb {
        let d = (b * nc + start) * plane;
        dst.data_mut()[d..d + sc * plane].copy_from_slice(&src.data()[b * sc * plane..(b + 1) * sc * plane]);
    }
}

fn add_channels(dst: &mut Tensor, start: usize, src: &Tensor) {
    let (nb, nc, nt, nf) = dst.dims4().unwrap();
    let (_, sc, _, _) = src.dims4().unwrap();
    let plane = nt * nf;
    for b in 0..nb {
        let d = (b * nc + start) * plane;
        let s = &src.data()[b * sc * plane..(b + 1) * sc * plane];
        dst.data_mut()[d..d + sc * plane].iter_mut().zip(s).for_each(|(a, v)| *a += v);
    }
}

/// Dense block: composite layer `l` reads the stack of the block input and
/// all earlier composite outputs (`[c_0, …, c_{l−1}]` along channels); the
/// gated convolution reads the final stack and halves the frequency axis.
pub fn conv_dc_block_forward(x: &Tensor, p: &BlockView, mode: Mode) -> Result<(Tensor, BlockCache)> {
    block_forward_impl(x, p, mode, None)
}

/// `knockout` zeroes one composite layer's output before it joins the stack.
pub(crate) fn block_forward_impl(x: &Tensor, p: &BlockView, mode: Mode, knockout: Option<usize>) -> Result<(Tensor, BlockCache)> {
    let (nb, c_in, nt, nf) = x.dims4()?;
    let growth: Vec<usize> = p.composites.iter().map(|c| c.conv.geom.c_out).collect();
    let total = c_in + growth.iter().sum::<usize>();
    let mut offset = c_in;
    for (l, c) in p.composites.iter().enumerate() {
        if c.conv.geom.c_in != offset {
            return Err(Error::shape(format!(
                "composite layer {l} expects {} channels but the dense stack has {offset}",
                c.conv.geom.c_in
            )));
        }
        offset += growth[l];
    }
    if p.gated.linear.geom.c_in != total {
        return Err(Error::shape(format!("gated layer expects {} channels, stack has {total}", p.gated.linear.geom.c_in)));
    }
    let mut stack = Tensor::zeros(vec![nb, total, nt, nf]);
    write_channels(&mut stack, 0, x);
    let mut caches = Vec::with_capacity(p.composites.len());
    let mut offset = c_in;
    for (l, c) in p.composites.iter().enumerate() {
        let (mut y, cache) = composite_prefix_forward(&stack, c, mode)?;
        if knockout == Some(l) {
            y.data_mut().fill(0.0);
        }
        write_channels(&mut stack, offset, &y);
        offset += c.conv.geom.c_out;
        caches.push(cache);
    }
    let (v, gated) = gated_conv_forward(&stack, &p.gated)?;
    Ok((
        v,
        BlockCache {
            composites: caches,
            gated,
            in_channels: c_in,
        },
    ))
}

pub fn conv_dc_block_backward(gy: &Tensor, p: &BlockView, cache: &BlockCache) -> Result<BlockGrads> {
    let gated = gated_conv_backward(gy, &p.gated, Some(&cache.gated))?;
    let stack = &cache.gated.input;
    let mut g_stack = gated.input.clone();
    let mut comp_grads = Vec::with_capacity(p.composites.len());
    let mut offset = stack.dims4()?.1;
    for (c, cc) in p.composites.iter().zip(&cache.composites).rev() {
        offset -= c.conv.geom.c_out;
        let gy_l = g_stack.channel_slice(offset, offset + c.conv.geom.c_out)?;
        let g = composite_prefix_backward(stack, &gy_l, c, cc)?;
        add_channels(&mut g_stack, 0, &g.input);
        comp_grads.push(g);
    }
    comp_grads.reverse();
    Ok(BlockGrads {
        input: g_stack.channel_slice(0, cache.in_channels)?,
        composites: comp_grads,
        gated,
    })
}
