//! LSTM recursions, grouped bidirectional layers with per-group output
//! projection, layer normalization and the inter-layer channel shuffle.
//! Sequences are `[time, feature]` row-major.

use crate::error::{Error, Result};
use crate::par;

use super::linalg::{axpy, dot, gemm_nn, gemm_nt, gemm_tn, sigmoid};
use super::tensor::Tensor;

/// Gate order in all matrices: input, forget, cell, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmView<'a> {
    /// `[4h, d]`
    pub w_ih: &'a [f64],
    /// `[4h, h]`
    pub w_hh: &'a [f64],
    /// `[4h]`
    pub b: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

impl LstmView<'_> {
    fn check(&self) -> Result<()> {
        let h4 = 4 * self.hidden;
        if self.w_ih.len() != h4 * self.input || self.w_hh.len() != h4 * self.hidden || self.b.len() != h4 {
            return Err(Error::shape("LSTM parameter sizes do not match the layer"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    x: Vec<f64>,
    /// Post-activation gates `[T, 4h]`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    steps: usize,
    reverse: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub input: Vec<f64>,
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub b: Vec<f64>,
}

fn order(steps: usize, reverse: bool) -> impl DoubleEndedIterator<Item = usize> {
    (0..steps).map(move |s| if reverse { steps - 1 - s } else { s })
}

/// Runs one direction over `x` (`[steps, input]`); `reverse` processes the
/// sequence from the last frame. Returns hidden states `[steps, hidden]`
/// indexed by frame.
pub fn lstm_forward(x: &[f64], steps: usize, p: &LstmView, reverse: bool) -> Result<(Vec<f64>, LstmCache)> {
    p.check()?;
    let (d, h) = (p.input, p.hidden);
    if x.len() != steps * d {
        return Err(Error::shape(format!("LSTM input has {} values, expected {steps}×{d}", x.len())));
    }
    let h4 = 4 * h;
    let mut z = vec![0.0; steps * h4];
    for row in z.chunks_exact_mut(h4) {
        row.copy_from_slice(p.b);
    }
    gemm_nt(x, p.w_ih, &mut z, steps, d, h4);
    let mut gates = z;
    let mut c = vec![0.0; steps * h];
    let mut tanh_c = vec![0.0; steps * h];
    let mut hs = vec![0.0; steps * h];
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for t in order(steps, reverse) {
        let g = &mut gates[t * h4..(t + 1) * h4];
        for (r, gv) in g.iter_mut().enumerate() {
            *gv += dot(&p.w_hh[r * h..(r + 1) * h], &h_prev);
        }
        for j in 0..h {
            let i = sigmoid(g[j]);
            let f = sigmoid(g[h + j]);
            let cc = g[2 * h + j].tanh();
            let o = sigmoid(g[3 * h + j]);
            g[j] = i;
            g[h + j] = f;
            g[2 * h + j] = cc;
            g[3 * h + j] = o;
            let cell = f * c_prev[j] + i * cc;
            let tc = cell.tanh();
            c[t * h + j] = cell;
            tanh_c[t * h + j] = tc;
            hs[t * h + j] = o * tc;
        }
        h_prev.copy_from_slice(&hs[t * h..(t + 1) * h]);
        c_prev.copy_from_slice(&c[t * h..(t + 1) * h]);
    }
    let cache = LstmCache {
        x: x.to_vec(),
        gates,
        c,
        tanh_c,
        h: hs.clone(),
        steps,
        reverse,
    };
    Ok((hs, cache))
}

/// Backpropagation through time for one direction.
pub fn lstm_backward(gh: &[f64], p: &LstmView, cache: &LstmCache) -> Result<LstmGrads> {
    p.check()?;
    let (d, h, steps) = (p.input, p.hidden, cache.steps);
    if gh.len() != steps * h {
        return Err(Error::shape("LSTM upstream gradient has the wrong size"));
    }
    let h4 = 4 * h;
    let mut dz = vec![0.0; steps * h4];
    let mut w_hh = vec![0.0; h4 * h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let zeros = vec![0.0; h];
    let seq: Vec<usize> = order(steps, cache.reverse).collect();
    for (s, &t) in seq.iter().enumerate().rev() {
        let prev = (s > 0).then(|| seq[s - 1]);
        let c_prev = prev.map_or(&zeros[..], |q| &cache.c[q * h..(q + 1) * h]);
        let h_prev = prev.map_or(&zeros[..], |q| &cache.h[q * h..(q + 1) * h]);
        let g = &cache.gates[t * h4..(t + 1) * h4];
        let dzt = &mut dz[t * h4..(t + 1) * h4];
        for j in 0..h {
            let (i, f, cc, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_c[t * h + j];
            let dh = gh[t * h + j] + dh_next[j];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dzt[j] = dc * cc * i * (1.0 - i);
            dzt[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dzt[2 * h + j] = dc * i * (1.0 - cc * cc);
            dzt[3 * h + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        dh_next.fill(0.0);
        for r in 0..h4 {
            let v = dzt[r];
            if v != 0.0 {
                axpy(v, &p.w_hh[r * h..(r + 1) * h], &mut dh_next);
                axpy(v, h_prev, &mut w_hh[r * h..(r + 1) * h]);
            }
        }
    }
    let mut w_ih = vec![0.0; h4 * d];
    gemm_tn(&dz, &cache.x, &mut w_ih, h4, steps, d);
    let mut b = vec![0.0; h4];
    for row in dz.chunks_exact(h4) {
        b.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    let mut input = vec![0.0; steps * d];
    gemm_nn(&dz, p.w_ih, &mut input, steps, h4, d);
    Ok(LstmGrads { input, w_ih, w_hh, b })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnCache {
    xhat: Vec<f64>,
    inv: Vec<f64>,
}

/// Per-frame normalization over the feature axis.
pub fn layer_norm_forward(x: &[f64], width: usize, gamma: &[f64], beta: &[f64], eps: f64) -> (Vec<f64>, LnCache) {
    let steps = x.len() / width;
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    let mut inv = vec![0.0; steps];
    for t in 0..steps {
        let row = &x[t * width..(t + 1) * width];
        let m = row.iter().sum::<f64>() / width as f64;
        let v = row.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / width as f64;
        let k = 1.0 / (v + eps).sqrt();
        inv[t] = k;
        for j in 0..width {
            let hv = (row[j] - m) * k;
            xhat[t * width + j] = hv;
            y[t * width + j] = gamma[j] * hv + beta[j];
        }
    }
    (y, LnCache { xhat, inv })
}

pub fn layer_norm_backward(gy: &[f64], width: usize, gamma: &[f64], cache: &LnCache) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; gy.len()];
    let mut gg = vec![0.0; width];
    let mut gb = vec![0.0; width];
    let n = width as f64;
    for (t, &k) in cache.inv.iter().enumerate() {
        let g = &gy[t * width..(t + 1) * width];
        let h = &cache.xhat[t * width..(t + 1) * width];
        let (mut s1, mut s2) = (0.0, 0.0);
        for j in 0..width {
            gg[j] += g[j] * h[j];
            gb[j] += g[j];
            let gh = g[j] * gamma[j];
            s1 += gh;
            s2 += gh * h[j];
        }
        for j in 0..width {
            gx[t * width + j] = k / n * (n * g[j] * gamma[j] - s1 - h[j] * s2);
        }
    }
    (gx, gg, gb)
}

/// Per frame, views the features as `[groups, width/groups]` and transposes,
/// so each group of the next layer sees one slice from every group.
pub fn channel_shuffle(x: &[f64], width: usize, groups: usize) -> Vec<f64> {
    let sub = width / groups;
    let mut y = vec![0.0; x.len()];
    for (src, dst) in x.chunks_exact(width).zip(y.chunks_exact_mut(width)) {
        for g in 0..groups {
            for j in 0..sub {
                dst[j * groups + g] = src[g * sub + j];
            }
        }
    }
    y
}

pub fn channel_unshuffle(y: &[f64], width: usize, groups: usize) -> Vec<f64> {
    let sub = width / groups;
    let mut x = vec![0.0; y.len()];
    for (src, dst) in y.chunks_exact(width).zip(x.chunks_exact_mut(width)) {
        for g in 0..groups {
            for j in 0..sub {
                dst[g * sub + j] = src[j * groups + g];
            }
        }
    }
    x
}

#[derive(Debug, Clone, Copy)]
pub struct GroupView<'a> {
    pub fwd: LstmView<'a>,
    pub bwd: LstmView<'a>,
    /// `[group_width, 2h]`
    pub proj_w: &'a [f64],
    pub proj_b: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct RecurrentLayerView<'a> {
    pub groups: Vec<GroupView<'a>>,
    pub ln_gamma: &'a [f64],
    pub ln_beta: &'a [f64],
    pub ln_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCache {
    pub fwd: LstmCache,
    pub bwd: LstmCache,
    /// `[T, 2h]`: forward states then backward states.
    pub hcat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentLayerCache {
    pub groups: Vec<GroupCache>,
    pub ln: LnCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupGrads {
    pub fwd: LstmGrads,
    pub bwd: LstmGrads,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentLayerGrads {
    pub input: Tensor,
    pub groups: Vec<GroupGrads>,
    pub ln_gamma: Vec<f64>,
    pub ln_beta: Vec<f64>,
}

fn gather_cols(x: &[f64], width: usize, start: usize, len: usize) -> Vec<f64> {
    x.chunks_exact(width).flat_map(|r| r[start..start + len].iter().copied()).collect()
}

/// One grouped bidirectional layer: split features into equal groups, run a
/// BLSTM per group, project each group's `2h` states back to the group
/// width, concatenate, then layer-normalize.
pub fn grouped_blstm_layer_forward(x: &Tensor, p: &RecurrentLayerView) -> Result<(Tensor, RecurrentLayerCache)> {
    let (steps, width) = x.dims2()?;
    let ng = p.groups.len();
    if ng == 0 || width % ng != 0 {
        return Err(Error::shape(format!("feature width {width} not divisible into {ng} groups")));
    }
    let gw = width / ng;
    if p.ln_gamma.len() != width || p.ln_beta.len() != width {
        return Err(Error::shape("layer-norm parameters do not match the feature width"));
    }
    for g in &p.groups {
        let h = g.fwd.hidden;
        if g.fwd.input != gw || g.bwd.input != gw || g.bwd.hidden != h || g.proj_w.len() != gw * 2 * h || g.proj_b.len() != gw {
            return Err(Error::shape("group parameters do not match the group width"));
        }
    }
    let results = par::map_range(ng, |gi| -> Result<(Vec<f64>, GroupCache)> {
        let g = &p.groups[gi];
        let h = g.fwd.hidden;
        let xg = gather_cols(x.data(), width, gi * gw, gw);
        let (f, b) = par::join(|| lstm_forward(&xg, steps, &g.fwd, false), || lstm_forward(&xg, steps, &g.bwd, true));
        let ((hf, cf), (hb, cb)) = (f?, b?);
        let mut hcat = Vec::with_capacity(steps * 2 * h);
        for t in 0..steps {
            hcat.extend_from_slice(&hf[t * h..(t + 1) * h]);
            hcat.extend_from_slice(&hb[t * h..(t + 1) * h]);
        }
        let mut y = vec![0.0; steps * gw];
        for row in y.chunks_exact_mut(gw) {
            row.copy_from_slice(g.proj_b);
        }
        gemm_nt(&hcat, g.proj_w, &mut y, steps, 2 * h, gw);
        Ok((y, GroupCache { fwd: cf, bwd: cb, hcat }))
    });
    let mut cat = vec![0.0; steps * width];
    let mut caches = Vec::with_capacity(ng);
    for (gi, r) in results.into_iter().enumerate() {
        let (y, c) = r?;
        for t in 0..steps {
            cat[t * width + gi * gw..t * width + (gi + 1) * gw].copy_from_slice(&y[t * gw..(t + 1) * gw]);
        }
        caches.push(c);
    }
    let (out, ln) = layer_norm_forward(&cat, width, p.ln_gamma, p.ln_beta, p.ln_eps);
    Ok((Tensor::from_raw(vec![steps, width], out), RecurrentLayerCache { groups: caches, ln }))
}

pub fn grouped_blstm_layer_backward(gy: &Tensor, p: &RecurrentLayerView, cache: &RecurrentLayerCache) -> Result<RecurrentLayerGrads> {
    let (steps, width) = gy.dims2()?;
    let ng = p.groups.len();
    if cache.groups.len() != ng {
        return Err(Error::MissingCache);
    }
    let gw = width / ng;
    let (gcat, ln_gamma, ln_beta) = layer_norm_backward(gy.data(), width, p.ln_gamma, &cache.ln);
    let results = par::map_range(ng, |gi| -> Result<GroupGrads> {
        let g = &p.groups[gi];
        let c = &cache.groups[gi];
        let h = g.fwd.hidden;
        let gyg = gather_cols(&gcat, width, gi * gw, gw);
        let mut proj_w = vec![0.0; gw * 2 * h];
        gemm_tn(&gyg, &c.hcat, &mut proj_w, gw, steps, 2 * h);
        let mut proj_b = vec![0.0; gw];
        for row in gyg.chunks_exact(gw) {
            proj_b.iter_mut().zip(row).for_each(|(a, v)| *a += v);
        }
        let mut ghcat = vec![0.0; steps * 2 * h];
        gemm_nn(&gyg, g.proj_w, &mut ghcat, steps, gw, 2 * h);
        let ghf = gather_cols(&ghcat, 2 * h, 0, h);
        let ghb = gather_cols(&ghcat, 2 * h, h, h);
        let (f, b) = par::join(|| lstm_backward(&ghf, &g.fwd, &c.fwd), || lstm_backward(&ghb, &g.bwd, &c.bwd));
        Ok(GroupGrads {
            fwd: f?,
            bwd: b?,
            proj_w,
            proj_b,
        })
    });
    let mut groups = Vec::with_capacity(ng);
    let mut gx = vec![0.0; steps * width];
    for (gi, r) in results.into_iter().enumerate() {
        let gg = r?;
        for t in 0..steps {
            for j in 0..gw {
                gx[t * width + gi * gw + j] = gg.fwd.input[t * gw + j] + gg.bwd.input[t * gw + j];
            }
        }
        groups.push(gg);
    }
    Ok(RecurrentLayerGrads {
        input: Tensor::from_raw(vec![steps, width], gx),
        groups,
        ln_gamma,
        ln_beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    /// Textbook BLSTM recursion with explicit per-gate matrices.
    fn reference_blstm(x: &[Vec<f64>], fw: (&[f64], &[f64], &[f64]), bw: (&[f64], &[f64], &[f64]), h: usize) -> Vec<Vec<f64>> {
        let run = |w: (&[f64], &[f64], &[f64]), seq: Vec<usize>| {
            let d = x[0].len();
            let mut hp = vec![0.0; h];
            let mut cp = vec![0.0; h];
            let mut out = vec![vec![0.0; h]; x.len()];
            let s = |v: f64| 1.0 / (1.0 + (-v).exp());
            for t in seq {
                let pre = |gate: usize, j: usize| {
                    let r = gate * h + j;
                    let mut a = w.2[r];
                    for k in 0..d {
                        a += w.0[r * d + k] * x[t][k];
                    }
                    for k in 0..h {
                        a += w.1[r * h + k] * hp[k];
                    }
                    a
                };
                let mut hn = vec![0.0; h];
                let mut cn = vec![0.0; h];
                for j in 0..h {
                    let (i, f, g, o) = (s(pre(0, j)), s(pre(1, j)), pre(2, j).tanh(), s(pre(3, j)));
                    cn[j] = f * cp[j] + i * g;
                    hn[j] = o * cn[j].tanh();
                }
                out[t] = hn.clone();
                hp = hn;
                cp = cn;
            }
            out
        };
        let n = x.len();
        let f = run(fw, (0..n).collect());
        let b = run(bw, (0..n).rev().collect());
        f.into_iter().zip(b).map(|(a, b)| a.into_iter().chain(b).collect()).collect()
    }

    #[test]
    fn single_group_matches_reference_blstm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (t, d, h) = (9, 6, 5);
        let ws: Vec<Vec<f64>> = [4 * h * d, 4 * h * h, 4 * h, 4 * h * d, 4 * h * h, 4 * h].iter().map(|&n| rv(&mut rng, n)).collect();
        let pw = rv(&mut rng, d * 2 * h);
        let pb = rv(&mut rng, d);
        let (ones, zeros) = (vec![1.0; d], vec![0.0; d]);
        let view = RecurrentLayerView {
            groups: vec![GroupView {
                fwd: LstmView { w_ih: &ws[0], w_hh: &ws[1], b: &ws[2], input: d, hidden: h },
                bwd: LstmView { w_ih: &ws[3], w_hh: &ws[4], b: &ws[5], input: d, hidden: h },
                proj_w: &pw,
                proj_b: &pb,
            }],
            ln_gamma: &ones,
            ln_beta: &zeros,
            ln_eps: 1e-5,
        };
        let x = Tensor::new(vec![t, d], rv(&mut rng, t * d)).unwrap();
        let (_, cache) = grouped_blstm_layer_forward(&x, &view).unwrap();
        let rows: Vec<Vec<f64>> = x.data().chunks(d).map(|r| r.to_vec()).collect();
        let want = reference_blstm(&rows, (&ws[0], &ws[1], &ws[2]), (&ws[3], &ws[4], &ws[5]), h);
        for (ti, w) in want.iter().enumerate() {
            for (j, v) in w.iter().enumerate() {
                assert!((cache.groups[0].hcat[ti * 2 * h + j] - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lstm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (t, d, h) = (5, 3, 4);
        let mut w_ih = rv(&mut rng, 4 * h * d);
        let mut w_hh = rv(&mut rng, 4 * h * h);
        let b = rv(&mut rng, 4 * h);
        let mut x = rv(&mut rng, t * d);
        let r = rv(&mut rng, t * h);
        for reverse in [false, true] {
            let loss = |w_ih: &[f64], w_hh: &[f64], x: &[f64]| {
                let v = LstmView { w_ih, w_hh, b: &b, input: d, hidden: h };
                let (hs, _) = lstm_forward(x, t, &v, reverse).unwrap();
                hs.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
            };
            let v = LstmView { w_ih: &w_ih, w_hh: &w_hh, b: &b, input: d, hidden: h };
            let (_, cache) = lstm_forward(&x, t, &v, reverse).unwrap();
            let g = lstm_backward(&r, &v, &cache).unwrap();
            let eps = 1e-6;
            let check = |a: f64, n: f64| assert!((a - n).abs() < 1e-8, "{a} vs {n}");
            for i in 0..w_hh.len() {
                let o = w_hh[i];
                w_hh[i] = o + eps;
                let lp = loss(&w_ih, &w_hh, &x);
                w_hh[i] = o - eps;
                let lm = loss(&w_ih, &w_hh, &x);
                w_hh[i] = o;
                check(g.w_hh[i], (lp - lm) / (2.0 * eps));
            }
            for i in 0..w_ih.len() {
                let o = w_ih[i];
                w_ih[i] = o + eps;
                let lp = loss(&w_ih, &w_hh, &x);
                w_ih[i] = o - eps;
                let lm = loss(&w_ih, &w_hh, &x);
                w_ih[i] = o;
                check(g.w_ih[i], (lp - lm) / (2.0 * eps));
            }
            for i in 0..x.len() {
                let o = x[i];
                x[i] = o + eps;
                let lp = loss(&w_ih, &w_hh, &x);
                x[i] = o - eps;
                let lm = loss(&w_ih, &w_hh, &x);
                x[i] = o;
                check(g.input[i], (lp - lm) / (2.0 * eps));
            }
        }
    }

    #[test]
    fn shuffle_round_trip_and_mixing() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let y = channel_shuffle(&x, 8, 4);
        assert_eq!(&y[..8], &[0.0, 2.0, 4.0, 6.0, 1.0, 3.0, 5.0, 7.0]);
        assert_eq!(channel_unshuffle(&y, 8, 4), x);
    }

    #[test]
    fn layer_norm_of_zeros_is_offset() {
        let (y, _) = layer_norm_forward(&[0.0; 8], 4, &[1.0; 4], &[0.0; 4], 1e-5);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = 5;
        let mut x = rv(&mut rng, 3 * w);
        let gamma = rv(&mut rng, w);
        let beta = rv(&mut rng, w);
        let r = rv(&mut rng, 3 * w);
        let loss = |x: &[f64]| layer_norm_forward(x, w, &gamma, &beta, 1e-5).0.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        let (_, c) = layer_norm_forward(&x, w, &gamma, &beta, 1e-5);
        let (gx, _, _) = layer_norm_backward(&r, w, &gamma, &c);
        for i in 0..x.len() {
            let o = x[i];
            x[i] = o + 1e-6;
            let lp = loss(&x);
            x[i] = o - 1e-6;
            let lm = loss(&x);
            x[i] = o;
            assert!((gx[i] - (lp - lm) / 2e-6).abs() < 1e-7);
        }
    }
}
