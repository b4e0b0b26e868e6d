use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::FeatureTensor;
use crate::error::{Error, Result};
use crate::labels::VoicingLabels;

use super::config::ModelConfig;
use super::conv::{
    block_forward_impl, conv_dc_block_backward, BlockCache, BlockView, BnView, CompositeView, ConvView, FreqConv, GatedView, Mode,
};
use super::linalg::{dot, sigmoid};
use super::lstm::{
    channel_shuffle, channel_unshuffle, grouped_blstm_layer_backward, grouped_blstm_layer_forward, GroupView, LstmView,
    RecurrentLayerCache, RecurrentLayerView,
};
use super::params::{ParamGrads, ParamStore};
use super::tensor::Tensor;

/// Posterior clamp: probabilities stay in `[EPS, 1 − EPS]`.
pub const POSTERIOR_EPS: f64 = 1e-7;

/// Per-frame voicing probabilities, each in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct VoicingPosterior {
    probs: Vec<f64>,
}

impl VoicingPosterior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::invalid(format!("posterior {p} outside (0,1)")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Voiced iff `p > threshold`.
pub fn decide_voicing(p: &VoicingPosterior, threshold: f64) -> Result<VoicingLabels> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0,1), got {threshold}")));
    }
    VoicingLabels::new(p.probs.iter().map(|&v| (v > threshold) as u8).collect())
}

/// Mean binary cross-entropy over scored frames (frames marked excluded in
/// `y` are ignored) and its gradient with respect to each posterior.
pub fn bce_loss(y: &VoicingLabels, p: &VoicingPosterior) -> Result<(f64, Vec<f64>)> {
    if y.len() != p.len() {
        return Err(Error::LengthMismatch { left: y.len(), right: p.len() });
    }
    let n = (0..y.len()).filter(|&t| !y.is_excluded(t)).count();
    let mut grad = vec![0.0; y.len()];
    if n == 0 {
        return Ok((0.0, grad));
    }
    let mut loss = 0.0;
    for (t, g) in grad.iter_mut().enumerate() {
        if y.is_excluded(t) {
            continue;
        }
        let pc = p.probs[t].clamp(POSTERIOR_EPS, 1.0 - POSTERIOR_EPS);
        let yv = y.labels()[t] as f64;
        loss -= yv * pc.ln() + (1.0 - yv) * (1.0 - pc).ln();
        *g = (pc - yv) / (pc * (1.0 - pc)) / n as f64;
    }
    Ok((loss / n as f64, grad))
}

#[derive(Debug, Clone)]
struct CompIds {
    geom: FreqConv,
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone)]
struct BlockIds {
    comps: Vec<CompIds>,
    geom: FreqConv,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone, Copy)]
struct LstmIds {
    w_ih: usize,
    w_hh: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct GroupIds {
    fwd: LstmIds,
    bwd: LstmIds,
    proj_w: usize,
    proj_b: usize,
}

#[derive(Debug, Clone)]
struct RecIds {
    groups: Vec<GroupIds>,
    ln_gamma: usize,
    ln_beta: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<BlockIds>,
    rec: Vec<RecIds>,
    head_w: usize,
    head_b: usize,
}

enum Init<'a> {
    Zeros,
    Random(&'a mut ChaCha8Rng),
}

impl Init<'_> {
    fn uniform(&mut self, n: usize, bound: f64) -> Vec<f64> {
        match self {
            Init::Zeros => vec![0.0; n],
            Init::Random(rng) => (0..n).map(|_| rng.random_range(-bound..=bound)).collect(),
        }
    }

    /// Four stacked `h×h` orthogonal blocks.
    fn orthogonal_blocks(&mut self, h: usize) -> Vec<f64> {
        let Init::Random(rng) = self else {
            return vec![0.0; 4 * h * h];
        };
        let mut out = Vec::with_capacity(4 * h * h);
        for _ in 0..4 {
            let mut m: Vec<f64> = (0..h * h).map(|_| StandardNormal.sample(&mut **rng)).collect();
            for i in 0..h {
                for j in 0..i {
                    let proj = dot(&m[i * h..(i + 1) * h], &m[j * h..(j + 1) * h]);
                    for k in 0..h {
                        m[i * h + k] -= proj * m[j * h + k];
                    }
                }
                let norm = dot(&m[i * h..(i + 1) * h], &m[i * h..(i + 1) * h]).sqrt();
                m[i * h..(i + 1) * h].iter_mut().for_each(|v| *v /= norm);
            }
            out.extend(m);
        }
        out
    }
}

fn build(cfg: &ModelConfig, store: &mut ParamStore, mut init: Init) -> Layout {
    let mut blocks = Vec::new();
    for (bi, &c_out) in cfg.block_out_channels.iter().enumerate() {
        let mut comps = Vec::new();
        for l in 0..cfg.composite_layers {
            let geom = FreqConv {
                c_in: cfg.composite_in_channels(bi, l),
                c_out: cfg.composite_growth,
                kernel: cfg.composite_kernel,
                stride: 1,
                pad: cfg.composite_pad,
            };
            let p = format!("block{bi}.comp{l}");
            let g = geom.c_out;
            let bound = (6.0 / (geom.c_in * geom.kernel) as f64).sqrt();
            comps.push(CompIds {
                geom,
                w: store.push(format!("{p}.conv.w"), vec![g, geom.c_in, geom.kernel], init.uniform(geom.weight_len(), bound), true),
                b: store.push(format!("{p}.conv.b"), vec![g], vec![0.0; g], true),
                gamma: store.push(format!("{p}.bn.gamma"), vec![g], vec![1.0; g], true),
                beta: store.push(format!("{p}.bn.beta"), vec![g], vec![0.0; g], true),
                mean: store.push(format!("{p}.bn.running_mean"), vec![g], vec![0.0; g], false),
                var: store.push(format!("{p}.bn.running_var"), vec![g], vec![1.0; g], false),
            });
        }
        let geom = FreqConv {
            c_in: cfg.composite_in_channels(bi, cfg.composite_layers),
            c_out,
            kernel: cfg.gated_kernel,
            stride: cfg.gated_stride,
            pad: cfg.gated_pad,
        };
        let bound = (6.0 / (geom.c_in * geom.kernel) as f64).sqrt();
        let shape = vec![c_out, geom.c_in, geom.kernel];
        let p = format!("block{bi}.gate");
        blocks.push(BlockIds {
            comps,
            geom,
            w1: store.push(format!("{p}.w1"), shape.clone(), init.uniform(geom.weight_len(), bound), true),
            b1: store.push(format!("{p}.b1"), vec![c_out], vec![0.0; c_out], true),
            w2: store.push(format!("{p}.w2"), shape, init.uniform(geom.weight_len(), bound), true),
            b2: store.push(format!("{p}.b2"), vec![c_out], vec![0.0; c_out], true),
        });
    }
    let width = cfg.recurrent_width();
    let mut rec = Vec::new();
    for li in 0..cfg.blstm_layers {
        let gw = width / cfg.groups;
        let h = cfg.blstm_hidden;
        let mut groups = Vec::new();
        for gi in 0..cfg.groups {
            let mut lstm = |dir: &str, init: &mut Init| {
                let p = format!("rec{li}.g{gi}.{dir}");
                let mut b = vec![0.0; 4 * h];
                b[h..2 * h].fill(1.0);
                LstmIds {
                    w_ih: store.push(format!("{p}.w_ih"), vec![4 * h, gw], init.uniform(4 * h * gw, (1.0 / gw as f64).sqrt()), true),
                    w_hh: store.push(format!("{p}.w_hh"), vec![4 * h, h], init.orthogonal_blocks(h), true),
                    b: store.push(format!("{p}.b"), vec![4 * h], b, true),
                }
            };
            let fwd = lstm("fwd", &mut init);
            let bwd = lstm("bwd", &mut init);
            let p = format!("rec{li}.g{gi}.proj");
            groups.push(GroupIds {
                fwd,
                bwd,
                proj_w: store.push(format!("{p}.w"), vec![gw, 2 * h], init.uniform(gw * 2 * h, (3.0 / (2 * h) as f64).sqrt()), true),
                proj_b: store.push(format!("{p}.b"), vec![gw], vec![0.0; gw], true),
            });
        }
        rec.push(RecIds {
            groups,
            ln_gamma: store.push(format!("rec{li}.ln.gamma"), vec![width], vec![1.0; width], true),
            ln_beta: store.push(format!("rec{li}.ln.beta"), vec![width], vec![0.0; width], true),
        });
    }
    let head_w = store.push("head.w", vec![width], init.uniform(width, (3.0 / width as f64).sqrt()), true);
    let head_b = store.push("head.b", vec![1], vec![0.0], true);
    Layout { blocks, rec, head_w, head_b }
}

/// Intermediates of one forward pass, consumed by [`DcCrn::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    blocks: Vec<BlockCache>,
    conv_shape: (usize, usize, usize),
    rec: Vec<RecurrentLayerCache>,
    head_in: Vec<f64>,
    raw: Vec<f64>,
}

/// The DC-CRN voicing detector: Conv-DC blocks, grouped BLSTM layers and a
/// sigmoid head.
#[derive(Debug, Clone)]
pub struct DcCrn {
    cfg: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl DcCrn {
    /// Seeded initialization: fan-in uniform convolutions, orthogonal
    /// recurrent blocks, zero biases, forget-gate bias 1.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        let layout = build(&cfg, &mut params, Init::Random(&mut rng));
        Ok(Self { cfg, params, layout })
    }

    /// Rebuilds a model around stored arrays; names and shapes must match.
    pub fn from_params(cfg: ModelConfig, stored: &ParamStore) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::default();
        let layout = build(&cfg, &mut params, Init::Zeros);
        params.copy_from(stored)?;
        Ok(Self { cfg, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn count_params(&self) -> usize {
        self.params.count_params()
    }

    fn block_view(&self, b: usize) -> BlockView<'_> {
        let ids = &self.layout.blocks[b];
        let p = &self.params;
        BlockView {
            composites: ids
                .comps
                .iter()
                .map(|c| CompositeView {
                    conv: ConvView { geom: c.geom, w: p.get(c.w), b: p.get(c.b) },
                    bn: BnView {
                        gamma: p.get(c.gamma),
                        beta: p.get(c.beta),
                        running_mean: p.get(c.mean),
                        running_var: p.get(c.var),
                        eps: self.cfg.bn_eps,
                    },
                })
                .collect(),
            gated: GatedView {
                linear: ConvView { geom: ids.geom, w: p.get(ids.w1), b: p.get(ids.b1) },
                gate: ConvView { geom: ids.geom, w: p.get(ids.w2), b: p.get(ids.b2) },
            },
        }
    }

    fn rec_view(&self, l: usize) -> RecurrentLayerView<'_> {
        let ids = &self.layout.rec[l];
        let p = &self.params;
        let gw = self.cfg.recurrent_width() / self.cfg.groups;
        let h = self.cfg.blstm_hidden;
        let lstm = |i: LstmIds| LstmView { w_ih: p.get(i.w_ih), w_hh: p.get(i.w_hh), b: p.get(i.b), input: gw, hidden: h };
        RecurrentLayerView {
            groups: ids
                .groups
                .iter()
                .map(|g| GroupView { fwd: lstm(g.fwd), bwd: lstm(g.bwd), proj_w: p.get(g.proj_w), proj_b: p.get(g.proj_b) })
                .collect(),
            ln_gamma: p.get(ids.ln_gamma),
            ln_beta: p.get(ids.ln_beta),
            ln_eps: self.cfg.ln_eps,
        }
    }

    /// `[2, T, F]` feature planes as a batch-of-one conv input.
    pub fn input_tensor(&self, feat: &FeatureTensor) -> Result<Tensor> {
        if feat.n_bins() != self.cfg.input_freq_bins || self.cfg.input_channels != 2 {
            return Err(Error::shape(format!(
                "features have {} bins, model expects {} bins in {} channels",
                feat.n_bins(), self.cfg.input_freq_bins, self.cfg.input_channels
            )));
        }
        Tensor::new(vec![1, 2, feat.n_frames(), feat.n_bins()], feat.to_channel_planes())
    }

    pub fn forward(&self, feat: &FeatureTensor, mode: Mode) -> Result<(VoicingPosterior, ForwardCache)> {
        let x = self.input_tensor(feat)?;
        self.forward_tensor(&x, mode, None)
    }

    /// Forward pass on a `[1, C, T, F]` input.
    pub fn forward_tensor(&self, x: &Tensor, mode: Mode, knockout: Option<(usize, usize)>) -> Result<(VoicingPosterior, ForwardCache)> {
        let (nb, nc, nt, nf) = x.dims4()?;
        if nb != 1 || nc != self.cfg.input_channels || nf != self.cfg.input_freq_bins {
            return Err(Error::shape(format!("model input {:?} does not match the configuration", x.shape())));
        }
        if nt == 0 {
            return Err(Error::shape("model input has no frames"));
        }
        let mut cur = x.clone();
        let mut blocks = Vec::with_capacity(self.layout.blocks.len());
        for b in 0..self.layout.blocks.len() {
            let ko = knockout.and_then(|(kb, kl)| (kb == b).then_some(kl));
            let (y, cache) = block_forward_impl(&cur, &self.block_view(b), mode, ko)?;
            blocks.push(cache);
            cur = y;
        }
        let (_, c, t, f) = cur.dims4()?;
        let width = c * f;
        let mut seq = vec![0.0; t * width];
        for ci in 0..c {
            for ti in 0..t {
                for fi in 0..f {
                    seq[ti * width + ci * f + fi] = cur.data()[(ci * t + ti) * f + fi];
                }
            }
        }
        let mut rec = Vec::with_capacity(self.layout.rec.len());
        for l in 0..self.layout.rec.len() {
            if l > 0 {
                seq = channel_shuffle(&seq, width, self.cfg.groups);
            }
            let (y, cache) = grouped_blstm_layer_forward(&Tensor::from_raw(vec![t, width], seq), &self.rec_view(l))?;
            rec.push(cache);
            seq = y.into_data();
        }
        let w = self.params.get(self.layout.head_w);
        let b = self.params.get(self.layout.head_b)[0];
        let raw: Vec<f64> = seq.chunks_exact(width).map(|r| sigmoid(dot(w, r) + b)).collect();
        let probs = raw.iter().map(|p| p.clamp(POSTERIOR_EPS, 1.0 - POSTERIOR_EPS)).collect();
        Ok((
            VoicingPosterior { probs },
            ForwardCache { mode, blocks, conv_shape: (c, t, f), rec, head_in: seq, raw },
        ))
    }

    /// Inference-mode posteriors.
    pub fn predict(&self, feat: &FeatureTensor) -> Result<VoicingPosterior> {
        Ok(self.forward(feat, Mode::Inference)?.0)
    }

    /// Gradients of a loss with respect to every trainable array, given
    /// `dL/dp` per frame. Needs a training-mode cache.
    pub fn backward(&self, cache: &ForwardCache, grad_p: &[f64]) -> Result<ParamGrads> {
        if cache.mode != Mode::Train {
            return Err(Error::MissingCache);
        }
        let (c, t, f) = cache.conv_shape;
        if grad_p.len() != t {
            return Err(Error::LengthMismatch { left: grad_p.len(), right: t });
        }
        let width = c * f;
        let mut grads = self.params.zero_grads();
        let w = self.params.get(self.layout.head_w);
        let mut gseq = vec![0.0; t * width];
        {
            let mut gw = vec![0.0; width];
            let mut gb = 0.0;
            for ti in 0..t {
                let s = cache.raw[ti];
                if !(POSTERIOR_EPS..=1.0 - POSTERIOR_EPS).contains(&s) {
                    continue;
                }
                let gl = grad_p[ti] * s * (1.0 - s);
                gb += gl;
                let row = &cache.head_in[ti * width..(ti + 1) * width];
                for j in 0..width {
                    gw[j] += gl * row[j];
                    gseq[ti * width + j] = gl * w[j];
                }
            }
            grads.values[self.layout.head_w] = gw;
            grads.values[self.layout.head_b] = vec![gb];
        }
        for l in (0..self.layout.rec.len()).rev() {
            let g = grouped_blstm_layer_backward(&Tensor::from_raw(vec![t, width], gseq), &self.rec_view(l), &cache.rec[l])?;
            let ids = &self.layout.rec[l];
            grads.values[ids.ln_gamma] = g.ln_gamma;
            grads.values[ids.ln_beta] = g.ln_beta;
            for (gi, gg) in ids.groups.iter().zip(g.groups) {
                grads.values[gi.fwd.w_ih] = gg.fwd.w_ih;
                grads.values[gi.fwd.w_hh] = gg.fwd.w_hh;
                grads.values[gi.fwd.b] = gg.fwd.b;
                grads.values[gi.bwd.w_ih] = gg.bwd.w_ih;
                grads.values[gi.bwd.w_hh] = gg.bwd.w_hh;
                grads.values[gi.bwd.b] = gg.bwd.b;
                grads.values[gi.proj_w] = gg.proj_w;
                grads.values[gi.proj_b] = gg.proj_b;
            }
            gseq = g.input.into_data();
            if l > 0 {
                gseq = channel_unshuffle(&gseq, width, self.cfg.groups);
            }
        }
        let mut gx = vec![0.0; c * t * f];
        for ci in 0..c {
            for ti in 0..t {
                for fi in 0..f {
                    gx[(ci * t + ti) * f + fi] = gseq[ti * width + ci * f + fi];
                }
            }
        }
        let mut gcur = Tensor::from_raw(vec![1, c, t, f], gx);
        for b in (0..self.layout.blocks.len()).rev() {
            let g = conv_dc_block_backward(&gcur, &self.block_view(b), &cache.blocks[b])?;
            let ids = &self.layout.blocks[b];
            for (ci, cg) in ids.comps.iter().zip(g.composites) {
                grads.values[ci.w] = cg.w;
                grads.values[ci.b] = cg.b;
                grads.values[ci.gamma] = cg.gamma;
                grads.values[ci.beta] = cg.beta;
            }
            grads.values[ids.w1] = g.gated.w1;
            grads.values[ids.b1] = g.gated.b1;
            grads.values[ids.w2] = g.gated.w2;
            grads.values[ids.b2] = g.gated.b2;
            gcur = g.input;
        }
        Ok(grads)
    }

    /// Folds a training pass's batch statistics into the running averages.
    pub fn update_bn_running(&mut self, cache: &ForwardCache) {
        let m = self.cfg.bn_momentum;
        for (ids, bc) in self.layout.blocks.iter().zip(&cache.blocks) {
            for (ci, cc) in ids.comps.iter().zip(&bc.composites) {
                let Some(bn) = &cc.bn else { continue };
                for (r, v) in self.params.get_mut(ci.mean).iter_mut().zip(&bn.mean) {
                    *r = m * *r + (1.0 - m) * v;
                }
                for (r, v) in self.params.get_mut(ci.var).iter_mut().zip(&bn.var) {
                    *r = m * *r + (1.0 - m) * v;
                }
            }
        }
    }
}

/// Zero-filled parameter arrays of a configuration, in checkpoint order.
pub fn param_layout(cfg: &ModelConfig) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = ParamStore::default();
    build(cfg, &mut store, Init::Zeros);
    Ok(store)
}

/// Inference-mode forward pass.
pub fn model_forward(feat: &FeatureTensor, model: &DcCrn) -> Result<VoicingPosterior> {
    model.predict(feat)
}

/// Trainable scalars.
pub fn count_params(params: &ParamStore) -> usize {
    params.count_params()
}

/// Input and recurrent gate weights of all BLSTM cells (projections excluded).
pub fn blstm_gate_weight_count(params: &ParamStore) -> usize {
    params.count_matching(|n| n.ends_with(".w_ih") || n.ends_with(".w_hh"))
}

/// The recurrent stack alone on a `[T, width]` sequence.
pub fn grouped_blstm_forward(x: &Tensor, model: &DcCrn) -> Result<Tensor> {
    let (t, width) = x.dims2()?;
    if width != model.cfg.recurrent_width() {
        return Err(Error::shape(format!("sequence width {width}, model expects {}", model.cfg.recurrent_width())));
    }
    let mut seq = x.data().to_vec();
    for l in 0..model.layout.rec.len() {
        if l > 0 {
            seq = channel_shuffle(&seq, width, model.cfg.groups);
        }
        seq = grouped_blstm_layer_forward(&Tensor::from_raw(vec![t, width], seq), &model.rec_view(l))?.0.into_data();
    }
    Ok(Tensor::from_raw(vec![t, width], seq))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(cfg: &ModelConfig, t: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 * t * cfg.input_freq_bins;
        Tensor::new(vec![1, 2, t, cfg.input_freq_bins], (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn decisions_and_loss_basics() {
        let p = VoicingPosterior::new(vec![0.4, 0.6, 0.5]).unwrap();
        assert_eq!(decide_voicing(&p, 0.5).unwrap().labels(), &[0, 1, 0]);
        assert!(decide_voicing(&p, 1.0).is_err());
        assert!(VoicingPosterior::new(vec![1.0]).is_err());
        let y = VoicingLabels::new(vec![1, 0, 1]).unwrap();
        let half = VoicingPosterior::new(vec![0.5; 3]).unwrap();
        let (l, _) = bce_loss(&y, &half).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let good = VoicingPosterior::new(vec![1.0 - POSTERIOR_EPS, POSTERIOR_EPS, 1.0 - POSTERIOR_EPS]).unwrap();
        assert!(bce_loss(&y, &good).unwrap().0 < 1e-6);
        assert!(bce_loss(&y, &VoicingPosterior::new(vec![0.5; 2]).unwrap()).is_err());
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let y = VoicingLabels::new(vec![1, 0, 1, 1, 0]).unwrap();
        let probs = vec![0.3, 0.8, 0.55, 0.9, 0.1];
        let (_, g) = bce_loss(&y, &VoicingPosterior::new(probs.clone()).unwrap()).unwrap();
        for i in 0..probs.len() {
            let mut pp = probs.clone();
            pp[i] += 1e-6;
            let lp = bce_loss(&y, &VoicingPosterior::new(pp.clone()).unwrap()).unwrap().0;
            pp[i] -= 2e-6;
            let lm = bce_loss(&y, &VoicingPosterior::new(pp).unwrap()).unwrap().0;
            let n = (lp - lm) / 2e-6;
            assert!((g[i] - n).abs() / n.abs() < 1e-6);
        }
    }

    #[test]
    fn tiny_model_shapes_and_determinism() {
        let cfg = ModelConfig::tiny();
        let m = DcCrn::new(cfg.clone(), 1).unwrap();
        for t in [1, 5] {
            let x = random_input(&cfg, t, 2);
            let (p, _) = m.forward_tensor(&x, Mode::Inference, None).unwrap();
            assert_eq!(p.len(), t);
            assert!(p.probs().iter().all(|v| *v > 0.0 && *v < 1.0));
            let (q, _) = m.forward_tensor(&x, Mode::Inference, None).unwrap();
            assert_eq!(p, q);
        }
        assert_eq!(DcCrn::new(cfg.clone(), 1).unwrap().params(), m.params());
        assert_ne!(DcCrn::new(cfg, 2).unwrap().params(), m.params());
    }

    #[test]
    fn orthogonal_recurrent_init() {
        let m = DcCrn::new(ModelConfig::tiny(), 3).unwrap();
        let w = m.params().by_name("rec0.g0.fwd.w_hh").unwrap();
        let h = 32;
        for g in 0..4 {
            let blk = &w.data[g * h * h..(g + 1) * h * h];
            for i in 0..h {
                for j in 0..h {
                    let d = dot(&blk[i * h..(i + 1) * h], &blk[j * h..(j + 1) * h]);
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
                }
            }
        }
        let b = m.params().by_name("rec1.g1.bwd.b").unwrap();
        assert_eq!(&b.data[32..64], &[1.0; 32]);
    }

    #[test]
    fn grouped_weight_ratio() {
        let base = ModelConfig::reduced();
        let width = base.recurrent_width();
        let h = 8;
        let grouped = ModelConfig { blstm_hidden: h, groups: 4, ..base.clone() };
        let flat = ModelConfig { blstm_hidden: 4 * h, groups: 1, ..base };
        // closed form: per layer, group and direction 4h(d + h)
        let closed = |g: usize, h: usize| 2 * 2 * g * 4 * h * (width / g + h);
        let s = param_layout(&grouped).unwrap();
        let u = param_layout(&flat).unwrap();
        assert_eq!(blstm_gate_weight_count(&s), closed(4, h));
        assert_eq!(blstm_gate_weight_count(&u), closed(1, 4 * h));
        assert_eq!(4 * blstm_gate_weight_count(&s), blstm_gate_weight_count(&u));
    }

    #[test]
    fn backward_requires_training_cache() {
        let cfg = ModelConfig::tiny();
        let m = DcCrn::new(cfg.clone(), 1).unwrap();
        let (_, cache) = m.forward_tensor(&random_input(&cfg, 3, 1), Mode::Inference, None).unwrap();
        assert!(matches!(m.backward(&cache, &[0.0; 3]), Err(Error::MissingCache)));
    }
}
