use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{ArchitectureConfig, MASK_BINS};
use super::ops::{self, BatchNormCache, ConvGeometry};
use super::Tensor;
use crate::mask::SEGMENT_FRAMES;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BnRunning<T> {
    pub name: String,
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// Trainable tensors in a fixed order plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NetworkParameters<T = f64> {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<T>>,
    pub running: Vec<BnRunning<T>>,
}

enum Init {
    Xavier { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
}

struct ParamSpec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn push_conv(out: &mut Vec<ParamSpec>, prefix: &str, w_shape: [usize; 4], cin: usize, cout: usize, bn: bool) {
    let k = w_shape[2] * w_shape[3];
    out.push(ParamSpec {
        name: format!("{prefix}.weight"),
        shape: w_shape.to_vec(),
        init: Init::Xavier { fan_in: cin * k, fan_out: cout * k },
    });
    out.push(ParamSpec { name: format!("{prefix}.bias"), shape: vec![cout], init: Init::Zeros });
    if bn {
        out.push(ParamSpec { name: format!("{prefix}.bn.gamma"), shape: vec![cout], init: Init::Ones });
        out.push(ParamSpec { name: format!("{prefix}.bn.beta"), shape: vec![cout], init: Init::Zeros });
    }
}

fn layout(cfg: &ArchitectureConfig) -> Result<Vec<ParamSpec>> {
    cfg.validate()?;
    let mut specs = Vec::new();
    if cfg.modality.uses_audio() {
        let shapes = cfg.audio_shapes()?;
        for (k, l) in cfg.audio_encoder.iter().enumerate() {
            let (cin, g) = (shapes[k][0], l.geometry);
            push_conv(&mut specs, &format!("audio.{}", k + 1), [l.out_channels, cin, g.kernel[0], g.kernel[1]], cin, l.out_channels, true);
        }
    }
    if cfg.modality.uses_video() {
        let shapes = cfg.video_shapes()?;
        for (k, l) in cfg.video_encoder.iter().enumerate() {
            let (cin, g) = (shapes[k][0], l.geometry);
            push_conv(&mut specs, &format!("video.{}", k + 1), [l.out_channels, cin, g.kernel[0], g.kernel[1]], cin, l.out_channels, true);
        }
    }
    let mut fin = cfg.fusion_input_len()?;
    let hidden_bn = cfg.normalizes_hidden();
    for (i, &w) in cfg.fusion.iter().enumerate() {
        specs.push(ParamSpec {
            name: format!("fusion.{}.weight", i + 1),
            shape: vec![w, fin],
            init: Init::Xavier { fan_in: fin, fan_out: w },
        });
        specs.push(ParamSpec { name: format!("fusion.{}.bias", i + 1), shape: vec![w], init: Init::Zeros });
        if hidden_bn {
            specs.push(ParamSpec { name: format!("fusion.{}.bn.gamma", i + 1), shape: vec![w], init: Init::Ones });
            specs.push(ParamSpec { name: format!("fusion.{}.bn.beta", i + 1), shape: vec![w], init: Init::Zeros });
        }
        fin = w;
    }
    let n = cfg.audio_encoder.len();
    for j in 0..n {
        let g = cfg.audio_encoder[n - 1 - j].geometry;
        let (cin, cout) = cfg.decoder_channels(j);
        push_conv(&mut specs, &format!("decoder.{}", j + 1), [cin, cout, g.kernel[0], g.kernel[1]], cin, cout, hidden_bn && j + 1 < n);
    }
    Ok(specs)
}

/// Xavier-uniform weights, zero biases, unit batch-norm scales.
pub fn init_parameters<T: Real>(cfg: &ArchitectureConfig, seed: u64) -> Result<NetworkParameters<T>> {
    let specs = layout(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParameters { names: Vec::new(), tensors: Vec::new(), running: Vec::new() };
    for s in specs {
        let n: usize = s.shape.iter().product();
        let data: Vec<T> = match s.init {
            Init::Xavier { fan_in, fan_out } => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..n).map(|_| T::lit(rng.random_range(-a..a))).collect()
            }
            Init::Zeros => vec![T::zero(); n],
            Init::Ones => vec![T::one(); n],
        };
        if let Some(bn) = s.name.strip_suffix(".gamma") {
            params.running.push(BnRunning { name: bn.to_string(), mean: vec![T::zero(); n], var: vec![T::one(); n] });
        }
        params.tensors.push(Tensor::from_vec(&s.shape, data)?);
        params.names.push(s.name);
    }
    Ok(params)
}

impl<T: Real> NetworkParameters<T> {
    pub fn check_against(&self, cfg: &ArchitectureConfig) -> Result<()> {
        let specs = layout(cfg)?;
        if specs.len() != self.tensors.len() {
            return Err(Error::shape(specs.len(), self.tensors.len()));
        }
        for (s, (name, t)) in specs.iter().zip(self.names.iter().zip(&self.tensors)) {
            if &s.name != name || s.shape != t.shape() {
                return Err(Error::shape(format!("{} {:?}", s.name, s.shape), format!("{name} {:?}", t.shape())));
            }
            if !t.all_finite() {
                return Err(Error::NonFinite(name.clone()));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Exponential moving average of the batch statistics seen in `cache`.
    pub fn update_running(&mut self, cache: &ForwardCache<T>, momentum: f64) {
        let m = T::lit(momentum);
        for (slot, mean, var, count) in &cache.batch_stats {
            let r = &mut self.running[*slot];
            let unbias = if *count > 1 { T::from_usize_(*count) / T::from_usize_(count - 1) } else { T::one() };
            for c in 0..mean.len() {
                r.mean[c] = (T::one() - m) * r.mean[c] + m * mean[c];
                r.var[c] = (T::one() - m) * r.var[c] + m * var[c] * unbias;
            }
        }
    }
}

/// Network inputs for one batch of segments.
#[derive(Debug, Clone)]
pub struct SegmentBatch<T = f64> {
    /// `[B, 321, 20]` standardised audio features.
    pub audio: Option<Tensor<T>>,
    /// `[B, 5, S, S]` standardised mouth crops.
    pub video: Option<Tensor<T>>,
    /// `[B, 321, 20]` target masks.
    pub target: Option<Tensor<T>>,
}

impl<T: Real> SegmentBatch<T> {
    pub fn len(&self) -> usize {
        self.audio.as_ref().or(self.video.as_ref()).map(|t| t.shape()[0]).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Act {
    Leaky,
    Relu,
}

struct BlockCache<T> {
    act: Act,
    input: Tensor<T>,
    pre_act: Tensor<T>,
    bn: Option<BatchNormCache<T>>,
    pool: Option<(Vec<usize>, Vec<usize>)>,
    dropout: Option<Vec<T>>,
    first_param: usize,
    geometry: Option<ConvGeometry>,
}

/// Activations retained for [`backward`].
pub struct ForwardCache<T> {
    audio: Vec<BlockCache<T>>,
    video: Vec<BlockCache<T>>,
    fusion: Vec<BlockCache<T>>,
    decoder: Vec<BlockCache<T>>,
    fusion_widths: Vec<usize>,
    skip_channels: Vec<usize>,
    /// Output before cropping, `[B, 1, F_pad, T]`.
    output: Tensor<T>,
    batch: usize,
    batch_stats: Vec<(usize, Vec<T>, Vec<T>, usize)>,
}

enum Kind {
    Conv,
    Deconv,
    Dense,
}

/// Activation branches and pooling winners of every block of one forward
/// pass. Replaying them turns the network into the linear piece that
/// contains the recorded point, which is what finite differences of a
/// piecewise-linear network must be taken on.
#[derive(Debug, Clone)]
pub struct ActivationPattern {
    blocks: Vec<(Vec<bool>, Option<Vec<usize>>)>,
}

impl<T: Real> ForwardCache<T> {
    pub fn activation_pattern(&self) -> ActivationPattern {
        let blocks = self
            .audio
            .iter()
            .chain(&self.video)
            .chain(&self.fusion)
            .chain(&self.decoder)
            .map(|c| {
                let scaled = c
                    .pre_act
                    .data()
                    .iter()
                    .map(|&v| match c.act {
                        Act::Leaky => v < T::zero(),
                        Act::Relu => v <= T::zero(),
                    })
                    .collect();
                (scaled, c.pool.as_ref().map(|(_, a)| a.clone()))
            })
            .collect();
        ActivationPattern { blocks }
    }
}

struct Ctx<'a, T> {
    params: &'a NetworkParameters<T>,
    pattern: Option<&'a ActivationPattern>,
    block_index: usize,
    cfg: &'a ArchitectureConfig,
    mode: Mode,
    cursor: usize,
    bn_slot: usize,
    stats: Vec<(usize, Vec<T>, Vec<T>, usize)>,
}

impl<T: Real> Ctx<'_, T> {
    fn block(
        &mut self,
        name: &str,
        x: Tensor<T>,
        kind: Kind,
        geometry: Option<ConvGeometry>,
        act: Act,
        bn: bool,
        pool: bool,
    ) -> Result<(Tensor<T>, BlockCache<T>)> {
        let first = self.cursor;
        let (w, b) = (&self.params.tensors[first], &self.params.tensors[first + 1]);
        self.cursor += 2;
        let pre = match kind {
            Kind::Conv => ops::conv2d(&x, w, b, geometry.as_ref().unwrap())?,
            Kind::Deconv => ops::conv_transpose2d(&x, w, b, geometry.as_ref().unwrap())?,
            Kind::Dense => ops::linear(&x, w, b)?,
        };
        if !pre.all_finite() {
            return Err(Error::NonFinite(format!("layer {name}")));
        }
        let replay = match self.pattern {
            Some(p) => {
                let r = p.blocks.get(self.block_index).ok_or_else(|| Error::shape(self.block_index + 1, p.blocks.len()))?;
                if r.0.len() != pre.len() {
                    return Err(Error::shape(r.0.len(), pre.len()));
                }
                Some(r)
            }
            None => None,
        };
        self.block_index += 1;
        let mut cache = BlockCache { act, input: x, pre_act: pre, bn: None, pool: None, dropout: None, first_param: first, geometry };
        let slope = match act {
            Act::Leaky => T::lit(self.cfg.leaky_slope),
            Act::Relu => T::zero(),
        };
        let mut y = match replay {
            Some((scaled, _)) => ops::fixed_branch(&cache.pre_act, slope, scaled),
            None => ops::leaky_relu(&cache.pre_act, slope),
        };
        if bn {
            let (gamma, beta) = (&self.params.tensors[first + 2], &self.params.tensors[first + 3]);
            self.cursor += 2;
            let slot = self.bn_slot;
            self.bn_slot += 1;
            let running = &self.params.running[slot];
            let (normed, bc) = match self.mode {
                Mode::Train => ops::batch_norm(&y, gamma, beta, T::lit(self.cfg.bn_eps), None),
                Mode::Eval => ops::batch_norm(&y, gamma, beta, T::lit(self.cfg.bn_eps), Some((&running.mean, &running.var))),
            };
            if self.mode == Mode::Train {
                let count = y.len() / bc.mean.len();
                self.stats.push((slot, bc.mean.clone(), bc.var.clone(), count));
            }
            cache.bn = Some(bc);
            y = normed;
        }
        if pool {
            let shape = y.shape().to_vec();
            let (p, arg) = ops::max_pool2(&y);
            y = match replay {
                Some((_, Some(recorded))) => ops::gather(&y, recorded, p.shape())?,
                _ => p,
            };
            cache.pool = Some((shape, arg));
        }
        Ok((y, cache))
    }
}

fn flatten<T: Real>(t: Tensor<T>) -> Result<Tensor<T>> {
    let b = t.shape()[0];
    let n = t.len() / b.max(1);
    t.reshape(&[b, n])
}

/// Pads `[B, 321, 20]` features to `[B, 1, F_pad, 20]` with zero rows.
fn pad_audio<T: Real>(a: &Tensor<T>, padded: usize) -> Result<Tensor<T>> {
    let s = a.shape();
    if s.len() != 3 || s[1] != MASK_BINS || s[2] != SEGMENT_FRAMES {
        return Err(Error::shape(format!("[B, {MASK_BINS}, {SEGMENT_FRAMES}]"), format!("{s:?}")));
    }
    let plane = MASK_BINS * SEGMENT_FRAMES;
    let mut out = Tensor::zeros(&[s[0], 1, padded, SEGMENT_FRAMES]);
    for b in 0..s[0] {
        out.data_mut()[b * padded * SEGMENT_FRAMES..b * padded * SEGMENT_FRAMES + plane]
            .copy_from_slice(&a.data()[b * plane..(b + 1) * plane]);
    }
    Ok(out)
}

fn crop_output<T: Real>(y: &Tensor<T>) -> Tensor<T> {
    let [b, _, fp, t] = y.dims4();
    let plane = MASK_BINS * t;
    let mut out = Tensor::zeros(&[b, MASK_BINS, t]);
    for n in 0..b {
        out.data_mut()[n * plane..(n + 1) * plane].copy_from_slice(&y.data()[n * fp * t..n * fp * t + plane]);
    }
    out
}

/// Estimated masks `[B, 321, 20]` and the activations needed for the
/// reverse pass. `dropout_seed` drives the video dropout in train mode.
pub fn forward<T: Real>(
    params: &NetworkParameters<T>,
    cfg: &ArchitectureConfig,
    batch: &SegmentBatch<T>,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    forward_impl(params, cfg, batch, mode, dropout_seed, None)
}

/// [`forward`] with activation branches and pooling winners taken from
/// `pattern` instead of from the current values.
pub fn forward_with_pattern<T: Real>(
    params: &NetworkParameters<T>,
    cfg: &ArchitectureConfig,
    batch: &SegmentBatch<T>,
    mode: Mode,
    dropout_seed: u64,
    pattern: &ActivationPattern,
) -> Result<Tensor<T>> {
    Ok(forward_impl(params, cfg, batch, mode, dropout_seed, Some(pattern))?.0)
}

fn forward_impl<T: Real>(
    params: &NetworkParameters<T>,
    cfg: &ArchitectureConfig,
    batch: &SegmentBatch<T>,
    mode: Mode,
    dropout_seed: u64,
    pattern: Option<&ActivationPattern>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    let m = cfg.modality;
    if m.uses_audio() != batch.audio.is_some() || m.uses_video() != batch.video.is_some() {
        return Err(Error::Modality(format!("{m} network got audio={} video={}", batch.audio.is_some(), batch.video.is_some())));
    }
    let b = batch.len();
    if b == 0 {
        return Err(Error::Degenerate("empty batch".into()));
    }
    let mut ctx = Ctx { params, pattern, block_index: 0, cfg, mode, cursor: 0, bn_slot: 0, stats: Vec::new() };
    let mut cache = ForwardCache {
        audio: Vec::new(),
        video: Vec::new(),
        fusion: Vec::new(),
        decoder: Vec::new(),
        fusion_widths: Vec::new(),
        skip_channels: Vec::new(),
        output: Tensor::zeros(&[0]),
        batch: b,
        batch_stats: Vec::new(),
    };

    let mut skips: Vec<Tensor<T>> = Vec::new();
    let mut flat = Vec::new();
    if let Some(a) = &batch.audio {
        let mut x = pad_audio(a, cfg.padded_bins)?;
        for (k, l) in cfg.audio_encoder.iter().enumerate() {
            let (y, c) = ctx.block(&format!("audio.{}", k + 1), x, Kind::Conv, Some(l.geometry), Act::Leaky, true, false)?;
            cache.audio.push(c);
            skips.push(y.clone());
            x = y;
        }
        flat.push(flatten(x)?);
    }
    if let Some(v) = &batch.video {
        let expect = cfg.video_shapes()?[0];
        if v.shape()[1..] != expect[..] || v.shape()[0] != b {
            return Err(Error::shape(format!("[{b}, {expect:?}]"), format!("{:?}", v.shape())));
        }
        let mut x = v.clone();
        for (k, l) in cfg.video_encoder.iter().enumerate() {
            let (y, c) = ctx.block(&format!("video.{}", k + 1), x, Kind::Conv, Some(l.geometry), Act::Leaky, true, l.pool)?;
            cache.video.push(c);
            x = y;
        }
        if mode == Mode::Train && cfg.dropout > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
            let (y, scale) = ops::dropout(&x, cfg.dropout, &mut rng);
            cache.video.last_mut().unwrap().dropout = Some(scale);
            x = y;
        }
        flat.push(flatten(x)?);
    }
    cache.fusion_widths = flat.iter().map(|t| t.shape()[1]).collect();
    let mut z = Tensor::concat_features(&flat.iter().collect::<Vec<_>>())?;
    for i in 0..cfg.fusion.len() {
        let (y, c) = ctx.block(&format!("fusion.{}", i + 1), z, Kind::Dense, None, Act::Leaky, cfg.normalizes_hidden(), false)?;
        cache.fusion.push(c);
        z = y;
    }

    let shapes = cfg.audio_shapes()?;
    let n = cfg.audio_encoder.len();
    let [c6, f6, t6] = shapes[n];
    let mut x = z.reshape(&[b, c6, f6, t6])?;
    for j in 0..n {
        let k = n - j;
        if cfg.uses_skip(k) {
            cache.skip_channels.push(x.shape()[1]);
            x = Tensor::concat_channels(&x, &skips[k - 1])?;
        } else {
            cache.skip_channels.push(0);
        }
        let last = j + 1 == n;
        let g = cfg.audio_encoder[k - 1].geometry;
        let (y, c) = ctx.block(&format!("decoder.{}", j + 1), x, Kind::Deconv, Some(g), if last { Act::Relu } else { Act::Leaky }, cfg.normalizes_hidden() && !last, false)?;
        cache.decoder.push(c);
        x = y;
    }
    if ctx.cursor != params.tensors.len() {
        return Err(Error::shape(params.tensors.len(), ctx.cursor));
    }
    cache.batch_stats = ctx.stats;
    let out = crop_output(&x);
    cache.output = x;
    Ok((out, cache))
}

/// Mean squared mask error and its gradient with respect to the estimate.
pub fn mask_mse<T: Real>(estimate: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if estimate.shape() != target.shape() {
        return Err(Error::shape(format!("{:?}", target.shape()), format!("{:?}", estimate.shape())));
    }
    let n = T::from_usize_(estimate.len());
    let mut grad = Tensor::zeros(estimate.shape());
    let mut loss = T::zero();
    for ((g, &e), &t) in grad.data_mut().iter_mut().zip(estimate.data()).zip(target.data()) {
        let d = e - t;
        loss += d * d;
        *g = T::lit(2.0) * d / n;
    }
    Ok((loss / n, grad))
}

fn block_backward<T: Real>(
    params: &NetworkParameters<T>,
    cfg: &ArchitectureConfig,
    c: &BlockCache<T>,
    kind: Kind,
    mut gy: Tensor<T>,
    grads: &mut [Tensor<T>],
) -> Tensor<T> {
    if let Some(scale) = &c.dropout {
        gy = ops::scale_backward(scale, &gy);
    }
    if let Some((shape, arg)) = &c.pool {
        gy = ops::max_pool2_backward(shape, arg, &gy);
    }
    if let Some(bc) = &c.bn {
        let (g_act, gg, gb) = ops::batch_norm_backward(bc, &params.tensors[c.first_param + 2], &gy);
        grads[c.first_param + 2] = gg;
        grads[c.first_param + 3] = gb;
        gy = g_act;
    }
    let g_pre = match c.act {
        Act::Leaky => ops::leaky_relu_backward(&c.pre_act, T::lit(cfg.leaky_slope), &gy),
        Act::Relu => ops::relu_backward(&c.pre_act, &gy),
    };
    let w = &params.tensors[c.first_param];
    let (gx, gw, gb) = match kind {
        Kind::Conv => ops::conv2d_backward(&c.input, w, c.geometry.as_ref().unwrap(), &g_pre),
        Kind::Deconv => ops::conv_transpose2d_backward(&c.input, w, c.geometry.as_ref().unwrap(), &g_pre),
        Kind::Dense => ops::linear_backward(&c.input, w, &g_pre),
    };
    grads[c.first_param] = gw;
    grads[c.first_param + 1] = gb;
    gx
}

/// Gradients of the loss with respect to every parameter tensor, given the
/// gradient with respect to the cropped output.
pub fn backward<T: Real>(
    params: &NetworkParameters<T>,
    cfg: &ArchitectureConfig,
    cache: &ForwardCache<T>,
    grad_out: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let [b, _, fp, t] = cache.output.dims4();
    if grad_out.shape() != [b, MASK_BINS, t] {
        return Err(Error::shape(format!("[{b}, {MASK_BINS}, {t}]"), format!("{:?}", grad_out.shape())));
    }
    let mut grads: Vec<Tensor<T>> = params.tensors.iter().map(|p| Tensor::zeros(p.shape())).collect();
    let mut g = Tensor::zeros(cache.output.shape());
    let plane = MASK_BINS * t;
    for n in 0..b {
        g.data_mut()[n * fp * t..n * fp * t + plane].copy_from_slice(&grad_out.data()[n * plane..(n + 1) * plane]);
    }

    let n_layers = cache.decoder.len();
    let mut skip_grads: Vec<Option<Tensor<T>>> = vec![None; n_layers];
    for j in (0..n_layers).rev() {
        g = block_backward(params, cfg, &cache.decoder[j], Kind::Deconv, g, &mut grads);
        if cache.skip_channels[j] > 0 {
            let (main, skip) = g.split_channels(cache.skip_channels[j]);
            skip_grads[n_layers - j - 1] = Some(skip);
            g = main;
        }
    }
    g = flatten(g)?;
    for c in cache.fusion.iter().rev() {
        g = block_backward(params, cfg, c, Kind::Dense, g, &mut grads);
    }
    let parts = g.split_features(&cache.fusion_widths);
    let mut parts = parts.into_iter();
    if !cache.audio.is_empty() {
        let flat = parts.next().unwrap();
        let last = &cache.audio.last().unwrap().pre_act;
        let mut ga = flat.reshape(last.shape())?;
        for k in (0..cache.audio.len()).rev() {
            if let Some(s) = &skip_grads[k] {
                ga.add_assign(s);
            }
            ga = block_backward(params, cfg, &cache.audio[k], Kind::Conv, ga, &mut grads);
        }
    }
    if !cache.video.is_empty() {
        let flat = parts.next().unwrap();
        let mut gv = flat;
        let last = cache.video.last().unwrap();
        let out_shape = match &last.pool {
            Some((s, _)) => [s[0], s[1], s[2] / 2, s[3] / 2],
            None => last.pre_act.dims4(),
        };
        gv = gv.reshape(&out_shape)?;
        for c in cache.video.iter().rev() {
            gv = block_backward(params, cfg, c, Kind::Conv, gv, &mut grads);
        }
    }
    if let Some((i, _)) = grads.iter().enumerate().find(|(_, g)| !g.all_finite()) {
        return Err(Error::NonFinite(format!("gradient of {}", params.names[i])));
    }
    debug_assert_eq!(cache.batch, b);
    Ok(grads)
}
