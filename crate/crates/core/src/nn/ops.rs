//! Layer primitives with hand-written reverse passes. Activations are
//! `[B, C, H, W]` (or `[B, n]` for dense layers).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    pub padding: [usize; 2],
}

impl ConvGeometry {
    pub fn conv_out(&self, input: [usize; 2]) -> Result<[usize; 2]> {
        let mut out = [0; 2];
        for a in 0..2 {
            let span = input[a] + 2 * self.padding[a];
            if span < self.kernel[a] || self.stride[a] == 0 {
                return Err(Error::shape(format!("axis {a} extent >= kernel {}", self.kernel[a]), span));
            }
            out[a] = (span - self.kernel[a]) / self.stride[a] + 1;
        }
        Ok(out)
    }

    pub fn transpose_out(&self, input: [usize; 2]) -> Result<[usize; 2]> {
        let mut out = [0; 2];
        for a in 0..2 {
            let full = (input[a] - 1) * self.stride[a] + self.kernel[a];
            if input[a] == 0 || full <= 2 * self.padding[a] {
                return Err(Error::shape("positive transposed-conv output", full));
            }
            out[a] = full - 2 * self.padding[a];
        }
        Ok(out)
    }
}

/// Output indices `o` for which `o * stride + k - pad` lands in `[0, len)`.
fn valid(k: usize, pad: usize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let hi = if len + pad <= k { 0 } else { ((len - 1 + pad - k) / stride + 1).min(out_len) };
    (lo, hi.max(lo))
}

/// Unfolds one `[C, H, W]` image into `[C * kh * kw, Ho * Wo]` patch columns.
fn im2col<T: Real>(img: &[T], c: usize, hw: [usize; 2], g: &ConvGeometry, out: [usize; 2], col: &mut [T]) {
    let [kh, kw] = g.kernel;
    let p = out[0] * out[1];
    col.iter_mut().for_each(|v| *v = T::zero());
    for ch in 0..c {
        let plane = &img[ch * hw[0] * hw[1]..(ch + 1) * hw[0] * hw[1]];
        for ki in 0..kh {
            let (ilo, ihi) = valid(ki, g.padding[0], g.stride[0], hw[0], out[0]);
            for kj in 0..kw {
                let (jlo, jhi) = valid(kj, g.padding[1], g.stride[1], hw[1], out[1]);
                let row = &mut col[((ch * kh + ki) * kw + kj) * p..((ch * kh + ki) * kw + kj + 1) * p];
                for i in ilo..ihi {
                    let src = &plane[(i * g.stride[0] + ki - g.padding[0]) * hw[1]..];
                    for j in jlo..jhi {
                        row[i * out[1] + j] = src[j * g.stride[1] + kj - g.padding[1]];
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch columns back, accumulating.
fn col2im<T: Real>(col: &[T], c: usize, hw: [usize; 2], g: &ConvGeometry, out: [usize; 2], img: &mut [T]) {
    let [kh, kw] = g.kernel;
    let p = out[0] * out[1];
    for ch in 0..c {
        let plane = &mut img[ch * hw[0] * hw[1]..(ch + 1) * hw[0] * hw[1]];
        for ki in 0..kh {
            let (ilo, ihi) = valid(ki, g.padding[0], g.stride[0], hw[0], out[0]);
            for kj in 0..kw {
                let (jlo, jhi) = valid(kj, g.padding[1], g.stride[1], hw[1], out[1]);
                let row = &col[((ch * kh + ki) * kw + kj) * p..((ch * kh + ki) * kw + kj + 1) * p];
                for i in ilo..ihi {
                    let dst = &mut plane[(i * g.stride[0] + ki - g.padding[0]) * hw[1]..];
                    for j in jlo..jhi {
                        dst[j * g.stride[1] + kj - g.padding[1]] += row[i * out[1] + j];
                    }
                }
            }
        }
    }
}

/// `c[m, :] += sum_k a[m, k] * b[k, :]` with `a` as `[M, K]`, `b` as `[K, P]`.
fn gemm_acc<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, p: usize) {
    for mi in 0..m {
        let crow = &mut c[mi * p..(mi + 1) * p];
        for ki in 0..k {
            let av = a[mi * k + ki];
            for (cv, &bv) in crow.iter_mut().zip(&b[ki * p..(ki + 1) * p]) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[k, :] += sum_m a[m, k] * b[m, :]`, i.e. `c += a^T b`.
fn gemm_tn_acc<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, p: usize) {
    for mi in 0..m {
        let brow = &b[mi * p..(mi + 1) * p];
        for ki in 0..k {
            let av = a[mi * k + ki];
            for (cv, &bv) in c[ki * p..(ki + 1) * p].iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m, k] += dot(a[m, :], b[k, :])`, i.e. `c += a b^T`.
fn gemm_nt_acc<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, p: usize) {
    for mi in 0..m {
        let arow = &a[mi * p..(mi + 1) * p];
        for ki in 0..k {
            c[mi * k + ki] += arow.iter().zip(&b[ki * p..(ki + 1) * p]).map(|(&x, &y)| x * y).sum::<T>();
        }
    }
}

pub fn conv2d<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, g: &ConvGeometry) -> Result<Tensor<T>> {
    let [n, ci, h, wd] = x.dims4();
    let [co, wci, kh, kw] = w.dims4();
    if wci != ci || [kh, kw] != g.kernel || b.len() != co {
        return Err(Error::shape(format!("conv weight [{co}, {ci}, {:?}]", g.kernel), format!("{:?}", w.shape())));
    }
    let [ho, wo] = g.conv_out([h, wd])?;
    let (k, p) = (ci * kh * kw, ho * wo);
    let mut out = Tensor::zeros(&[n, co, ho, wo]);
    let mut col = vec![T::zero(); k * p];
    for bn in 0..n {
        im2col(&x.data()[bn * ci * h * wd..(bn + 1) * ci * h * wd], ci, [h, wd], g, [ho, wo], &mut col);
        let os = &mut out.data_mut()[bn * co * p..(bn + 1) * co * p];
        for (o, plane) in os.chunks_mut(p).enumerate() {
            plane.iter_mut().for_each(|v| *v = b.data()[o]);
        }
        gemm_acc(w.data(), &col, os, co, k, p);
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, weight and bias.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    g: &ConvGeometry,
    gy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let [n, ci, h, wd] = x.dims4();
    let [co, _, kh, kw] = w.dims4();
    let [_, _, ho, wo] = gy.dims4();
    let (k, p) = (ci * kh * kw, ho * wo);
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(&[co]);
    let mut col = vec![T::zero(); k * p];
    let mut gcol = vec![T::zero(); k * p];
    for bn in 0..n {
        let gys = &gy.data()[bn * co * p..(bn + 1) * co * p];
        for (o, plane) in gys.chunks(p).enumerate() {
            gb.data_mut()[o] += plane.iter().copied().sum();
        }
        im2col(&x.data()[bn * ci * h * wd..(bn + 1) * ci * h * wd], ci, [h, wd], g, [ho, wo], &mut col);
        gemm_nt_acc(gys, &col, gw.data_mut(), co, k, p);
        gcol.iter_mut().for_each(|v| *v = T::zero());
        gemm_tn_acc(w.data(), gys, &mut gcol, co, k, p);
        col2im(&gcol, ci, [h, wd], g, [ho, wo], &mut gx.data_mut()[bn * ci * h * wd..(bn + 1) * ci * h * wd]);
    }
    (gx, gw, gb)
}

/// Transposed convolution; weight is `[C_in, C_out, kh, kw]`.
pub fn conv_transpose2d<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, g: &ConvGeometry) -> Result<Tensor<T>> {
    let [n, ci, h, wd] = x.dims4();
    let [wci, co, kh, kw] = w.dims4();
    if wci != ci || [kh, kw] != g.kernel || b.len() != co {
        return Err(Error::shape(format!("conv-transpose weight [{ci}, {co}, {:?}]", g.kernel), format!("{:?}", w.shape())));
    }
    let [ho, wo] = g.transpose_out([h, wd])?;
    let (k, p) = (co * kh * kw, h * wd);
    let mut out = Tensor::zeros(&[n, co, ho, wo]);
    let mut col = vec![T::zero(); k * p];
    for bn in 0..n {
        col.iter_mut().for_each(|v| *v = T::zero());
        gemm_tn_acc(w.data(), &x.data()[bn * ci * p..(bn + 1) * ci * p], &mut col, ci, k, p);
        let os = &mut out.data_mut()[bn * co * ho * wo..(bn + 1) * co * ho * wo];
        for (o, plane) in os.chunks_mut(ho * wo).enumerate() {
            plane.iter_mut().for_each(|v| *v = b.data()[o]);
        }
        col2im(&col, co, [ho, wo], g, [h, wd], os);
    }
    Ok(out)
}

pub fn conv_transpose2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    g: &ConvGeometry,
    gy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let [n, ci, h, wd] = x.dims4();
    let [_, co, kh, kw] = w.dims4();
    let [_, _, ho, wo] = gy.dims4();
    let (k, p) = (co * kh * kw, h * wd);
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(&[co]);
    let mut col = vec![T::zero(); k * p];
    for bn in 0..n {
        let gys = &gy.data()[bn * co * ho * wo..(bn + 1) * co * ho * wo];
        for (o, plane) in gys.chunks(ho * wo).enumerate() {
            gb.data_mut()[o] += plane.iter().copied().sum();
        }
        im2col(gys, co, [ho, wo], g, [h, wd], &mut col);
        let xs = &x.data()[bn * ci * p..(bn + 1) * ci * p];
        gemm_nt_acc(xs, &col, gw.data_mut(), ci, k, p);
        gemm_acc(w.data(), &col, &mut gx.data_mut()[bn * ci * p..(bn + 1) * ci * p], ci, k, p);
    }
    (gx, gw, gb)
}

/// `y = x W^T + b` with `W` of shape `[out, in]`.
pub fn linear<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, fin) = (x.shape()[0], x.shape()[1]);
    let (fout, win) = (w.shape()[0], w.shape()[1]);
    if win != fin || b.len() != fout {
        return Err(Error::shape(format!("linear weight [_, {fin}]"), format!("{:?}", w.shape())));
    }
    let mut out = Tensor::zeros(&[n, fout]);
    for bn in 0..n {
        let xr = &x.data()[bn * fin..(bn + 1) * fin];
        for o in 0..fout {
            let wr = &w.data()[o * fin..(o + 1) * fin];
            out.data_mut()[bn * fout + o] = b.data()[o] + xr.iter().zip(wr).map(|(&a, &c)| a * c).sum::<T>();
        }
    }
    Ok(out)
}

pub fn linear_backward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, gy: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, fin) = (x.shape()[0], x.shape()[1]);
    let fout = w.shape()[0];
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(&[fout]);
    for bn in 0..n {
        let xr = &x.data()[bn * fin..(bn + 1) * fin];
        for o in 0..fout {
            let gv = gy.data()[bn * fout + o];
            gb.data_mut()[o] += gv;
            let wr = &w.data()[o * fin..(o + 1) * fin];
            let gwr = &mut gw.data_mut()[o * fin..(o + 1) * fin];
            for k in 0..fin {
                gwr[k] += gv * xr[k];
            }
            let gxr = &mut gx.data_mut()[bn * fin..(bn + 1) * fin];
            for k in 0..fin {
                gxr[k] += gv * wr[k];
            }
        }
    }
    (gx, gw, gb)
}

pub fn leaky_relu<T: Real>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| {
        if *v < T::zero() {
            *v *= slope
        }
    });
    y
}

pub fn leaky_relu_backward<T: Real>(x: &Tensor<T>, slope: T, gy: &Tensor<T>) -> Tensor<T> {
    let mut g = gy.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv < T::zero() {
            *gv *= slope;
        }
    }
    g
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    leaky_relu(x, T::zero())
}

pub fn relu_backward<T: Real>(x: &Tensor<T>, gy: &Tensor<T>) -> Tensor<T> {
    let mut g = gy.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= T::zero() {
            *gv = T::zero();
        }
    }
    g
}

/// Per-channel batch statistics kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
    /// Running statistics were used, so the layer is affine in `x`.
    pub frozen: bool,
}

fn channel_layout(x: &[usize]) -> (usize, usize, usize) {
    match *x {
        [n, c, h, w] => (n, c, h * w),
        [n, c] => (n, c, 1),
        _ => panic!("batch norm expects 2-D or 4-D input"),
    }
}

/// Batch normalisation over all axes except channels. With `running` set,
/// those statistics replace the batch ones.
pub fn batch_norm<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
    running: Option<(&[T], &[T])>,
) -> (Tensor<T>, BatchNormCache<T>) {
    let (n, c, plane) = channel_layout(x.shape());
    let count = T::from_usize_(n * plane);
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    let at = |b: usize, ch: usize| (b * c + ch) * plane;
    match running {
        Some((m, v)) => {
            mean.copy_from_slice(m);
            var.copy_from_slice(v);
        }
        None => {
            for ch in 0..c {
                let s: T = (0..n).flat_map(|b| &x.data()[at(b, ch)..at(b, ch) + plane]).copied().sum();
                mean[ch] = s / count;
                let ss: T = (0..n)
                    .flat_map(|b| &x.data()[at(b, ch)..at(b, ch) + plane])
                    .map(|&v| (v - mean[ch]) * (v - mean[ch]))
                    .sum();
                var[ch] = ss / count;
            }
        }
    }
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    for b in 0..n {
        for ch in 0..c {
            for k in at(b, ch)..at(b, ch) + plane {
                let h = (x.data()[k] - mean[ch]) * inv_std[ch];
                xhat.data_mut()[k] = h;
                y.data_mut()[k] = gamma.data()[ch] * h + beta.data()[ch];
            }
        }
    }
    (y, BatchNormCache { xhat, inv_std, mean, var, frozen: running.is_some() })
}

pub fn batch_norm_backward<T: Real>(
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
    gy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, c, plane) = channel_layout(gy.shape());
    let count = T::from_usize_(n * plane);
    let at = |b: usize, ch: usize| (b * c + ch) * plane;
    let mut gx = Tensor::zeros(gy.shape());
    let mut gg = Tensor::zeros(&[c]);
    let mut gbeta = Tensor::zeros(&[c]);
    for ch in 0..c {
        let (mut sg, mut sgx) = (T::zero(), T::zero());
        for b in 0..n {
            for k in at(b, ch)..at(b, ch) + plane {
                sg += gy.data()[k];
                sgx += gy.data()[k] * cache.xhat.data()[k];
            }
        }
        gg.data_mut()[ch] = sgx;
        gbeta.data_mut()[ch] = sg;
        let scale = gamma.data()[ch] * cache.inv_std[ch];
        for b in 0..n {
            for k in at(b, ch)..at(b, ch) + plane {
                gx.data_mut()[k] = if cache.frozen {
                    scale * gy.data()[k]
                } else {
                    scale * (gy.data()[k] - sg / count - cache.xhat.data()[k] * sgx / count)
                };
            }
        }
    }
    (gx, gg, gbeta)
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub fn max_pool2<T: Real>(x: &Tensor<T>) -> (Tensor<T>, Vec<usize>) {
    let [n, c, h, w] = x.dims4();
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, ho, wo]);
    let mut arg = vec![0usize; n * c * ho * wo];
    for p in 0..n * c {
        for i in 0..ho {
            for j in 0..wo {
                let mut best = p * h * w + 2 * i * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let k = p * h * w + (2 * i + di) * w + 2 * j + dj;
                    if x.data()[k] > x.data()[best] {
                        best = k;
                    }
                }
                let o = (p * ho + i) * wo + j;
                out.data_mut()[o] = x.data()[best];
                arg[o] = best;
            }
        }
    }
    (out, arg)
}

pub fn max_pool2_backward<T: Real>(input_shape: &[usize], arg: &[usize], gy: &Tensor<T>) -> Tensor<T> {
    let mut gx = Tensor::zeros(input_shape);
    for (&k, &g) in arg.iter().zip(gy.data()) {
        gx.data_mut()[k] += g;
    }
    gx
}

/// Replays a recorded pooling: output `k` takes input element `arg[k]`.
pub fn gather<T: Real>(x: &Tensor<T>, arg: &[usize], out_shape: &[usize]) -> Result<Tensor<T>> {
    if arg.iter().any(|&k| k >= x.len()) {
        return Err(Error::shape(x.len(), arg.iter().max().copied().unwrap_or(0) + 1));
    }
    Tensor::from_vec(out_shape, arg.iter().map(|&k| x.data()[k]).collect())
}

/// Piecewise-linear activation with a given branch per element: elements
/// flagged in `scaled` are multiplied by `slope`, the rest pass through.
pub fn fixed_branch<T: Real>(x: &Tensor<T>, slope: T, scaled: &[bool]) -> Tensor<T> {
    let mut y = x.clone();
    y.data_mut().iter_mut().zip(scaled).for_each(|(v, &s)| {
        if s {
            *v *= slope
        }
    });
    y
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)`. Returns the
/// per-unit multipliers for the reverse pass.
pub fn dropout<T: Real, R: Rng>(x: &Tensor<T>, rate: f64, rng: &mut R) -> (Tensor<T>, Vec<T>) {
    let keep = T::lit(1.0 / (1.0 - rate));
    let scale: Vec<T> = (0..x.len()).map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep }).collect();
    let mut y = x.clone();
    y.data_mut().iter_mut().zip(&scale).for_each(|(v, &s)| *v *= s);
    (y, scale)
}

pub fn scale_backward<T: Real>(scale: &[T], gy: &Tensor<T>) -> Tensor<T> {
    let mut g = gy.clone();
    g.data_mut().iter_mut().zip(scale).for_each(|(v, &s)| *v *= s);
    g
}
