//! Central finite-difference checks of every hand-written backward pass.

use avse_core::mask::Modality;
use avse_core::nn::ops::{self, ConvGeometry};
use avse_core::nn::{backward, forward, forward_with_pattern, init_parameters, mask_mse, ArchitectureConfig, Mode, SegmentBatch, Tensor, MASK_BINS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-3;
const TOL: f64 = 1e-4;
const SAMPLES: usize = 10;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy)]
enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`
    TwoPoint,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`
    FivePoint,
}

/// Norm-wise relative error between analytic and central-difference
/// gradients over a seeded sample of entries of `t`.
fn check_with(
    label: &str,
    t: &mut Tensor,
    analytic: &Tensor,
    rng: &mut ChaCha8Rng,
    stencil: Stencil,
    samples: usize,
    mut loss: impl FnMut(&Tensor) -> f64,
) -> f64 {
    assert_eq!(t.shape(), analytic.shape(), "{label}");
    let idx: Vec<usize> = if t.len() <= samples { (0..t.len()).collect() } else { (0..samples).map(|_| rng.random_range(0..t.len())).collect() };
    let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
    for i in idx {
        let orig = t.data()[i];
        let mut at = |d: f64| {
            t.data_mut()[i] = orig + d;
            let v = loss(t);
            t.data_mut()[i] = orig;
            v
        };
        let num = match stencil {
            Stencil::TwoPoint => (at(EPS) - at(-EPS)) / (2.0 * EPS),
            Stencil::FivePoint => (-at(2.0 * EPS) + 8.0 * at(EPS) - 8.0 * at(-EPS) + at(-2.0 * EPS)) / (12.0 * EPS),
        };
        let an = analytic.data()[i];
        diff += (num - an).powi(2);
        na += an * an;
        nn += num * num;
    }
    let scale = na.sqrt().max(nn.sqrt());
    let rel = if scale < 1e-12 { diff.sqrt() } else { diff.sqrt() / scale };
    assert!(rel < TOL, "{label}: relative error {rel:.3e}");
    rel
}

fn check(label: &str, t: &mut Tensor, analytic: &Tensor, rng: &mut ChaCha8Rng, loss: impl FnMut(&Tensor) -> f64) -> f64 {
    check_with(label, t, analytic, rng, Stencil::TwoPoint, SAMPLES, loss)
}

fn conv_case(geom: ConvGeometry, x_shape: [usize; 4], cout: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random(&x_shape, &mut rng);
    let mut w = random(&[cout, x_shape[1], geom.kernel[0], geom.kernel[1]], &mut rng);
    let mut b = random(&[cout], &mut rng);
    let y = ops::conv2d(&x, &w, &b, &geom).unwrap();
    let r = random(y.shape(), &mut rng);
    let (gx, gw, gb) = ops::conv2d_backward(&x, &w, &geom, &r);
    let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
    check("conv x", &mut x, &gx, &mut rng, |x| dot(&ops::conv2d(x, &w0, &b0, &geom).unwrap(), &r));
    check("conv w", &mut w, &gw, &mut rng, |w| dot(&ops::conv2d(&x0, w, &b0, &geom).unwrap(), &r));
    check("conv b", &mut b, &gb, &mut rng, |b| dot(&ops::conv2d(&x0, &w0, b, &geom).unwrap(), &r));
}

fn deconv_case(geom: ConvGeometry, x_shape: [usize; 4], cout: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random(&x_shape, &mut rng);
    let mut w = random(&[x_shape[1], cout, geom.kernel[0], geom.kernel[1]], &mut rng);
    let mut b = random(&[cout], &mut rng);
    let y = ops::conv_transpose2d(&x, &w, &b, &geom).unwrap();
    let r = random(y.shape(), &mut rng);
    let (gx, gw, gb) = ops::conv_transpose2d_backward(&x, &w, &geom, &r);
    let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
    check("deconv x", &mut x, &gx, &mut rng, |x| dot(&ops::conv_transpose2d(x, &w0, &b0, &geom).unwrap(), &r));
    check("deconv w", &mut w, &gw, &mut rng, |w| dot(&ops::conv_transpose2d(&x0, w, &b0, &geom).unwrap(), &r));
    check("deconv b", &mut b, &gb, &mut rng, |b| dot(&ops::conv_transpose2d(&x0, &w0, b, &geom).unwrap(), &r));
}

const FREQ_TIME: ConvGeometry = ConvGeometry { kernel: [4, 4], stride: [2, 2], padding: [1, 1] };
const FREQ_ONLY: ConvGeometry = ConvGeometry { kernel: [4, 3], stride: [2, 1], padding: [1, 1] };
const SAME: ConvGeometry = ConvGeometry { kernel: [3, 3], stride: [1, 1], padding: [1, 1] };

#[test]
fn convolution() {
    conv_case(FREQ_TIME, [2, 3, 8, 6], 4, 1);
    conv_case(FREQ_ONLY, [2, 3, 8, 5], 4, 2);
    conv_case(SAME, [2, 2, 6, 6], 3, 3);
}

#[test]
fn transposed_convolution() {
    deconv_case(FREQ_TIME, [2, 3, 4, 3], 2, 4);
    deconv_case(FREQ_ONLY, [2, 4, 4, 5], 3, 5);
}

#[test]
fn dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut x = random(&[3, 7], &mut rng);
    let mut w = random(&[5, 7], &mut rng);
    let mut b = random(&[5], &mut rng);
    let r = random(&[3, 5], &mut rng);
    let (gx, gw, gb) = ops::linear_backward(&x, &w, &r);
    let (x0, w0, b0) = (x.clone(), w.clone(), b.clone());
    check("linear x", &mut x, &gx, &mut rng, |x| dot(&ops::linear(x, &w0, &b0).unwrap(), &r));
    check("linear w", &mut w, &gw, &mut rng, |w| dot(&ops::linear(&x0, w, &b0).unwrap(), &r));
    check("linear b", &mut b, &gb, &mut rng, |b| dot(&ops::linear(&x0, &w0, b).unwrap(), &r));
}

/// Inputs kept at least 0.05 away from the activation kink.
fn off_kink(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let v = (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.0);
            if rng.random::<bool>() { m } else { -m }
        })
        .collect();
    Tensor::from_vec(shape, v).unwrap()
}

#[test]
fn activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = off_kink(&[2, 3, 4, 4], &mut rng);
    let r = random(x.shape(), &mut rng);
    let g = ops::leaky_relu_backward(&x, 0.2, &r);
    check("leaky", &mut x, &g, &mut rng, |x| dot(&ops::leaky_relu(x, 0.2), &r));
    let g = ops::relu_backward(&x, &r);
    check("relu", &mut x, &g, &mut rng, |x| dot(&ops::relu(x), &r));
}

#[test]
fn batch_normalisation() {
    for (shape, seed) in [(vec![3, 4, 3, 2], 8u64), (vec![5, 6], 9)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = shape[1];
        let mut x = random(&shape, &mut rng);
        let mut gamma = random(&[c], &mut rng);
        let mut beta = random(&[c], &mut rng);
        let r = random(&shape, &mut rng);
        let (_, cache) = ops::batch_norm(&x, &gamma, &beta, 1e-5, None);
        let (gx, gg, gb) = ops::batch_norm_backward(&cache, &gamma, &r);
        let (x0, g0, b0) = (x.clone(), gamma.clone(), beta.clone());
        check("bn x", &mut x, &gx, &mut rng, |x| dot(&ops::batch_norm(x, &g0, &b0, 1e-5, None).0, &r));
        check("bn gamma", &mut gamma, &gg, &mut rng, |g| dot(&ops::batch_norm(&x0, g, &b0, 1e-5, None).0, &r));
        check("bn beta", &mut beta, &gb, &mut rng, |b| dot(&ops::batch_norm(&x0, &g0, b, 1e-5, None).0, &r));

        let rm: Vec<f64> = (0..c).map(|_| rng.random_range(-0.5..0.5)).collect();
        let rv: Vec<f64> = (0..c).map(|_| rng.random_range(0.5..2.0)).collect();
        let (_, frozen) = ops::batch_norm(&x0, &g0, &b0, 1e-5, Some((&rm, &rv)));
        let (gx, _, _) = ops::batch_norm_backward(&frozen, &g0, &r);
        check("bn eval x", &mut x, &gx, &mut rng, |x| dot(&ops::batch_norm(x, &g0, &b0, 1e-5, Some((&rm, &rv))).0, &r));
    }
}

#[test]
fn pooling_and_dropout() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    // Distinct, well-separated values keep the argmax stable under EPS.
    let mut vals: Vec<f64> = (0..2 * 3 * 6 * 6).map(|i| i as f64 * 0.01).collect();
    for i in (1..vals.len()).rev() {
        vals.swap(i, rng.random_range(0..=i));
    }
    let mut x = Tensor::from_vec(&[2, 3, 6, 6], vals).unwrap();
    let (y, arg) = ops::max_pool2(&x);
    let r = random(y.shape(), &mut rng);
    let g = ops::max_pool2_backward(x.shape(), &arg, &r);
    check("maxpool", &mut x, &g, &mut rng, |x| dot(&ops::max_pool2(x).0, &r));

    let r = random(x.shape(), &mut rng);
    let (_, scale) = ops::dropout(&x, 0.25, &mut ChaCha8Rng::seed_from_u64(11));
    let g = ops::scale_backward(&scale, &r);
    check("dropout", &mut x, &g, &mut rng, |x| dot(&ops::dropout(x, 0.25, &mut ChaCha8Rng::seed_from_u64(11)).0, &r));
}

fn desk_batch(cfg: &ArchitectureConfig, b: usize, rng: &mut ChaCha8Rng) -> SegmentBatch {
    let audio = cfg.modality.uses_audio().then(|| random(&[b, MASK_BINS, 20], rng));
    let video = cfg.modality.uses_video().then(|| random(&[b, 5, cfg.video_size, cfg.video_size], rng));
    let target = Tensor::from_vec(&[b, MASK_BINS, 20], (0..b * MASK_BINS * 20).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
    SegmentBatch { audio, video, target: Some(target) }
}

fn network_case(modality: Modality, seed: u64, batch_size: usize, samples: usize) {
    let cfg = ArchitectureConfig::desk(modality);
    let mut params = init_parameters::<f64>(&cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    // Zero biases put every zero-padded position exactly on an activation
    // kink, where no derivative exists. Check at a generic point instead.
    for (name, t) in params.names.iter().zip(params.tensors.iter_mut()) {
        if !name.ends_with(".weight") {
            let base = if name.ends_with("gamma") { 1.0 } else { 0.0 };
            t.data_mut().iter_mut().for_each(|v| *v = base + rng.random_range(-0.3..0.3));
        }
    }
    let batch = desk_batch(&cfg, batch_size, &mut rng);
    let target = batch.target.clone().unwrap();
    let (y, cache) = forward(&params, &cfg, &batch, Mode::Train, 77).unwrap();
    let (_, gy) = mask_mse(&y, &target).unwrap();
    let grads = backward(&params, &cfg, &cache, &gy).unwrap();
    // A step of EPS moves thousands of units; some always cross a kink.
    // Differences are therefore taken on the linear piece containing the
    // base point, which is the function the analytic gradient belongs to.
    // Batch statistics over a few samples are strongly curved, so the
    // higher-order stencil keeps truncation error below the tolerance.
    let pattern = cache.activation_pattern();
    let loss_of = |p: &avse_core::nn::NetworkParameters<f64>| {
        let y = forward_with_pattern(p, &cfg, &batch, Mode::Train, 77, &pattern).unwrap();
        mask_mse(&y, &target).unwrap().0
    };
    assert_eq!(loss_of(&params), mask_mse(&y, &target).unwrap().0);
    let mut worst = (0.0, String::new());
    for i in 0..params.tensors.len() {
        let name = params.names[i].clone();
        let mut t = params.tensors[i].clone();
        let rel = check_with(&format!("{modality} {name}"), &mut t, &grads[i], &mut rng, Stencil::FivePoint, samples, |t| {
            let saved = std::mem::replace(&mut params.tensors[i], t.clone());
            let l = loss_of(&params);
            params.tensors[i] = saved;
            l
        });
        if rel > worst.0 {
            worst = (rel, name);
        }
    }
    eprintln!("{modality}: worst relative error {:.2e} ({})", worst.0, worst.1);
}

#[test]
fn composed_network_av() {
    network_case(Modality::Av, 21, 4, 6);
}

#[test]
fn composed_network_ao_and_vo() {
    network_case(Modality::Ao, 22, 4, 2);
    // The last video block normalises a 1x1 map, i.e. over the batch alone.
    network_case(Modality::Vo, 23, 16, 2);
}
