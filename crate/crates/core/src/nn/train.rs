use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::ArchitectureConfig;
use super::data::{make_batch, Standardizer, TrainingSegment};
use super::network::{backward, forward, init_parameters, mask_mse, Mode, NetworkParameters};
use super::Tensor;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T = f64> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
    pub config: AdamConfig,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Tensor<T>], config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self { m: zeros(), v: zeros(), t: 0, config }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(params: &mut [Tensor<T>], grads: &[Tensor<T>], state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(params.len(), grads.len()));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::shape(format!("{:?}", p.shape()), format!("{:?}", g.shape())));
        }
        if !g.all_finite() {
            return Err(Error::NonFinite(format!("gradient of tensor {i}")));
        }
    }
    state.t += 1;
    let c = state.config;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let bc1 = T::lit(1.0 - c.beta1.powi(state.t as i32));
    let bc2 = T::lit(1.0 - c.beta2.powi(state.t as i32));
    let (lr, eps) = (T::lit(lr), T::lit(c.eps));
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mv = b1 * *mv + (T::one() - b1) * gv;
            *vv = b2 * *vv + (T::one() - b2) * gv * gv;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *pv -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// What a validation loss is compared against when deciding to decay the
/// learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LrReference {
    #[default]
    PreviousEpoch,
    BestSoFar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub lr_init: f64,
    pub lr_factor: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub lr_reference: LrReference,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lr_init: 4e-4,
            lr_factor: 0.5,
            batch_size: 64,
            max_epochs: 50,
            seed: 0,
            lr_reference: LrReference::PreviousEpoch,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainingConfig {
    /// Smaller batches and fewer epochs for CPU-sized runs.
    pub fn desk(seed: u64) -> Self {
        Self { batch_size: 4, max_epochs: 10, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0 && self.lr_factor > 0.0 && self.lr_factor <= 1.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

pub struct TrainOutcome<T = f64> {
    pub params: NetworkParameters<T>,
    pub standardizer: Standardizer<T>,
    pub log: TrainingLog,
}

/// Learning rate for the next epoch after observing `val` (the latest
/// validation loss) with `history` holding the earlier ones.
pub fn next_lr(lr: f64, history: &[f64], val: f64, tcfg: &TrainingConfig) -> f64 {
    let reference = match tcfg.lr_reference {
        LrReference::PreviousEpoch => history.last().copied(),
        LrReference::BestSoFar => history.iter().copied().reduce(f64::min),
    };
    match reference {
        Some(r) if val > r => lr * tcfg.lr_factor,
        _ => lr,
    }
}

/// Epoch loop shared by [`train`] and its tests. `epoch_fn(epoch, lr)` runs
/// one epoch and returns `(train_loss, val_loss, snapshot)`.
pub fn run_epochs<S>(
    tcfg: &TrainingConfig,
    mut epoch_fn: impl FnMut(usize, f64) -> Result<(f64, f64, S)>,
) -> Result<(S, TrainingLog)> {
    tcfg.validate()?;
    let mut lr = tcfg.lr_init;
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, S)> = None;
    for epoch in 1..=tcfg.max_epochs {
        let (train_loss, val_loss, snapshot) = epoch_fn(epoch, lr)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            log::error!("training diverged at epoch {epoch}: train {train_loss}, val {val_loss}; log so far {:?}", log.epochs);
            return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
        }
        log::info!("epoch {epoch}: train J {train_loss:.5}, val J {val_loss:.5}, lr {lr:.2e}");
        log.epochs.push(EpochRecord { epoch, train_loss, val_loss, lr });
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, snapshot));
            log.best_epoch = epoch;
        }
        let history: Vec<f64> = log.epochs[..log.epochs.len() - 1].iter().map(|e| e.val_loss).collect();
        lr = next_lr(lr, &history, val_loss, tcfg);
    }
    Ok((best.expect("at least one epoch").1, log))
}

fn step_seed(seed: u64, step: u64) -> u64 {
    // SplitMix64 finaliser over (seed, step).
    let mut z = seed ^ step.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean per-cell loss of `params` over `set` in eval mode.
pub fn evaluate<T: Real>(
    params: &NetworkParameters<T>,
    cfg: &ArchitectureConfig,
    std: &Standardizer<T>,
    set: &[TrainingSegment<T>],
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for chunk in set.chunks(batch_size.max(1)) {
        let refs: Vec<&TrainingSegment<T>> = chunk.iter().collect();
        let batch = make_batch(cfg, std, &refs)?;
        let (out, _) = forward(params, cfg, &batch, Mode::Eval, 0)?;
        let (loss, _) = mask_mse(&out, batch.target.as_ref().unwrap())?;
        total += loss.to_f64_() * chunk.len() as f64;
    }
    Ok(total / set.len() as f64)
}

/// Loss and parameter gradients for one batch in train mode.
pub fn loss_and_gradients<T: Real>(
    params: &NetworkParameters<T>,
    cfg: &ArchitectureConfig,
    batch: &super::SegmentBatch<T>,
    dropout_seed: u64,
) -> Result<(T, Vec<Tensor<T>>, super::ForwardCache<T>)> {
    let target = batch.target.as_ref().ok_or_else(|| Error::InvalidArgument("batch has no target".into()))?;
    let (out, cache) = forward(params, cfg, batch, Mode::Train, dropout_seed)?;
    let (loss, g) = mask_mse(&out, target)?;
    let grads = backward(params, cfg, &cache, &g)?;
    Ok((loss, grads, cache))
}

/// Adam training with learning-rate decay on validation-loss increases,
/// keeping the parameters of the epoch with the lowest validation loss.
pub fn train<T: Real>(
    cfg: &ArchitectureConfig,
    tcfg: &TrainingConfig,
    train_set: &[TrainingSegment<T>],
    val_set: &[TrainingSegment<T>],
) -> Result<TrainOutcome<T>> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Degenerate("training and validation sets must be non-empty".into()));
    }
    let standardizer = Standardizer::fit(train_set)?;
    let mut params = init_parameters::<T>(cfg, tcfg.seed)?;
    let mut adam = AdamState::new(&params.tensors, tcfg.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0u64;
    let (params, log) = run_epochs(tcfg, |epoch, lr| {
        let mut rng = ChaCha8Rng::seed_from_u64(step_seed(tcfg.seed, epoch as u64 + (1 << 40)));
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for idx in order.chunks(tcfg.batch_size) {
            let refs: Vec<&TrainingSegment<T>> = idx.iter().map(|&i| &train_set[i]).collect();
            let batch = make_batch(cfg, &standardizer, &refs)?;
            let (loss, grads, cache) = loss_and_gradients(&params, cfg, &batch, step_seed(tcfg.seed, step))?;
            params.update_running(&cache, cfg.bn_momentum);
            adam_step(&mut params.tensors, &grads, &mut adam, lr)?;
            train_total += loss.to_f64_() * idx.len() as f64;
            step += 1;
        }
        let val = evaluate(&params, cfg, &standardizer, val_set, tcfg.batch_size)?;
        Ok((train_total / train_set.len() as f64, val, params.clone()))
    })?;
    Ok(TrainOutcome { params, standardizer, log })
}
