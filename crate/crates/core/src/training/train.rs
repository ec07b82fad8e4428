use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adamw::{adamw_step, OptimizerState};
use super::backprop::{backward_patches, cross_entropy, ParamGrads};
use super::data::SynthDataset;
use crate::circulant::Backend;
use crate::error::{Error, Result};
use super::data::ShiftTaskSpec;
use crate::model::{forward_patches, MixerConfig, ModelParams, NormKind, TokenMixerKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Peak learning rate, reached after warmup.
    pub lr: f64,
    /// Learning rate at the end of the cosine decay.
    pub min_lr: f64,
    /// Fraction of all steps spent in linear warmup.
    pub warmup_frac: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub backend: Backend,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 1e-3,
            min_lr: 1e-5,
            warmup_frac: 0.05,
            weight_decay: 0.05,
            batch_size: 32,
            seed: 0,
            backend: Backend::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub params: ModelParams<T>,
    pub history: Vec<EpochMetrics>,
}

impl<T> TrainReport<T> {
    pub fn final_test_accuracy(&self) -> f64 {
        self.history.last().map_or(0.0, |m| m.test_acc)
    }
}

/// Small backbone sized for the shift task: two blocks, 16 channels, 4 groups.
///
/// Tokens are `p x p` single patches of a `p x (N p)` image strip, so
/// `channels_in` must equal `3 p^2`.
pub fn shift_task_model(spec: &ShiftTaskSpec, token_mixer: TokenMixerKind) -> Result<MixerConfig> {
    let patch = (1..=spec.channels_in)
        .find(|p| 3 * p * p == spec.channels_in)
        .ok_or_else(|| Error::Config(format!("{} input channels is not 3 p^2", spec.channels_in)))?;
    let config = MixerConfig {
        tokens: spec.tokens,
        depth: 2,
        hidden: 16,
        ratio: 2,
        patch,
        groups: 4,
        image_height: patch,
        image_width: spec.tokens * patch,
        token_mixer,
        token_mlp_dim: 16,
        norm: NormKind::LayerNorm,
        num_classes: spec.classes,
    };
    config.validate()?;
    Ok(config)
}

/// Linear warmup to `lr`, then cosine decay to `min_lr`.
pub fn learning_rate(opts: &TrainOptions, step: usize, total_steps: usize) -> f64 {
    if opts.lr == 0.0 {
        return 0.0;
    }
    let warmup = (opts.warmup_frac * total_steps as f64).ceil() as usize;
    if step < warmup {
        return opts.lr * (step + 1) as f64 / warmup as f64;
    }
    let span = total_steps.saturating_sub(warmup).max(1);
    let progress = (step - warmup) as f64 / span as f64;
    opts.min_lr + 0.5 * (opts.lr - opts.min_lr) * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Mean loss and accuracy over a dataset.
pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    config: &MixerConfig,
    data: &SynthDataset<T>,
    backend: Backend,
) -> Result<(f64, f64)> {
    let per_sample: Vec<(f64, bool)> = data
        .samples
        .par_iter()
        .map(|s| {
            let logits = forward_patches(&s.tokens, params, config, backend)?;
            let (loss, _) = cross_entropy(&logits, s.label)?;
            let best = logits
                .data()
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
            Ok((loss.to_f64_lossy(), best.0 == s.label))
        })
        .collect::<Result<_>>()?;
    let n = per_sample.len().max(1) as f64;
    // Summed in dataset order so the result does not depend on thread scheduling.
    let loss = per_sample.iter().map(|p| p.0).sum::<f64>() / n;
    let acc = per_sample.iter().filter(|p| p.1).count() as f64 / n;
    Ok((loss, acc))
}

fn batch_gradients<T: Scalar>(
    batch: &[usize],
    data: &SynthDataset<T>,
    params: &ModelParams<T>,
    config: &MixerConfig,
    backend: Backend,
) -> Result<ParamGrads<T>> {
    let per_sample: Vec<ParamGrads<T>> = batch
        .par_iter()
        .map(|&i| {
            let s = &data.samples[i];
            backward_patches(&s.tokens, s.label, params, config, backend).map(|(_, g)| g)
        })
        .collect::<Result<_>>()?;
    let mut total = params.zeros_like();
    for g in &per_sample {
        for ((_, acc), (_, v)) in total.arrays_mut().into_iter().zip(g.arrays()) {
            acc.add_assign(v)?;
        }
    }
    let inv = T::one() / T::from_count(batch.len());
    for (_, t) in total.arrays_mut() {
        t.data_mut().iter_mut().for_each(|v| *v *= inv);
    }
    Ok(total)
}

/// Trains a fresh model with AdamW on minibatches; deterministic given `opts.seed`.
///
/// After every epoch the full training split is re-evaluated for the loss
/// column and the test split for accuracy.
pub fn train<T: Scalar>(
    config: &MixerConfig,
    train_set: &SynthDataset<T>,
    test_set: &SynthDataset<T>,
    opts: &TrainOptions,
) -> Result<TrainReport<T>> {
    config.validate()?;
    if train_set.is_empty() || opts.batch_size == 0 {
        return Err(Error::Config("training needs samples and a positive batch size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut params = ModelParams::init(config, &mut rng)?;
    let mut state = OptimizerState::new(&params, opts.lr, opts.weight_decay);
    let steps_per_epoch = train_set.len().div_ceil(opts.batch_size);
    let total_steps = steps_per_epoch * opts.epochs;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(opts.epochs);
    let mut step = 0;

    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(opts.batch_size) {
            let grads = batch_gradients(batch, train_set, &params, config, opts.backend)?;
            state.lr = learning_rate(opts, step, total_steps);
            adamw_step(&mut params, &grads, &mut state)?;
            step += 1;
        }
        let (train_loss, _) = evaluate(&params, config, train_set, opts.backend)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let (_, test_acc) = evaluate(&params, config, test_set, opts.backend)?;
        history.push(EpochMetrics {
            epoch,
            train_loss,
            test_acc,
        });
    }
    Ok(TrainReport { params, history })
}
