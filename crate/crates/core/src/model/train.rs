use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{forward_train, init_model, sample_gradients, Losses};
use super::{EncodedCaption, FeatureClip};
use crate::layers::{adam_step, ParamGrads, ParamStore};
use crate::parallel::map_ordered;
use crate::{Error, Result};

/// Mixed into the seed for the shuffle stream so it is independent of the
/// initialization stream.
const SHUFFLE_STREAM: u64 = 0x5348_5546_464c_4521;

/// One training pair: a clip (by index) and one of its captions.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub clip: usize,
    pub caption: EncodedCaption,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Worker threads for per-sample gradients within a batch.
    pub threads: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 50,
            batch_size: 8,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub l: f64,
    pub l_e: f64,
    pub l_all: f64,
    pub grad_norm: f64,
}

/// Per-epoch mean losses. Epoch 0 is the training-set loss at
/// initialization; later epochs average the per-sample losses seen during
/// that epoch's steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l: f64,
    pub l_e: f64,
    pub l_all: f64,
    pub val_l_all: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamStore,
    pub epochs: Vec<EpochLog>,
    pub steps: Vec<StepLog>,
    /// FNV-1a digest of each epoch's sample order.
    pub shuffle_digests: Vec<u64>,
}

fn fnv1a(values: impl IntoIterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn clip_of<'a>(clips: &'a [FeatureClip], s: &Sample) -> Result<&'a FeatureClip> {
    clips
        .get(s.clip)
        .ok_or_else(|| Error::Data(format!("sample refers to missing clip {}", s.clip)))
}

/// Mean per-sample losses of `samples` under `params`.
pub fn evaluate_loss(
    cfg: &ModelConfig,
    params: &ParamStore,
    clips: &[FeatureClip],
    samples: &[Sample],
    threads: usize,
) -> Result<Losses> {
    if samples.is_empty() {
        return Err(Error::Usage("no samples to evaluate".into()));
    }
    let results = map_ordered(samples, threads, |s| {
        forward_train(cfg, params, clip_of(clips, s)?, &s.caption)
    });
    let mut sum = Losses::default();
    for r in results {
        let r = r?;
        sum.l += r.l;
        sum.l_e += r.l_e;
    }
    let n = samples.len() as f64;
    let (l, l_e) = (sum.l / n, sum.l_e / n);
    Ok(Losses { l, l_e, l_all: l + l_e })
}

/// Minibatch Adam on the mean of per-sample `L_all`, with global-norm
/// gradient clipping. Deterministic given `cfg.seed`, independent of
/// `opts.threads`.
pub fn train(
    cfg: &ModelConfig,
    clips: &[FeatureClip],
    train_set: &[Sample],
    val_set: &[Sample],
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let params = init_model(cfg)?;
    train_from(cfg, params, clips, train_set, val_set, opts)
}

/// Like [`train`] but starting from existing parameters.
pub fn train_from(
    cfg: &ModelConfig,
    mut params: ParamStore,
    clips: &[FeatureClip],
    train_set: &[Sample],
    val_set: &[Sample],
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Usage("training corpus is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::Usage("batch size must be positive".into()));
    }
    let threads = opts.threads.max(1);
    let val_loss = |p: &ParamStore| -> Result<Option<f64>> {
        if val_set.is_empty() {
            Ok(None)
        } else {
            Ok(Some(evaluate_loss(cfg, p, clips, val_set, threads)?.l_all))
        }
    };

    let init = evaluate_loss(cfg, &params, clips, train_set, threads)?;
    let mut epochs = vec![EpochLog {
        epoch: 0,
        l: init.l,
        l_e: init.l_e,
        l_all: init.l_all,
        val_l_all: val_loss(&params)?,
    }];
    let mut steps = Vec::new();
    let mut digests = Vec::with_capacity(opts.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        digests.push(fnv1a(order.iter().map(|&i| i as u64)));
        let (mut sum_l, mut sum_le) = (0.0, 0.0);
        for batch in order.chunks(opts.batch_size) {
            let step = steps.len() + 1;
            let batch: Vec<&Sample> = batch.iter().map(|&i| &train_set[i]).collect();
            let results = map_ordered(&batch, threads, |s| {
                sample_gradients(cfg, &params, clip_of(clips, s)?, &s.caption, None)
            });
            let mut grads = ParamGrads::zeros_like(&params);
            let (mut bl, mut ble) = (0.0, 0.0);
            for r in results {
                let (losses, g, _) = r.map_err(|e| match e {
                    Error::Numeric(msg) => Error::Numeric(format!("step {step}: {msg}")),
                    other => other,
                })?;
                bl += losses.l;
                ble += losses.l_e;
                grads.accumulate(&g);
            }
            let n = batch.len() as f64;
            grads.scale(1.0 / n);
            let grad_norm = grads.clip_global_norm(cfg.clip_norm);
            if !grad_norm.is_finite() {
                return Err(Error::Numeric(format!("step {step}: non-finite gradient norm")));
            }
            adam_step(&mut params, &grads, &cfg.adam)?;
            sum_l += bl;
            sum_le += ble;
            let (l, l_e) = (bl / n, ble / n);
            steps.push(StepLog {
                step,
                epoch,
                l,
                l_e,
                l_all: l + l_e,
                grad_norm,
            });
        }
        let n = train_set.len() as f64;
        let (l, l_e) = (sum_l / n, sum_le / n);
        let log = EpochLog {
            epoch,
            l,
            l_e,
            l_all: l + l_e,
            val_l_all: val_loss(&params)?,
        };
        log::info!(
            "epoch {epoch}: L={:.4} L_e={:.4} L_all={:.4}",
            log.l,
            log.l_e,
            log.l_all
        );
        epochs.push(log);
    }
    Ok(TrainOutcome {
        params,
        epochs,
        steps,
        shuffle_digests: digests,
    })
}
