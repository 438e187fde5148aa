//! Mini-batch training loop: augment → forward → KL loss → backprop → Adam.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::cnn::CompactCnn;
use super::loss::kl_soft_loss;
use super::schedule::{lr_at, LrSchedule};
use crate::augment::{apply_policy, AugmentPolicy};
use crate::error::{Error, Result};
use crate::eval::metrics::ConfusionCounts;
use crate::image::{MultiBandImage, SoftLabel};
use crate::rng::RngState;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub policy: AugmentPolicy,
    pub adam: AdamConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean KL loss over the epoch's augmented batches.
    pub train_loss: f64,
    /// F1 of the in-batch predictions against the argmax of the batch targets.
    pub train_f1: f64,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: CompactCnn,
    pub log: Vec<EpochMetrics>,
    /// Epoch whose weights were kept, when a validation set was given.
    pub best_epoch: Option<usize>,
}

/// Hard class from logits; a tie goes to landslide.
pub fn predict_class(logits: [f64; 2]) -> u8 {
    u8::from(logits[1] >= logits[0])
}

/// F1 of the softmax head on a labelled set.
pub fn evaluate_f1(net: &CompactCnn, images: &[MultiBandImage], labels: &[u8]) -> Result<f64> {
    let (_, logits) = net.infer(images, 64)?;
    let pred: Vec<u8> = logits.into_iter().map(predict_class).collect();
    Ok(ConfusionCounts::from_predictions(labels, &pred).f1())
}

/// Trains `net` for `opts.epochs` shuffled epochs. The final short batch of
/// an epoch is kept.
///
/// With a validation set, the weights from the epoch with the highest
/// validation F1 (earliest on ties) are returned; otherwise the last epoch's.
/// Returned weights are rounded to `f32`, the checkpoint precision.
pub fn train(
    mut net: CompactCnn,
    data: &[(MultiBandImage, SoftLabel)],
    validation: Option<(&[MultiBandImage], &[u8])>,
    opts: &TrainOptions,
    rng: &mut RngState,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("no training samples".into()));
    }
    if opts.batch_size == 0 || (opts.policy.mixes() && opts.batch_size < 2) {
        return Err(Error::Argument(format!(
            "batch size {} too small for the augmentation policy",
            opts.batch_size
        )));
    }
    opts.schedule.validate()?;
    opts.policy.validate()?;
    if let Some((imgs, labels)) = validation {
        if imgs.len() != labels.len() {
            return Err(Error::Dimension("validation images and labels differ in length".into()));
        }
    }
    if opts.epochs == 0 {
        return Ok(TrainOutcome { net, log: Vec::new(), best_epoch: None });
    }

    let mut adam = AdamState::new(net.params(), opts.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(opts.epochs);
    let mut best: Option<(f64, usize, CompactCnn)> = None;

    for epoch in 0..opts.epochs {
        let lr = lr_at(&opts.schedule, epoch);
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut counts = ConfusionCounts::default();
        for chunk in order.chunks(opts.batch_size) {
            let batch: Vec<(MultiBandImage, SoftLabel)> = chunk.iter().map(|&i| data[i].clone()).collect();
            let batch = apply_policy(&batch, &opts.policy, rng)?;
            let (images, targets): (Vec<MultiBandImage>, Vec<[f64; 2]>) =
                batch.into_iter().map(|(img, l)| (img, l.probs())).unzip();
            let out = net.forward(&images)?;
            let (loss, dlogits) = kl_soft_loss(&out.logits, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss diverged at epoch {epoch}")));
            }
            loss_sum += loss * images.len() as f64;
            for (l, t) in out.logits.iter().zip(&targets) {
                counts.record(u8::from(t[1] >= t[0]), predict_class(*l));
            }
            let grads = net.backward(&out.cache, &dlogits)?;
            adam_step(net.params_mut(), &grads, &mut adam, lr)?;
        }
        if net.params().iter().any(|p| p.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric(format!("weights diverged at epoch {epoch}")));
        }
        let val_f1 = match validation {
            Some((imgs, labels)) if !imgs.is_empty() => Some(evaluate_f1(&net, imgs, labels)?),
            _ => None,
        };
        if let Some(f) = val_f1 {
            if best.as_ref().is_none_or(|(b, _, _)| f > *b) {
                best = Some((f, epoch, net.clone()));
            }
        }
        log.push(EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / data.len() as f64,
            train_f1: counts.f1(),
            val_f1,
        });
    }

    let (mut net, best_epoch) = match best {
        Some((_, epoch, snapshot)) => (snapshot, Some(epoch)),
        None => (net, None),
    };
    net.round_to_f32();
    Ok(TrainOutcome { net, log, best_epoch })
}
