//! One-batch gradient computations and updates.
//!
//! Per-item forward/backward passes run in parallel against the frozen
//! parameter store; their gradients are summed in batch order before the
//! optimizer sees them, so results do not depend on thread scheduling.

use rayon::prelude::*;

use crate::autodiff::{ParamId, Tape};
use crate::data::{SampledFeatures, VideoEntry};
use crate::error::{Error, Result};
use crate::metrics::{cider_sentence, CiderVariant, DocFreq};
use crate::model::CaptionModel;
use crate::rng::XorShift64Star;

use super::optim::Optimizer;

/// One (video, caption) training pair.
#[derive(Clone, Copy, Debug)]
pub struct XeItem<'a> {
    pub features: &'a SampledFeatures,
    pub caption: &'a [u32],
}

/// Batch-mean loss components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Encoder-decoder term: NLL, or the self-critical surrogate.
    pub ed: f64,
    /// Reconstruction term, when a reconstructor is attached.
    pub recon: Option<f64>,
    pub total: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardStats {
    pub reward: f64,
    pub baseline: f64,
    pub advantage: f64,
}

#[derive(Clone, Debug)]
pub struct ScstOutcome {
    pub stats: StepStats,
    pub rewards: Vec<RewardStats>,
    /// Emitted tokens (EOS included) of every sampled sequence.
    pub samples: Vec<Vec<u32>>,
}

/// Self-critical step settings.
#[derive(Clone, Copy, Debug)]
pub struct ScstContext<'a> {
    pub df: &'a DocFreq,
    pub variant: CiderVariant,
    /// Reconstruction weight; 0 leaves the reconstructor out.
    pub lambda: f64,
    /// Base seed; item `i` samples from stream `(sample_seed, i)`.
    pub sample_seed: u64,
}

struct ItemOut {
    ed: f64,
    recon: Option<f64>,
    total: f64,
    grads: Vec<(ParamId, Vec<f64>)>,
    reward: Option<RewardStats>,
    sample: Vec<u32>,
}

fn check_finite(what: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { what, index: 0 })
    }
}

fn xe_item(model: &CaptionModel, item: XeItem<'_>, lambda: f64) -> Result<ItemOut> {
    let mut t = Tape::with_params(&model.store);
    let (nll, seq) = model.decoder.teacher_forced(&mut t, item.features, item.caption)?;
    let ed = t.scalar(nll);
    let (loss, recon) = match &model.recon {
        Some(r) => {
            let rv = r.forward(&mut t, &seq.hidden, item.features)?;
            let rl = t.scalar(rv.loss);
            if lambda > 0.0 {
                let weighted = t.scale(rv.loss, lambda);
                (t.add(nll, weighted)?, Some(rl))
            } else {
                // Evaluated for the log only; not an ancestor of the loss.
                (nll, Some(rl))
            }
        }
        None => (nll, None),
    };
    let total = t.scalar(loss);
    let grads = t.backward(loss)?.into_params();
    Ok(ItemOut {
        ed,
        recon,
        total,
        grads,
        reward: None,
        sample: Vec::new(),
    })
}

fn scst_item(model: &CaptionModel, entry: &VideoEntry, ctx: &ScstContext<'_>, index: usize) -> Result<ItemOut> {
    if entry.references.is_empty() {
        return Err(Error::Metric(format!("video {} has no references", entry.video_id)));
    }
    let v = &entry.features;
    let greedy = model.greedy(v)?;
    let baseline = cider_sentence(&greedy.tokens, &entry.references, ctx.df, ctx.variant);
    let mut rng = XorShift64Star::stream(ctx.sample_seed, index as u64);
    let sample = model.sample(v, &mut rng)?;
    let reward = cider_sentence(&sample.tokens, &entry.references, ctx.df, ctx.variant);
    let advantage = reward - baseline;
    let stats = RewardStats {
        reward,
        baseline,
        advantage,
    };
    let emitted = sample.emitted();
    let use_recon = model.recon.is_some() && ctx.lambda > 0.0;
    if advantage == 0.0 && !use_recon {
        return Ok(ItemOut {
            ed: 0.0,
            recon: None,
            total: 0.0,
            grads: Vec::new(),
            reward: Some(stats),
            sample: emitted,
        });
    }
    let mut t = Tape::with_params(&model.store);
    let seq = model.decoder.score_sequence(&mut t, v, &emitted)?;
    let logp = t.add_n(&seq.log_probs)?;
    let surrogate = t.scale(logp, -advantage);
    let ed = t.scalar(surrogate);
    let (loss, recon) = match (&model.recon, use_recon) {
        (Some(r), true) => {
            let rv = r.forward(&mut t, &seq.hidden, v)?;
            let weighted = t.scale(rv.loss, ctx.lambda);
            (t.add(surrogate, weighted)?, Some(t.scalar(rv.loss)))
        }
        _ => (surrogate, None),
    };
    let total = t.scalar(loss);
    let grads = t.backward(loss)?.into_params();
    Ok(ItemOut {
        ed,
        recon,
        total,
        grads,
        reward: Some(stats),
        sample: emitted,
    })
}

/// Clears the store's gradients and writes the batch mean of `items` into it.
fn reduce(model: &mut CaptionModel, items: &[ItemOut]) {
    model.store.zero_grads();
    for it in items {
        for (id, g) in &it.grads {
            model.store.get_mut(*id).tensor.accumulate_grad(g);
        }
    }
    let scale = 1.0 / items.len() as f64;
    for (_, p) in model.store.iter_mut() {
        if let Some(g) = p.tensor.grad.as_mut() {
            g.iter_mut().for_each(|x| *x *= scale);
        }
    }
}

fn summarize(items: &[ItemOut], lambda: f64) -> Result<StepStats> {
    let n = items.len() as f64;
    let ed = items.iter().map(|i| i.ed).sum::<f64>() / n;
    let recon = if items.iter().any(|i| i.recon.is_some()) {
        Some(items.iter().map(|i| i.recon.unwrap_or(0.0)).sum::<f64>() / n)
    } else {
        None
    };
    let total = items.iter().map(|i| i.total).sum::<f64>() / n;
    Ok(StepStats {
        ed: check_finite("ed loss", ed)?,
        recon: recon.map(|r| check_finite("reconstruction loss", r)).transpose()?,
        total: check_finite("total loss", total)?,
        lambda,
    })
}

/// Computes batch-mean gradients of NLL (+ λ·reconstruction when a
/// reconstructor is attached and λ > 0) into the store without updating.
pub fn joint_grads(model: &mut CaptionModel, batch: &[XeItem<'_>], lambda: f64) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let m = &*model;
    let items: Vec<ItemOut> = batch
        .par_iter()
        .map(|&item| xe_item(m, item, lambda))
        .collect::<Result<_>>()?;
    reduce(model, &items);
    summarize(&items, lambda)
}

pub fn joint_step(model: &mut CaptionModel, batch: &[XeItem<'_>], lambda: f64, opt: &mut Optimizer) -> Result<StepStats> {
    let stats = joint_grads(model, batch, lambda)?;
    opt.step(&mut model.store);
    Ok(stats)
}

/// Cross-entropy gradients only; any attached reconstructor is ignored.
pub fn xe_grads(model: &mut CaptionModel, batch: &[XeItem<'_>]) -> Result<f64> {
    let recon = model.recon.take();
    let out = joint_grads(model, batch, 0.0);
    model.recon = recon;
    Ok(out?.ed)
}

/// One cross-entropy update; returns the batch-mean NLL.
pub fn xe_step(model: &mut CaptionModel, batch: &[XeItem<'_>], opt: &mut Optimizer) -> Result<f64> {
    let loss = xe_grads(model, batch)?;
    opt.step(&mut model.store);
    Ok(loss)
}

/// Self-critical gradients: greedy baseline, one sample per video.
pub fn scst_grads(model: &mut CaptionModel, batch: &[&VideoEntry], ctx: &ScstContext<'_>) -> Result<ScstOutcome> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let m = &*model;
    let items: Vec<ItemOut> = batch
        .par_iter()
        .enumerate()
        .map(|(i, e)| scst_item(m, e, ctx, i))
        .collect::<Result<_>>()?;
    reduce(model, &items);
    let stats = summarize(&items, ctx.lambda)?;
    Ok(ScstOutcome {
        stats,
        rewards: items.iter().filter_map(|i| i.reward).collect(),
        samples: items.into_iter().map(|i| i.sample).collect(),
    })
}

pub fn scst_step(
    model: &mut CaptionModel,
    batch: &[&VideoEntry],
    ctx: &ScstContext<'_>,
    opt: &mut Optimizer,
) -> Result<ScstOutcome> {
    let out = scst_grads(model, batch, ctx)?;
    opt.step(&mut model.store);
    Ok(out)
}

/// Log-probability of `emitted` (BOS-prefixed, EOS included if present).
pub fn sequence_log_prob(model: &CaptionModel, v: &SampledFeatures, emitted: &[u32]) -> Result<f64> {
    let mut t = Tape::with_params(&model.store);
    let seq = model.decoder.score_sequence(&mut t, v, emitted)?;
    Ok(seq.log_probs.iter().map(|&l| t.scalar(l)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::model::{ModelConfig, ReconKind};

    fn setup(recon: Option<ReconKind>) -> (CaptionModel, SampledFeatures) {
        let mut rng = XorShift64Star::new(3);
        let mut model = CaptionModel::new(ModelConfig::shrunk(7, 4, 4, 4), &mut rng).unwrap();
        if let Some(k) = recon {
            model.attach_reconstructor(k, &mut rng).unwrap();
        }
        let data = (0..28 * 4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let v = SampledFeatures {
            matrix: Tensor::matrix(28, 4, data).unwrap(),
            valid_count: 28,
        };
        (model, v)
    }

    fn grads(model: &CaptionModel) -> Vec<Option<Vec<f64>>> {
        model.store.iter().map(|(_, p)| p.tensor.grad.clone()).collect()
    }

    #[test]
    fn batch_gradient_is_the_mean() {
        let (mut model, v) = setup(None);
        let item = XeItem {
            features: &v,
            caption: &[4, 5],
        };
        joint_grads(&mut model, &[item], 0.0).unwrap();
        let one = grads(&model);
        joint_grads(&mut model, &[item, item], 0.0).unwrap();
        let two = grads(&model);
        for (a, b) in one.iter().zip(&two) {
            let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_lambda_logs_recon_without_gradient() {
        let (mut model, v) = setup(Some(ReconKind::Global));
        let item = XeItem {
            features: &v,
            caption: &[4],
        };
        let stats = joint_grads(&mut model, &[item], 0.0).unwrap();
        assert!(stats.recon.unwrap() > 0.0);
        assert_eq!(stats.total, stats.ed);
        let ids = model.recon.as_ref().unwrap().param_ids();
        for id in ids {
            assert!(model.store.get(id).tensor.grad.is_none());
        }
        let stats = joint_grads(&mut model, &[item], 0.5).unwrap();
        assert!((stats.total - stats.ed - 0.5 * stats.recon.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let (mut model, _) = setup(None);
        assert!(joint_grads(&mut model, &[], 0.0).is_err());
        assert!(xe_grads(&mut model, &[]).is_err());
    }
}
