use std::fmt;
use std::io::Write;

use crate::data::{Corpus, VideoEntry};
use crate::error::{Error, Result};
use crate::metrics::DocFreq;
use crate::model::CaptionModel;
use crate::rng::XorShift64Star;

use super::checkpoint::Checkpoint;
use super::config::{Stage, TrainConfig};
use super::early_stop::EarlyStopping;
use super::eval::evaluate_entries;
use super::optim::Optimizer;
use super::steps::{joint_step, scst_step, ScstContext, XeItem};

// Stream purposes for the shared seed.
const INIT_STREAM: u64 = 1;
const RECON_INIT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 0x100;
const SAMPLE_STREAM: u64 = 0x200;

/// One leg of the training schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Cross-entropy only.
    Xe,
    /// Cross-entropy plus λ·reconstruction.
    Joint,
    /// Self-critical, no reconstruction.
    Scst,
    /// Self-critical plus λ·reconstruction on the sampled rollout.
    ScstJoint,
}

impl Phase {
    pub fn schedule(stage: Stage) -> &'static [Phase] {
        match stage {
            Stage::Xe => &[Phase::Xe],
            Stage::Joint => &[Phase::Xe, Phase::Joint],
            Stage::Rl => &[Phase::Xe, Phase::Scst],
            Stage::RlJoint => &[Phase::Xe, Phase::Joint, Phase::ScstJoint],
        }
    }

    fn uses_recon(self) -> bool {
        matches!(self, Phase::Joint | Phase::ScstJoint)
    }

    fn is_rl(self) -> bool {
        matches!(self, Phase::Scst | Phase::ScstJoint)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Xe => "xe",
            Phase::Joint => "joint",
            Phase::Scst => "rl",
            Phase::ScstJoint => "rl-joint",
        })
    }
}

/// Per-epoch means over the training batches plus validation CIDEr.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub phase: Phase,
    /// 1-based, counted across all phases.
    pub epoch: usize,
    /// Encoder-decoder term: NLL, or the self-critical surrogate in RL phases.
    pub xe_loss: f64,
    pub recon_loss: Option<f64>,
    pub total_loss: f64,
    pub val_cider: f64,
    /// Largest |total − ed − λ·recon| over the epoch's steps.
    pub max_decomposition_error: f64,
}

pub const EPOCH_LOG_HEADER: &str = "epoch,xe_loss,recon_loss,total_loss,val_cider";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        let recon = self.recon_loss.map_or(String::new(), |r| format!("{r:?}"));
        format!(
            "{},{:?},{},{:?},{:?}",
            self.epoch, self.xe_loss, recon, self.total_loss, self.val_cider
        )
    }
}

pub fn write_epoch_csv<W: Write>(logs: &[EpochLog], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{EPOCH_LOG_HEADER}")?;
    for l in logs {
        writeln!(out, "{}", l.csv_row())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub epochs: usize,
    pub best_cider: f64,
    /// Global epoch number of the best validation score.
    pub best_epoch: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub phases: Vec<PhaseSummary>,
}

/// Mutable training state over a borrowed corpus.
#[derive(Clone)]
pub struct Trainer<'c> {
    pub cfg: TrainConfig,
    pub corpus: &'c Corpus,
    pub model: CaptionModel,
    pub log: Vec<EpochLog>,
    train_videos: Vec<&'c VideoEntry>,
    val_videos: Vec<&'c VideoEntry>,
    pairs: Vec<(usize, usize)>,
    train_df: DocFreq,
    epochs_done: usize,
    best_cider: f64,
    best_epoch: usize,
}

impl<'c> Trainer<'c> {
    pub fn new(cfg: TrainConfig, corpus: &'c Corpus) -> Result<Self> {
        cfg.validate()?;
        if corpus.vocab.len() <= crate::data::vocab::NUM_RESERVED {
            return Err(Error::Config("vocabulary has no content tokens".into()));
        }
        let train_videos: Vec<&VideoEntry> = corpus
            .entries_for(&corpus.splits.train)
            .into_iter()
            .filter(|e| !e.references.is_empty())
            .collect();
        let val_videos: Vec<&VideoEntry> = corpus
            .entries_for(&corpus.splits.val)
            .into_iter()
            .filter(|e| !e.references.is_empty())
            .collect();
        if train_videos.is_empty() {
            return Err(Error::Config("training split has no captioned videos".into()));
        }
        if val_videos.is_empty() {
            return Err(Error::Config("validation split has no captioned videos".into()));
        }
        let pairs = train_videos
            .iter()
            .enumerate()
            .flat_map(|(v, e)| (0..e.references.len()).map(move |c| (v, c)))
            .collect();
        let dim = train_videos[0].features.dim();
        let model_cfg = cfg.model_config(corpus.vocab.len(), dim);
        let model = CaptionModel::new(model_cfg, &mut XorShift64Star::stream(cfg.seed, INIT_STREAM))?;
        let refs: Vec<Vec<Vec<u32>>> = train_videos.iter().map(|e| e.references.clone()).collect();
        Ok(Trainer {
            train_df: DocFreq::build(&refs),
            cfg,
            corpus,
            model,
            log: Vec::new(),
            train_videos,
            val_videos,
            pairs,
            epochs_done: 0,
            best_cider: f64::NEG_INFINITY,
            best_epoch: 0,
        })
    }

    pub fn train_videos(&self) -> &[&'c VideoEntry] {
        &self.train_videos
    }

    pub fn val_videos(&self) -> &[&'c VideoEntry] {
        &self.val_videos
    }

    /// Document frequencies of the training references (the RL reward's idf).
    pub fn train_df(&self) -> &DocFreq {
        &self.train_df
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// Attaches the configured reconstructor, drawing its initial weights
    /// from a stream independent of the decoder's.
    pub fn attach_reconstructor(&mut self) -> Result<()> {
        if let Some(kind) = self.cfg.reconstructor {
            let mut rng = XorShift64Star::stream(self.cfg.seed, RECON_INIT_STREAM);
            self.model.attach_reconstructor(kind, &mut rng)?;
        }
        Ok(())
    }

    pub fn optimizer_for(&self, phase: Phase) -> Optimizer {
        Optimizer::new(if phase.is_rl() {
            self.cfg.rl_optimizer
        } else {
            self.cfg.xe_optimizer
        })
    }

    pub fn validation_cider(&self) -> Result<f64> {
        let r = evaluate_entries(&self.model, &self.val_videos, self.cfg.val_beam, self.cfg.cider_variant)?;
        Ok(r.report.cider)
    }

    fn lambda_for(&self, phase: Phase) -> f64 {
        if phase.uses_recon() {
            self.cfg.effective_lambda()
        } else {
            0.0
        }
    }

    /// Runs one training epoch of `phase` and scores the validation split.
    pub fn run_epoch(&mut self, phase: Phase, opt: &mut Optimizer) -> Result<EpochLog> {
        let epoch = self.epochs_done + 1;
        let lambda = self.lambda_for(phase);
        let mut shuffle = XorShift64Star::stream(self.cfg.seed, SHUFFLE_STREAM + epoch as u64);
        let (mut ed, mut recon, mut total, mut steps) = (0.0, None::<f64>, 0.0, 0usize);
        let mut max_err = 0.0f64;
        let diverged = |stage: Phase| Error::Divergence {
            stage: stage.to_string(),
            epoch,
        };
        let mut record = |s: super::steps::StepStats| {
            ed += s.ed;
            total += s.total;
            if let Some(r) = s.recon {
                *recon.get_or_insert(0.0) += r;
            }
            let weighted = if s.lambda > 0.0 { s.lambda * s.recon.unwrap_or(0.0) } else { 0.0 };
            max_err = max_err.max((s.total - s.ed - weighted).abs());
            steps += 1;
        };
        if phase.is_rl() {
            let mut order: Vec<usize> = (0..self.train_videos.len()).collect();
            shuffle.shuffle(&mut order);
            for (b, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
                let batch: Vec<&VideoEntry> = chunk.iter().map(|&i| self.train_videos[i]).collect();
                let ctx = ScstContext {
                    df: &self.train_df,
                    variant: self.cfg.cider_variant,
                    lambda,
                    sample_seed: XorShift64Star::stream(self.cfg.seed, SAMPLE_STREAM + epoch as u64)
                        .next_u64()
                        .wrapping_add(b as u64),
                };
                let out = scst_step(&mut self.model, &batch, &ctx, opt).map_err(|e| match e {
                    Error::NonFinite { .. } => diverged(phase),
                    e => e,
                })?;
                record(out.stats);
            }
        } else {
            let mut order = self.pairs.clone();
            shuffle.shuffle(&mut order);
            for chunk in order.chunks(self.cfg.batch_size) {
                let batch: Vec<XeItem> = chunk
                    .iter()
                    .map(|&(v, c)| XeItem {
                        features: &self.train_videos[v].features,
                        caption: &self.train_videos[v].references[c],
                    })
                    .collect();
                let stats = joint_step(&mut self.model, &batch, lambda, opt).map_err(|e| match e {
                    Error::NonFinite { .. } => diverged(phase),
                    e => e,
                })?;
                record(stats);
            }
        }
        self.model.store.zero_grads();
        if self.model.store.iter().any(|(_, p)| p.tensor.value.first_non_finite().is_some()) {
            return Err(diverged(phase));
        }
        let n = steps as f64;
        let val_cider = self.validation_cider()?;
        self.epochs_done = epoch;
        let entry = EpochLog {
            phase,
            epoch,
            xe_loss: ed / n,
            recon_loss: recon.map(|r| r / n),
            total_loss: total / n,
            val_cider,
            max_decomposition_error: max_err,
        };
        log::info!(
            "[{phase}] epoch {epoch}: xe {:.6} recon {} total {:.6} val_cider {:.4}",
            entry.xe_loss,
            entry.recon_loss.map_or("-".to_string(), |r| format!("{r:.6}")),
            entry.total_loss,
            entry.val_cider
        );
        self.log.push(entry.clone());
        Ok(entry)
    }

    /// Trains `phase` until early stopping or the epoch cap, then restores
    /// the best-validation parameters.
    pub fn run_phase(&mut self, phase: Phase) -> Result<PhaseSummary> {
        if phase.uses_recon() {
            self.attach_reconstructor()?;
        }
        let mut opt = self.optimizer_for(phase);
        let mut stopper = EarlyStopping::new(self.cfg.patience);
        let mut best_store = self.model.store.clone();
        let mut best_epoch = self.epochs_done;
        let start = self.epochs_done;
        for _ in 0..self.cfg.max_epochs {
            let e = self.run_epoch(phase, &mut opt)?;
            if stopper.observe(e.val_cider) {
                best_store = self.model.store.clone();
                best_epoch = e.epoch;
            }
            if stopper.should_stop() {
                log::info!("[{phase}] early stop after epoch {}", e.epoch);
                break;
            }
        }
        self.model.store = best_store;
        let best_cider = stopper.best().unwrap_or(f64::NEG_INFINITY);
        self.best_cider = best_cider;
        self.best_epoch = best_epoch;
        Ok(PhaseSummary {
            phase,
            epochs: self.epochs_done - start,
            best_cider,
            best_epoch,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(
            &self.model,
            &self.corpus.vocab,
            &self.cfg,
            self.best_epoch,
            if self.best_cider.is_finite() { self.best_cider } else { 0.0 },
        )
    }

    /// Runs the configured schedule.
    pub fn run(mut self) -> Result<TrainOutcome> {
        let mut phases = Vec::new();
        for &p in Phase::schedule(self.cfg.stage) {
            log::info!("starting {p} phase");
            phases.push(self.run_phase(p)?);
        }
        Ok(TrainOutcome {
            checkpoint: self.checkpoint(),
            log: self.log,
            phases,
        })
    }
}

pub fn train(cfg: TrainConfig, corpus: &Corpus) -> Result<TrainOutcome> {
    Trainer::new(cfg, corpus)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticSpec};

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            embed_dim: 8,
            hidden: 8,
            attn_dim: 8,
            recon_attn_dim: 8,
            max_epochs: 2,
            val_beam: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(Phase::schedule(Stage::Xe), &[Phase::Xe]);
        assert_eq!(Phase::schedule(Stage::RlJoint), &[Phase::Xe, Phase::Joint, Phase::ScstJoint]);
        assert!(Phase::ScstJoint.uses_recon() && Phase::ScstJoint.is_rl());
        assert!(!Phase::Xe.uses_recon() && !Phase::Xe.is_rl());
    }

    #[test]
    fn csv_leaves_recon_blank_when_absent() {
        let mut log = EpochLog {
            phase: Phase::Xe,
            epoch: 3,
            xe_loss: 1.5,
            recon_loss: None,
            total_loss: 1.5,
            val_cider: 0.25,
            max_decomposition_error: 0.0,
        };
        assert_eq!(log.csv_row(), "3,1.5,,1.5,0.25");
        log.recon_loss = Some(2.0);
        let mut out = Vec::new();
        write_epoch_csv(&[log], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{EPOCH_LOG_HEADER}\n3,1.5,2.0,1.5,0.25\n"));
    }

    #[test]
    fn empty_validation_split_is_rejected() {
        let mut corpus = gen_synthetic(SyntheticSpec::new(1, 20, 8)).into_corpus().unwrap();
        corpus.splits.val.clear();
        assert!(matches!(Trainer::new(tiny_cfg(), &corpus), Err(Error::Config(_))));
    }

    #[test]
    fn epochs_are_numbered_across_phases() {
        let corpus = gen_synthetic(SyntheticSpec::new(1, 20, 8)).into_corpus().unwrap();
        let out = train(tiny_cfg(), &corpus).unwrap();
        let epochs: Vec<usize> = out.log.iter().map(|l| l.epoch).collect();
        assert_eq!(epochs, vec![1, 2, 3, 4]);
        assert!(out.log[..2].iter().all(|l| l.recon_loss.is_none()));
        assert!(out.log[2..].iter().all(|l| l.recon_loss.is_some()));
        assert_eq!(out.phases.len(), 2);
    }
}
