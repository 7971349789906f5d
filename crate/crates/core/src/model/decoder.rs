//! LSTM decoder with temporal attention over frame features.
//!
//! At step `i` the previous hidden state scores every frame,
//! `e_j = w_aᵀ tanh(W_vd v_j + W_hd h_{i−1} + b_d)`, the scores are
//! softmax-normalised into `α`, and the context `c_i = Σ_j α_j v_j` is fed
//! with the previous word's embedding and `h_{i−1}` into one LSTM
//! transform. The new hidden state is projected to vocabulary logits.

use crate::autodiff::{log_softmax, ParamId, ParamStore, Tape, Tensor, Var};
use crate::data::vocab::{BOS, EOS};
use crate::data::SampledFeatures;
use crate::error::{Error, Result};
use crate::rng::XorShift64Star;

use super::config::ModelConfig;
use super::lstm::{lstm_cell, LstmState};
use super::search::StepModel;

const MASKED_SCORE: f64 = -1e30;

#[derive(Clone, Debug)]
pub struct Decoder {
    pub cfg: ModelConfig,
    pub embed: ParamId,
    pub lstm_w: ParamId,
    pub lstm_b: ParamId,
    pub w_vd: ParamId,
    pub w_hd: ParamId,
    pub b_d: ParamId,
    pub w_a: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

/// Per-video tape inputs shared by all decoding steps.
#[derive(Clone, Copy, Debug)]
pub struct VideoVars {
    pub frames: Var,
    pub projected: Var,
    pub mask: Option<Var>,
}

#[derive(Clone, Copy, Debug)]
pub struct StepVars {
    pub alpha: Var,
    pub context: Var,
    pub h: Var,
    pub mem: Var,
    pub logits: Var,
}

/// Tape handles for a decoded sequence.
#[derive(Clone, Debug, Default)]
pub struct SequenceVars {
    pub hidden: Vec<Var>,
    pub alpha: Vec<Var>,
    pub logits: Vec<Var>,
    /// `log P(target_i | ...)` per step, each a scalar.
    pub log_probs: Vec<Var>,
    pub targets: Vec<u32>,
}

impl SequenceVars {
    pub fn trace(&self, t: &Tape<'_>) -> DecoderTrace {
        let vals = |vs: &[Var]| vs.iter().map(|&v| t.data(v).to_vec()).collect();
        DecoderTrace {
            hidden: vals(&self.hidden),
            attention: vals(&self.alpha),
            logits: vals(&self.logits),
            log_probs: self.log_probs.iter().map(|&v| t.scalar(v)).collect(),
            tokens: self.targets.clone(),
        }
    }
}

/// Values recorded during one decoding pass.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderTrace {
    pub hidden: Vec<Vec<f64>>,
    pub attention: Vec<Vec<f64>>,
    pub logits: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub tokens: Vec<u32>,
}

pub const PARAM_NAMES: [&str; 9] = [
    "decoder.embed",
    "decoder.lstm.w",
    "decoder.lstm.b",
    "decoder.attn.w_vd",
    "decoder.attn.w_hd",
    "decoder.attn.b_d",
    "decoder.attn.w_a",
    "decoder.out.w",
    "decoder.out.b",
];

impl Decoder {
    fn shapes(cfg: &ModelConfig) -> [Vec<usize>; 9] {
        let (v, e, h, d, k) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden, cfg.feature_dim, cfg.attn_dim);
        [
            vec![v, e],
            vec![e + d + h, 4 * h],
            vec![4 * h],
            vec![d, k],
            vec![h, k],
            vec![k],
            vec![k],
            vec![h, v],
            vec![v],
        ]
    }

    pub fn init(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut XorShift64Star) -> Result<Self> {
        cfg.validate()?;
        let shapes = Self::shapes(cfg);
        let mut ids = Vec::with_capacity(9);
        for (name, shape) in PARAM_NAMES.iter().zip(&shapes) {
            let fan_in = match *name {
                "decoder.embed" => shape[1],
                "decoder.lstm.b" => cfg.embed_dim + cfg.feature_dim + cfg.hidden,
                "decoder.attn.b_d" | "decoder.attn.w_a" => cfg.attn_dim,
                "decoder.out.b" => cfg.hidden,
                _ => shape[0],
            };
            ids.push(store.add_uniform(name, shape, fan_in, rng)?);
        }
        Ok(Self::from_ids(cfg, &ids))
    }

    /// Looks up the parameters by name, checking every shape.
    pub fn bind(store: &ParamStore, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let shapes = Self::shapes(cfg);
        let ids = bind_named(store, &PARAM_NAMES, &shapes)?;
        Ok(Self::from_ids(cfg, &ids))
    }

    fn from_ids(cfg: &ModelConfig, ids: &[ParamId]) -> Self {
        Decoder {
            cfg: cfg.clone(),
            embed: ids[0],
            lstm_w: ids[1],
            lstm_b: ids[2],
            w_vd: ids[3],
            w_hd: ids[4],
            b_d: ids[5],
            w_a: ids[6],
            out_w: ids[7],
            out_b: ids[8],
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![
            self.embed, self.lstm_w, self.lstm_b, self.w_vd, self.w_hd, self.b_d, self.w_a, self.out_w,
            self.out_b,
        ]
    }

    fn check_video(&self, v: &SampledFeatures) -> Result<()> {
        if v.dim() != self.cfg.feature_dim {
            return Err(Error::shape(
                "decoder features",
                &[v.frames(), v.dim()],
                &[v.frames(), self.cfg.feature_dim],
            ));
        }
        Ok(())
    }

    fn mask_tensor(&self, v: &SampledFeatures) -> Option<Tensor> {
        (self.cfg.mask_padding && v.valid_count < v.frames()).then(|| {
            Tensor::vector(
                (0..v.frames())
                    .map(|j| if j < v.valid_count { 0.0 } else { MASKED_SCORE })
                    .collect(),
            )
        })
    }

    /// Places the frames on the tape and projects them once for attention.
    pub fn prepare(&self, t: &mut Tape<'_>, v: &SampledFeatures) -> Result<VideoVars> {
        self.check_video(v)?;
        let frames = t.constant(v.matrix.clone());
        let w_vd = t.param(self.w_vd);
        let projected = t.matmul(frames, w_vd)?;
        let mask = self.mask_tensor(v).map(|m| t.constant(m));
        Ok(VideoVars {
            frames,
            projected,
            mask,
        })
    }

    /// Attention weights over frames and the resulting context vector.
    pub fn attend(&self, t: &mut Tape<'_>, video: &VideoVars, h_prev: Var) -> Result<(Var, Var)> {
        let w_hd = t.param(self.w_hd);
        let b_d = t.param(self.b_d);
        let w_a = t.param(self.w_a);
        let q = t.matmul(h_prev, w_hd)?;
        let q = t.add(q, b_d)?;
        let pre = t.add_row_bias(video.projected, q)?;
        let act = t.tanh(pre);
        let mut scores = t.matvec(act, w_a)?;
        if let Some(m) = video.mask {
            scores = t.add(scores, m)?;
        }
        let alpha = t.softmax(scores)?;
        let context = t.matmul(alpha, video.frames)?;
        Ok((alpha, context))
    }

    pub fn step(&self, t: &mut Tape<'_>, video: &VideoVars, prev_token: u32, h: Var, mem: Var) -> Result<StepVars> {
        if prev_token as usize >= self.cfg.vocab_size {
            return Err(Error::InvalidToken {
                id: prev_token,
                size: self.cfg.vocab_size,
            });
        }
        let (alpha, context) = self.attend(t, video, h)?;
        let embed = t.param(self.embed);
        let word = t.row(embed, prev_token as usize)?;
        let input = t.concat(&[word, context, h])?;
        let w = t.param(self.lstm_w);
        let b = t.param(self.lstm_b);
        let (h_new, mem_new) = lstm_cell(t, w, Some(b), input, mem, self.cfg.hidden)?;
        let out_w = t.param(self.out_w);
        let out_b = t.param(self.out_b);
        let logits = t.matmul(h_new, out_w)?;
        let logits = t.add(logits, out_b)?;
        Ok(StepVars {
            alpha,
            context,
            h: h_new,
            mem: mem_new,
            logits,
        })
    }

    /// Feeds BOS followed by `targets[..n-1]` and scores every target.
    pub fn score_sequence(&self, t: &mut Tape<'_>, v: &SampledFeatures, targets: &[u32]) -> Result<SequenceVars> {
        if targets.is_empty() {
            return Err(Error::Empty("score_sequence"));
        }
        let video = self.prepare(t, v)?;
        let mut h = t.constant(Tensor::zeros(&[self.cfg.hidden]));
        let mut mem = t.constant(Tensor::zeros(&[self.cfg.hidden]));
        let mut prev = BOS;
        let mut out = SequenceVars {
            targets: targets.to_vec(),
            ..Default::default()
        };
        for &target in targets {
            if target as usize >= self.cfg.vocab_size {
                return Err(Error::InvalidToken {
                    id: target,
                    size: self.cfg.vocab_size,
                });
            }
            let s = self.step(t, &video, prev, h, mem)?;
            let logp = t.log_softmax(s.logits)?;
            out.log_probs.push(t.pick(logp, target as usize)?);
            out.hidden.push(s.h);
            out.alpha.push(s.alpha);
            out.logits.push(s.logits);
            h = s.h;
            mem = s.mem;
            prev = target;
        }
        Ok(out)
    }

    /// Negative log-likelihood of `caption` followed by EOS.
    pub fn teacher_forced(&self, t: &mut Tape<'_>, v: &SampledFeatures, caption: &[u32]) -> Result<(Var, SequenceVars)> {
        let mut targets = caption.to_vec();
        targets.push(EOS);
        let seq = self.score_sequence(t, v, &targets)?;
        let total = t.add_n(&seq.log_probs)?;
        let nll = t.scale(total, -1.0);
        Ok((nll, seq))
    }

    /// Inference handle for step-wise decoding of one video.
    pub fn session<'a>(&'a self, store: &'a ParamStore, v: &SampledFeatures) -> Result<DecoderSession<'a>> {
        self.check_video(v)?;
        let mut t = Tape::with_params(store);
        let video = self.prepare(&mut t, v)?;
        let projected = t.value(video.projected).clone();
        Ok(DecoderSession {
            decoder: self,
            store,
            frames: v.matrix.clone(),
            projected,
            mask: self.mask_tensor(v),
        })
    }
}

pub(crate) fn bind_named(store: &ParamStore, names: &[&str], shapes: &[Vec<usize>]) -> Result<Vec<ParamId>> {
    names
        .iter()
        .zip(shapes)
        .map(|(name, shape)| {
            let id = store
                .id(name)
                .ok_or_else(|| Error::ParamMismatch(format!("missing parameter `{name}`")))?;
            let got = store.value(id).shape();
            if got != shape.as_slice() {
                return Err(Error::ParamMismatch(format!(
                    "`{name}` has shape {got:?}, expected {shape:?}"
                )));
            }
            Ok(id)
        })
        .collect()
}

/// Output of one inference step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub log_probs: Vec<f64>,
    pub logits: Vec<f64>,
    pub alpha: Vec<f64>,
    pub state: LstmState,
}

impl StepOutput {
    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }
}

/// Frozen-parameter decoding of a single video.
pub struct DecoderSession<'a> {
    decoder: &'a Decoder,
    store: &'a ParamStore,
    frames: Tensor,
    projected: Tensor,
    mask: Option<Tensor>,
}

impl DecoderSession<'_> {
    pub fn decode_step(&self, prev_token: u32, state: &LstmState) -> Result<StepOutput> {
        let mut t = Tape::with_params(self.store);
        let video = VideoVars {
            frames: t.constant(self.frames.clone()),
            projected: t.constant(self.projected.clone()),
            mask: self.mask.clone().map(|m| t.constant(m)),
        };
        let h = t.constant(Tensor::vector(state.h.clone()));
        let mem = t.constant(Tensor::vector(state.mem.clone()));
        let s = self.decoder.step(&mut t, &video, prev_token, h, mem)?;
        let logits = t.data(s.logits).to_vec();
        Ok(StepOutput {
            log_probs: log_softmax(&logits)?,
            logits,
            alpha: t.data(s.alpha).to_vec(),
            state: LstmState {
                h: t.data(s.h).to_vec(),
                mem: t.data(s.mem).to_vec(),
            },
        })
    }
}

impl StepModel for DecoderSession<'_> {
    type State = LstmState;

    fn initial(&self) -> LstmState {
        LstmState::zeros(self.decoder.cfg.hidden)
    }

    fn step(&self, prev: u32, state: &LstmState) -> Result<(Vec<f64>, LstmState)> {
        let out = self.decode_step(prev, state)?;
        Ok((out.log_probs, out.state))
    }

    fn max_steps(&self) -> usize {
        self.decoder.cfg.max_steps
    }
}
