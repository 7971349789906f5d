//! Greedy, sampled and beam decoding over any step-wise model.

use std::cmp::Ordering;

use crate::data::vocab::{BOS, EOS};
use crate::error::{Error, Result};
use crate::rng::XorShift64Star;

/// A left-to-right model producing log-probabilities over the vocabulary.
pub trait StepModel {
    type State: Clone;

    fn initial(&self) -> Self::State;

    /// Log-probabilities of the next token and the successor state.
    fn step(&self, prev: u32, state: &Self::State) -> Result<(Vec<f64>, Self::State)>;

    fn max_steps(&self) -> usize;
}

/// A finished decode.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Caption tokens, without the terminating EOS.
    pub tokens: Vec<u32>,
    /// True when decoding stopped on EOS rather than the step cap.
    pub ended_with_eos: bool,
    /// Log-probability of every emitted token (EOS included).
    pub step_log_probs: Vec<f64>,
}

impl Decoded {
    pub fn log_prob(&self) -> f64 {
        self.step_log_probs.iter().sum()
    }

    /// Every emitted token including the final EOS, if any.
    pub fn emitted(&self) -> Vec<u32> {
        let mut out = self.tokens.clone();
        if self.ended_with_eos {
            out.push(EOS);
        }
        out
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Draws an index from the categorical distribution given by `log_probs`.
pub fn sample_index(log_probs: &[f64], rng: &mut XorShift64Star) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, lp) in log_probs.iter().enumerate() {
        let p = lp.exp();
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

fn rollout<M: StepModel>(model: &M, mut pick: impl FnMut(&[f64]) -> usize) -> Result<Decoded> {
    let mut state = model.initial();
    let mut prev = BOS;
    let mut out = Decoded {
        tokens: Vec::new(),
        ended_with_eos: false,
        step_log_probs: Vec::new(),
    };
    for _ in 0..model.max_steps() {
        let (logp, next) = model.step(prev, &state)?;
        let tok = pick(&logp);
        out.step_log_probs.push(logp[tok]);
        if tok as u32 == EOS {
            out.ended_with_eos = true;
            break;
        }
        out.tokens.push(tok as u32);
        prev = tok as u32;
        state = next;
    }
    Ok(out)
}

pub fn greedy_decode<M: StepModel>(model: &M) -> Result<Decoded> {
    rollout(model, argmax)
}

pub fn sample_decode<M: StepModel>(model: &M, rng: &mut XorShift64Star) -> Result<Decoded> {
    rollout(model, |lp| sample_index(lp, rng))
}

struct Hyp<S> {
    tokens: Vec<u32>,
    step_log_probs: Vec<f64>,
    score: f64,
    state: S,
}

/// Highest score first, then earlier termination, then lexicographic ids.
fn rank(a_score: f64, a_tokens: &[u32], b_score: f64, b_tokens: &[u32]) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_tokens.len().cmp(&b_tokens.len()))
        .then_with(|| a_tokens.cmp(b_tokens))
}

/// Length-wise beam search over summed log-probabilities.
///
/// Each step keeps the `beam` best extensions of the live hypotheses.
/// Extensions ending in EOS, or reaching the step cap, retire into the
/// finished pool, which is ranked by total log-probability.
pub fn beam_search<M: StepModel>(model: &M, beam: usize) -> Result<Decoded> {
    if beam < 1 {
        return Err(Error::Config("beam size must be at least 1".into()));
    }
    let mut alive = vec![Hyp {
        tokens: Vec::new(),
        step_log_probs: Vec::new(),
        score: 0.0,
        state: model.initial(),
    }];
    let mut finished: Vec<(Decoded, f64)> = Vec::new();
    let max_steps = model.max_steps();

    for step in 0..max_steps {
        let mut cands: Vec<(usize, u32, f64, f64, M::State)> = Vec::new();
        for (hi, h) in alive.iter().enumerate() {
            let prev = h.tokens.last().copied().unwrap_or(BOS);
            let (logp, next) = model.step(prev, &h.state)?;
            for (tok, &lp) in logp.iter().enumerate() {
                cands.push((hi, tok as u32, lp, h.score + lp, next.clone()));
            }
        }
        let seq = |c: &(usize, u32, f64, f64, M::State)| {
            let mut s = alive[c.0].tokens.clone();
            s.push(c.1);
            s
        };
        cands.sort_by(|a, b| {
            b.3.partial_cmp(&a.3)
                .unwrap_or(Ordering::Equal)
                .then_with(|| seq(a).cmp(&seq(b)))
        });
        cands.truncate(beam);

        let mut next_alive = Vec::with_capacity(beam);
        for (hi, tok, lp, score, state) in cands {
            let parent = &alive[hi];
            let mut step_log_probs = parent.step_log_probs.clone();
            step_log_probs.push(lp);
            let mut tokens = parent.tokens.clone();
            if tok == EOS {
                finished.push((
                    Decoded {
                        tokens,
                        ended_with_eos: true,
                        step_log_probs,
                    },
                    score,
                ));
                continue;
            }
            tokens.push(tok);
            if step + 1 == max_steps {
                finished.push((
                    Decoded {
                        tokens,
                        ended_with_eos: false,
                        step_log_probs,
                    },
                    score,
                ));
            } else {
                next_alive.push(Hyp {
                    tokens,
                    step_log_probs,
                    score,
                    state,
                });
            }
        }
        alive = next_alive;
        if alive.is_empty() {
            break;
        }
        // Scores only decrease, so no live hypothesis can overtake a better finished one.
        let best_alive = alive.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        let best_done = finished.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        if best_done > best_alive {
            break;
        }
    }

    finished
        .into_iter()
        .min_by(|a, b| rank(a.1, &a.0.emitted(), b.1, &b.0.emitted()))
        .map(|(d, _)| d)
        .ok_or(Error::Empty("beam_search"))
}
