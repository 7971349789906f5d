//! Corpus-level BLEU-4, ROUGE-L and CIDEr over token-id sentences.
//!
//! All maps are ordered so that floating-point sums run in a fixed order
//! and repeated scoring is bitwise reproducible.

pub mod ngram;

use serde::{Deserialize, Serialize};

pub use ngram::{DocFreq, NGramTable, MAX_N};

use crate::error::{Error, Result};

/// ROUGE-L recall weight.
pub const ROUGE_BETA: f64 = 1.2;
/// Length-penalty width of the CIDEr-D variant.
pub const CIDER_D_SIGMA: f64 = 6.0;

fn check_inputs(candidates: &[Vec<u32>], references: &[Vec<Vec<u32>>]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::Metric("empty candidate list".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Metric(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::Metric(format!("reference set {i} is empty")));
    }
    Ok(())
}

/// Corpus BLEU-4 with pooled clipped precisions and no smoothing.
pub fn bleu4(candidates: &[Vec<u32>], references: &[Vec<Vec<u32>>]) -> Result<f64> {
    check_inputs(candidates, references)?;
    let mut matched = [0usize; MAX_N];
    let mut total = [0usize; MAX_N];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .expect("nonempty reference set");
        for n in 1..=MAX_N {
            let ct = NGramTable::new(cand, n);
            let ref_tables: Vec<NGramTable> = refs.iter().map(|r| NGramTable::new(r, n)).collect();
            total[n - 1] += ct.total();
            for (gram, &c) in &ct.counts {
                let max_ref = ref_tables.iter().map(|t| t.get(gram)).max().unwrap_or(0);
                matched[n - 1] += c.min(max_ref);
            }
        }
    }
    if cand_len == 0 || matched.iter().any(|&m| m == 0) {
        return Ok(0.0);
    }
    let log_p: f64 = matched
        .iter()
        .zip(&total)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / MAX_N as f64;
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(bp * log_p.exp())
}

pub fn lcs_len(a: &[u32], b: &[u32]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure of one candidate against one reference.
pub fn rouge_l_pair(cand: &[u32], reference: &[u32]) -> f64 {
    let lcs = lcs_len(cand, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / cand.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Per-sentence ROUGE-L (best reference) and the corpus mean.
pub fn rouge_l_sentences(candidates: &[Vec<u32>], references: &[Vec<Vec<u32>>]) -> Result<Vec<f64>> {
    check_inputs(candidates, references)?;
    Ok(candidates
        .iter()
        .zip(references)
        .map(|(c, refs)| refs.iter().map(|r| rouge_l_pair(c, r)).fold(0.0, f64::max))
        .collect())
}

pub fn rouge_l(candidates: &[Vec<u32>], references: &[Vec<Vec<u32>>]) -> Result<f64> {
    let s = rouge_l_sentences(candidates, references)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum CiderVariant {
    /// TF-IDF cosine averaged over orders 1..=4, scaled by 10.
    #[default]
    Plain,
    /// Clipped candidate weights and a Gaussian length penalty.
    D,
}

struct TfIdf {
    weights: Vec<(Vec<u32>, f64)>,
    norm_sq: f64,
    len: usize,
}

fn tfidf(tokens: &[u32], n: usize, df: &DocFreq) -> TfIdf {
    let table = NGramTable::new(tokens, n);
    let total = table.total().max(1) as f64;
    let weights: Vec<(Vec<u32>, f64)> = table
        .counts
        .into_iter()
        .map(|(g, c)| {
            let w = c as f64 / total * df.idf(&g);
            (g, w)
        })
        .collect();
    let norm_sq = weights.iter().map(|(_, w)| w * w).sum();
    TfIdf {
        weights,
        norm_sq,
        len: tokens.len(),
    }
}

fn similarity(c: &TfIdf, r: &TfIdf, variant: CiderVariant) -> f64 {
    if c.norm_sq == 0.0 || r.norm_sq == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0;
    let mut j = 0;
    for (g, wc) in &c.weights {
        while j < r.weights.len() && r.weights[j].0 < *g {
            j += 1;
        }
        if j < r.weights.len() && r.weights[j].0 == *g {
            let wr = r.weights[j].1;
            dot += match variant {
                CiderVariant::Plain => wc * wr,
                CiderVariant::D => wc.min(wr) * wr,
            };
        }
    }
    let mut sim = (dot / (c.norm_sq * r.norm_sq).sqrt()).clamp(0.0, 1.0);
    if variant == CiderVariant::D {
        let delta = c.len as f64 - r.len as f64;
        sim *= (-(delta * delta) / (2.0 * CIDER_D_SIGMA * CIDER_D_SIGMA)).exp();
    }
    sim
}

/// CIDEr of one candidate against its reference set.
pub fn cider_sentence(cand: &[u32], refs: &[Vec<u32>], df: &DocFreq, variant: CiderVariant) -> f64 {
    let mut score = 0.0;
    for n in 1..=MAX_N {
        let c = tfidf(cand, n, df);
        let sum: f64 = refs
            .iter()
            .map(|r| similarity(&c, &tfidf(r, n, df), variant))
            .sum();
        score += sum / refs.len() as f64;
    }
    10.0 * score / MAX_N as f64
}

/// Corpus CIDEr and the per-sentence scores.
pub fn cider(
    candidates: &[Vec<u32>],
    references: &[Vec<Vec<u32>>],
    df: &DocFreq,
    variant: CiderVariant,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(candidates, references)?;
    let per: Vec<f64> = candidates
        .iter()
        .zip(references)
        .map(|(c, refs)| cider_sentence(c, refs, df, variant))
        .collect();
    Ok((per.iter().sum::<f64>() / per.len() as f64, per))
}

/// Serialized evaluation summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu4: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub cider: f64,
    pub per_sentence: Vec<f64>,
}

impl MetricReport {
    /// Scores candidates with document frequencies taken from `references`.
    pub fn compute(candidates: &[Vec<u32>], references: &[Vec<Vec<u32>>], variant: CiderVariant) -> Result<Self> {
        let df = DocFreq::build(references);
        let (cider, per_sentence) = cider(candidates, references, &df, variant)?;
        Ok(MetricReport {
            bleu4: bleu4(candidates, references)?,
            rouge_l: rouge_l(candidates, references)?,
            cider,
            per_sentence,
        })
    }

    pub fn in_range(&self) -> bool {
        (0.0..=1.0).contains(&self.bleu4)
            && (0.0..=1.0).contains(&self.rouge_l)
            && (0.0..=10.0).contains(&self.cider)
            && self.per_sentence.iter().all(|s| (0.0..=10.0).contains(s))
    }
}
