//! Deterministic toy corpus of "subject verb object" videos.
//!
//! Each of the 24 lexicon words owns a seed-derived vector with entries in
//! [-0.5, 0.5). Frame `t` of a video is
//! `Σ_role w_role(t) · vec(token_role) + N(0, σ²)` with
//! `w_role(t) = 0.5 + 0.5 sin(2π (t/28 + role/3))`, so the three roles peak
//! at different times. Values are rounded to `f32` precision so that a corpus
//! written to disk and read back is identical to the in-memory one.

use super::corpus::{split_ids, CaptionRecord, CaptionSet, Splits};
use super::features::{VideoFeatures, NUM_FRAMES};
use super::vocab::Vocabulary;
use crate::rng::XorShift64Star;

pub const SUBJECTS: [&str; 8] = ["boy", "cat", "chef", "child", "dog", "girl", "man", "woman"];
pub const VERBS: [&str; 8] = ["cuts", "eats", "holds", "jumps", "plays", "rides", "runs", "throws"];
pub const OBJECTS: [&str; 8] = ["ball", "bike", "bread", "cup", "food", "guitar", "rope", "stick"];

pub const DEFAULT_NOISE: f64 = 0.05;

const STREAM_TOKENS: u64 = 1;
const STREAM_CAPTIONS: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[derive(Clone, Copy, Debug)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_videos: usize,
    pub dim: usize,
    pub noise_sigma: f64,
}

impl SyntheticSpec {
    pub fn new(seed: u64, n_videos: usize, dim: usize) -> Self {
        SyntheticSpec {
            seed,
            n_videos,
            dim,
            noise_sigma: DEFAULT_NOISE,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub features: Vec<VideoFeatures>,
    pub captions: Vec<CaptionSet>,
    pub records: Vec<CaptionRecord>,
    pub vocab: Vocabulary,
    pub splits: Splits,
}

fn role_weight(role: usize, t: usize) -> f64 {
    let phase = t as f64 / NUM_FRAMES as f64 + role as f64 / 3.0;
    0.5 + 0.5 * (std::f64::consts::TAU * phase).sin()
}

pub fn lexicon() -> Vec<&'static str> {
    SUBJECTS.iter().chain(&VERBS).chain(&OBJECTS).copied().collect()
}

/// Generates the corpus. Panics if `n_videos == 0` or `dim < 8`.
pub fn gen_synthetic(spec: SyntheticSpec) -> SyntheticCorpus {
    assert!(spec.n_videos >= 1, "need at least one video");
    assert!(spec.dim >= 8, "feature dimension must be at least 8");
    let d = spec.dim;

    let words = lexicon();
    let mut tok_rng = XorShift64Star::stream(spec.seed, STREAM_TOKENS);
    let token_vecs: Vec<Vec<f64>> = words
        .iter()
        .map(|_| (0..d).map(|_| tok_rng.uniform(-0.5, 0.5)).collect())
        .collect();

    let mut sorted = words.clone();
    sorted.sort_unstable();
    let vocab = Vocabulary::from_tokens(sorted.iter().map(|s| s.to_string()));

    let mut cap_rng = XorShift64Star::stream(spec.seed, STREAM_CAPTIONS);
    let mut noise_rng = XorShift64Star::stream(spec.seed, STREAM_NOISE);

    let mut features = Vec::with_capacity(spec.n_videos);
    let mut captions = Vec::with_capacity(spec.n_videos);
    let mut records = Vec::with_capacity(spec.n_videos);
    for v in 0..spec.n_videos {
        let video_id = format!("vid{v:04}");
        let picks = [
            cap_rng.below(8),
            8 + cap_rng.below(8),
            16 + cap_rng.below(8),
        ];
        let mut data = Vec::with_capacity(NUM_FRAMES * d);
        for t in 0..NUM_FRAMES {
            for k in 0..d {
                let mut x: f64 = picks
                    .iter()
                    .enumerate()
                    .map(|(role, &w)| role_weight(role, t) * token_vecs[w][k])
                    .sum();
                if spec.noise_sigma > 0.0 {
                    x += spec.noise_sigma * noise_rng.normal();
                }
                data.push(x as f32 as f64);
            }
        }
        features.push(
            VideoFeatures::new(video_id.clone(), NUM_FRAMES, d, data).expect("finite by construction"),
        );
        let text: Vec<&str> = picks.iter().map(|&w| words[w]).collect();
        records.push(CaptionRecord {
            video_id: video_id.clone(),
            tokens: vocab.encode(&text),
        });
        captions.push(CaptionSet {
            video_id,
            captions: vec![text.join(" ")],
        });
    }
    let ids: Vec<String> = captions.iter().map(|c| c.video_id.clone()).collect();
    SyntheticCorpus {
        features,
        captions,
        records,
        vocab,
        splits: split_ids(&ids),
    }
}

impl SyntheticCorpus {
    pub fn into_corpus(self) -> crate::error::Result<super::corpus::Corpus> {
        super::corpus::Corpus::assemble(self.vocab, &self.features, &self.captions, self.splits)
    }
}
