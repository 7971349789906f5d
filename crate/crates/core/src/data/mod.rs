//! Caption preprocessing, vocabulary, frame features and corpora.

pub mod corpus;
pub mod features;
pub mod synthetic;
pub mod text;
pub mod vocab;

pub use corpus::{CaptionRecord, CaptionSet, Corpus, Splits, VideoEntry};
pub use features::{
    read_features, sample_frames, sample_frames_to, write_features, SampledFeatures, VideoFeatures,
    NUM_FRAMES,
};
pub use synthetic::{gen_synthetic, SyntheticCorpus, SyntheticSpec};
pub use text::{preprocess_caption, MAX_CAPTION_TOKENS};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};
