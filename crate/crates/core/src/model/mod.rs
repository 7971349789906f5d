//! Attention decoder, reconstructors and the combined captioning model.

pub mod config;
pub mod decoder;
pub mod lstm;
pub mod reconstructor;
pub mod search;

pub use config::{ModelConfig, MAX_DECODE_STEPS};
pub use decoder::{Decoder, DecoderSession, DecoderTrace, SequenceVars, StepOutput};
pub use lstm::LstmState;
pub use reconstructor::{ReconKind, ReconTrace, ReconVars, Reconstructor};
pub use search::{beam_search, greedy_decode, sample_decode, Decoded, StepModel};

use crate::autodiff::ParamStore;
use crate::data::SampledFeatures;
use crate::error::Result;
use crate::rng::XorShift64Star;

/// Decoder, optional reconstructor and the parameters they share.
#[derive(Clone, Debug)]
pub struct CaptionModel {
    pub cfg: ModelConfig,
    pub store: ParamStore,
    pub decoder: Decoder,
    pub recon: Option<Reconstructor>,
}

impl CaptionModel {
    pub fn new(cfg: ModelConfig, rng: &mut XorShift64Star) -> Result<Self> {
        let mut store = ParamStore::new();
        let decoder = Decoder::init(&mut store, &cfg, rng)?;
        Ok(CaptionModel {
            cfg,
            store,
            decoder,
            recon: None,
        })
    }

    /// Adds a freshly initialised reconstructor of `kind` (no-op if one of
    /// the same kind is already attached).
    pub fn attach_reconstructor(&mut self, kind: ReconKind, rng: &mut XorShift64Star) -> Result<()> {
        if self.recon.as_ref().map(|r| r.kind) == Some(kind) {
            return Ok(());
        }
        let r = Reconstructor::init(&mut self.store, &self.cfg, kind, rng)?;
        self.recon = Some(r);
        Ok(())
    }

    /// Rebinds a model from a populated store.
    pub fn from_store(cfg: ModelConfig, store: ParamStore, recon: Option<ReconKind>) -> Result<Self> {
        let decoder = Decoder::bind(&store, &cfg)?;
        let recon = recon.map(|k| Reconstructor::bind(&store, &cfg, k)).transpose()?;
        Ok(CaptionModel {
            cfg,
            store,
            decoder,
            recon,
        })
    }

    pub fn session(&self, v: &SampledFeatures) -> Result<DecoderSession<'_>> {
        self.decoder.session(&self.store, v)
    }

    pub fn greedy(&self, v: &SampledFeatures) -> Result<Decoded> {
        greedy_decode(&self.session(v)?)
    }

    pub fn beam(&self, v: &SampledFeatures, beam: usize) -> Result<Decoded> {
        beam_search(&self.session(v)?, beam)
    }

    pub fn sample(&self, v: &SampledFeatures, rng: &mut XorShift64Star) -> Result<Decoded> {
        sample_decode(&self.session(v)?, rng)
    }
}
