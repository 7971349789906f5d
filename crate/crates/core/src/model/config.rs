use crate::error::{Error, Result};

/// Longest decode: 30 caption tokens plus EOS.
pub const MAX_DECODE_STEPS: usize = 31;

/// Network dimensions. The reconstructor's hidden size always equals
/// `feature_dim` so that its states are directly comparable to frame features.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    /// Width of the decoder's attention score space.
    pub attn_dim: usize,
    /// Width of the local reconstructor's attention score space.
    pub recon_attn_dim: usize,
    pub max_steps: usize,
    /// Exclude zero-padded frames from decoder attention.
    pub mask_padding: bool,
    /// Restrict the local reconstruction loss to non-padded frames.
    pub local_valid_only: bool,
}

impl ModelConfig {
    /// Full-size network: 468-d embeddings, 512 hidden units.
    pub fn full(vocab_size: usize, feature_dim: usize) -> Self {
        ModelConfig {
            vocab_size,
            feature_dim,
            embed_dim: 468,
            hidden: 512,
            attn_dim: 512,
            recon_attn_dim: 512,
            max_steps: MAX_DECODE_STEPS,
            mask_padding: false,
            local_valid_only: false,
        }
    }

    /// Small network for tests and desk-scale runs.
    pub fn shrunk(vocab_size: usize, feature_dim: usize, embed_dim: usize, hidden: usize) -> Self {
        ModelConfig {
            embed_dim,
            hidden,
            attn_dim: hidden,
            recon_attn_dim: hidden,
            ..ModelConfig::full(vocab_size, feature_dim)
        }
    }

    pub fn recon_hidden(&self) -> usize {
        self.feature_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("feature_dim", self.feature_dim),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("attn_dim", self.attn_dim),
            ("recon_attn_dim", self.recon_attn_dim),
            ("max_steps", self.max_steps),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < crate::data::vocab::NUM_RESERVED {
            return Err(Error::Config("vocabulary smaller than the reserved ids".into()));
        }
        Ok(())
    }
}
