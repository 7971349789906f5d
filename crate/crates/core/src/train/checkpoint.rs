//! Binary checkpoint: magic `RCNC`, little-endian throughout.
//!
//! ```text
//! magic[4] version:u32
//! vocab_count:u32 { len:u32 utf8[len] }*
//! config_len:u32 config_text[config_len]        (key = value lines)
//! feature_dim:u32 recon_kind:u8 (0 none, 1 global, 2 local, 3 joint)
//! epoch:u32 best_cider:f64
//! param_count:u32 { name_len:u32 name rank:u32 dims:u32[rank] values:f64[Π dims] }*
//! ```

use std::fs;
use std::path::Path;

use crate::autodiff::{ParamStore, Tensor};
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{CaptionModel, ModelConfig, ReconKind};

use super::config::TrainConfig;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RCNC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub vocab: Vocabulary,
    pub config: TrainConfig,
    pub feature_dim: usize,
    pub recon: Option<ReconKind>,
    pub epoch: usize,
    pub best_cider: f64,
    pub store: ParamStore,
}

fn recon_code(k: Option<ReconKind>) -> u8 {
    match k {
        None => 0,
        Some(ReconKind::Global) => 1,
        Some(ReconKind::Local) => 2,
        Some(ReconKind::Joint) => 3,
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, x: usize) {
        self.0.extend_from_slice(&(x as u32).to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len());
        self.0.extend_from_slice(b);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

const WHAT: &str = "checkpoint";

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Error::Truncated {
            what: WHAT,
            expected: self.pos.saturating_add(n),
            found: self.buf.len(),
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|e| Error::Malformed {
            what: WHAT,
            detail: e.to_string(),
        })
    }
}

impl Checkpoint {
    pub fn from_model(
        model: &CaptionModel,
        vocab: &Vocabulary,
        config: &TrainConfig,
        epoch: usize,
        best_cider: f64,
    ) -> Self {
        let mut store = model.store.clone();
        store.zero_grads();
        Checkpoint {
            vocab: vocab.clone(),
            config: config.clone(),
            feature_dim: model.cfg.feature_dim,
            recon: model.recon.as_ref().map(|r| r.kind),
            epoch,
            best_cider,
            store,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        self.config.model_config(self.vocab.len(), self.feature_dim)
    }

    /// Rebinds the parameters, rejecting missing names or wrong shapes.
    pub fn model(&self) -> Result<CaptionModel> {
        let cfg = self.model_config();
        cfg.validate()?;
        let m = CaptionModel::from_store(cfg, self.store.clone(), self.recon)?;
        let mut expected = m.decoder.param_ids();
        if let Some(r) = &m.recon {
            expected.extend(r.param_ids());
        }
        if expected.len() != self.store.len() {
            return Err(Error::ParamMismatch(format!(
                "{} stored parameters, model expects {}",
                self.store.len(),
                expected.len()
            )));
        }
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(&CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION as usize);
        w.u32(self.vocab.len());
        for t in self.vocab.tokens() {
            w.bytes(t.as_bytes());
        }
        w.bytes(self.config.to_kv_text().as_bytes());
        w.u32(self.feature_dim);
        w.0.push(recon_code(self.recon));
        w.u32(self.epoch);
        w.0.extend_from_slice(&self.best_cider.to_le_bytes());
        w.u32(self.store.len());
        for (_, p) in self.store.iter() {
            w.bytes(p.name.as_bytes());
            let shape = p.tensor.value.shape();
            w.u32(shape.len());
            for &d in shape {
                w.u32(d);
            }
            for x in p.tensor.value.data() {
                w.0.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                what: WHAT,
                expected: CHECKPOINT_MAGIC,
                found: magic,
            });
        }
        let version = r.u32()? as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version { what: WHAT, version });
        }
        let n_tokens = r.u32()?;
        let tokens = (0..n_tokens).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::from_table(tokens)?;
        let config = TrainConfig::from_kv_text(&r.string()?)?;
        let feature_dim = r.u32()?;
        let recon = match r.take(1)?[0] {
            0 => None,
            1 => Some(ReconKind::Global),
            2 => Some(ReconKind::Local),
            3 => Some(ReconKind::Joint),
            c => {
                return Err(Error::Malformed {
                    what: WHAT,
                    detail: format!("unknown reconstructor code {c}"),
                })
            }
        };
        let epoch = r.u32()?;
        let best_cider = r.f64()?;
        let n_params = r.u32()?;
        let mut store = ParamStore::new();
        for _ in 0..n_params {
            let name = r.string()?;
            let rank = r.u32()?;
            let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(Error::Malformed {
                what: WHAT,
                detail: format!("shape {shape:?} overflows"),
            })?;
            let raw = r.take(numel.checked_mul(8).ok_or(Error::Malformed {
                what: WHAT,
                detail: "parameter too large".into(),
            })?)?;
            let data: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if let Some(index) = data.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what: WHAT, index });
            }
            let t = Tensor::new(shape, data).map_err(|e| Error::Malformed {
                what: WHAT,
                detail: e.to_string(),
            })?;
            store.add(&name, t).map_err(|e| Error::Malformed {
                what: WHAT,
                detail: e.to_string(),
            })?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Malformed {
                what: WHAT,
                detail: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(Checkpoint {
            vocab,
            config,
            feature_dim,
            recon,
            epoch,
            best_cider,
            store,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
