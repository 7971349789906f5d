//! Training configuration and its flat `key = value` text form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::CiderVariant;
use crate::model::{ModelConfig, ReconKind, MAX_DECODE_STEPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Cross-entropy training of the decoder only.
    Xe,
    /// Cross-entropy, then cross-entropy plus weighted reconstruction.
    Joint,
    /// Cross-entropy, then self-critical training.
    Rl,
    /// Cross-entropy, joint training, then self-critical plus reconstruction.
    RlJoint,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Xe => "xe",
            Stage::Joint => "joint",
            Stage::Rl => "rl",
            Stage::RlJoint => "rl-joint",
        })
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xe" => Ok(Stage::Xe),
            "joint" => Ok(Stage::Joint),
            "rl" => Ok(Stage::Rl),
            "rl-joint" => Ok(Stage::RlJoint),
            _ => Err(Error::Config(format!("unknown stage `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerSpec {
    AdaDelta { rho: f64, eps: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerSpec {
    pub const fn adadelta() -> Self {
        OptimizerSpec::AdaDelta { rho: 0.95, eps: 1e-6 }
    }

    pub const fn adam(lr: f64) -> Self {
        OptimizerSpec::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl fmt::Display for OptimizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizerSpec::AdaDelta { rho, eps } => write!(f, "adadelta({rho:?}, {eps:?})"),
            OptimizerSpec::Adam { lr, beta1, beta2, eps } => {
                write!(f, "adam({lr:?}, {beta1:?}, {beta2:?}, {eps:?})")
            }
        }
    }
}

impl FromStr for OptimizerSpec {
    type Err = Error;

    /// `adadelta`, `adadelta(rho, eps)`, `adam`, `adam(lr)` or
    /// `adam(lr, beta1, beta2, eps)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad optimizer `{s}`"));
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            Some(_) => return Err(bad()),
            None => (s, ""),
        };
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?
        };
        match (name.trim(), nums.as_slice()) {
            ("adadelta", []) => Ok(OptimizerSpec::adadelta()),
            ("adadelta", &[rho, eps]) => Ok(OptimizerSpec::AdaDelta { rho, eps }),
            ("adam", []) => Ok(OptimizerSpec::adam(1e-5)),
            ("adam", &[lr]) => Ok(OptimizerSpec::adam(lr)),
            ("adam", &[lr, beta1, beta2, eps]) => Ok(OptimizerSpec::Adam { lr, beta1, beta2, eps }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub stage: Stage,
    pub reconstructor: Option<ReconKind>,
    /// Reconstruction weight; `None` uses the reconstructor's default.
    pub lambda: Option<f64>,
    pub xe_optimizer: OptimizerSpec,
    pub rl_optimizer: OptimizerSpec,
    pub batch_size: usize,
    pub patience: usize,
    /// Epoch cap for each stage.
    pub max_epochs: usize,
    pub seed: u64,
    /// Beam used when scoring the validation split for early stopping.
    pub val_beam: usize,
    pub eval_beam: usize,
    pub cider_variant: CiderVariant,
    pub embed_dim: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub recon_attn_dim: usize,
    pub min_count: usize,
    pub mask_padding: bool,
    pub local_valid_only: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage: Stage::Joint,
            reconstructor: Some(ReconKind::Local),
            lambda: None,
            xe_optimizer: OptimizerSpec::adadelta(),
            rl_optimizer: OptimizerSpec::adam(1e-5),
            batch_size: 16,
            patience: 20,
            max_epochs: 500,
            seed: 0,
            val_beam: 5,
            eval_beam: 5,
            cider_variant: CiderVariant::Plain,
            embed_dim: 468,
            hidden: 512,
            attn_dim: 512,
            recon_attn_dim: 512,
            min_count: 1,
            mask_padding: false,
            local_valid_only: false,
        }
    }
}

pub const CONFIG_KEYS: [&str; 21] = [
    "stage",
    "reconstructor",
    "lambda",
    "xe_optimizer",
    "rl_optimizer",
    "batch_size",
    "patience",
    "max_epochs",
    "seed",
    "val_beam",
    "eval_beam",
    "cider_variant",
    "embed_dim",
    "hidden",
    "attn_dim",
    "recon_attn_dim",
    "min_count",
    "mask_padding",
    "local_valid_only",
    "max_steps",
    "format",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
    }
}

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if out.insert(k.clone(), v).is_some() {
            return Err(Error::Config(format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

impl TrainConfig {
    /// Effective reconstruction weight; zero without a reconstructor.
    pub fn effective_lambda(&self) -> f64 {
        match self.reconstructor {
            None => 0.0,
            Some(k) => self.lambda.unwrap_or_else(|| k.default_lambda()),
        }
    }

    pub fn model_config(&self, vocab_size: usize, feature_dim: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            feature_dim,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            attn_dim: self.attn_dim,
            recon_attn_dim: self.recon_attn_dim,
            max_steps: MAX_DECODE_STEPS,
            mask_padding: self.mask_padding,
            local_valid_only: self.local_valid_only,
        }
    }

    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "stage" => self.stage = v.parse()?,
            "reconstructor" => {
                self.reconstructor = match v {
                    "none" => None,
                    other => Some(other.parse()?),
                }
            }
            "lambda" => {
                self.lambda = match v {
                    "default" => None,
                    other => {
                        let l: f64 = parse_num(key, other)?;
                        if !(l >= 0.0 && l.is_finite()) {
                            return Err(Error::Config(format!("lambda must be a finite value >= 0, got {l}")));
                        }
                        Some(l)
                    }
                }
            }
            "xe_optimizer" => self.xe_optimizer = v.parse()?,
            "rl_optimizer" => self.rl_optimizer = v.parse()?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "patience" => self.patience = parse_num(key, v)?,
            "max_epochs" => self.max_epochs = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "val_beam" => self.val_beam = parse_num(key, v)?,
            "eval_beam" => self.eval_beam = parse_num(key, v)?,
            "cider_variant" => {
                self.cider_variant = match v {
                    "plain" => CiderVariant::Plain,
                    "d" | "cider-d" => CiderVariant::D,
                    _ => return Err(Error::Config(format!("unknown cider variant `{v}`"))),
                }
            }
            "embed_dim" => self.embed_dim = parse_num(key, v)?,
            "hidden" => self.hidden = parse_num(key, v)?,
            "attn_dim" => self.attn_dim = parse_num(key, v)?,
            "recon_attn_dim" => self.recon_attn_dim = parse_num(key, v)?,
            "min_count" => self.min_count = parse_num(key, v)?,
            "mask_padding" => self.mask_padding = parse_bool(key, v)?,
            "local_valid_only" => self.local_valid_only = parse_bool(key, v)?,
            "max_steps" => {
                let n: usize = parse_num(key, v)?;
                if n != MAX_DECODE_STEPS {
                    return Err(Error::Config(format!("max_steps is fixed at {MAX_DECODE_STEPS}")));
                }
            }
            "format" => {
                if v != "1" {
                    return Err(Error::Config(format!("unsupported config format {v}")));
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (k, v) in parse_kv(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_text(&self) -> String {
        let recon = self.reconstructor.map_or("none".to_string(), |k| k.to_string());
        let lambda = self.lambda.map_or("default".to_string(), |l| format!("{l:?}"));
        let cider = match self.cider_variant {
            CiderVariant::Plain => "plain",
            CiderVariant::D => "d",
        };
        format!(
            "format = 1\nstage = {}\nreconstructor = {recon}\nlambda = {lambda}\nxe_optimizer = {}\n\
             rl_optimizer = {}\nbatch_size = {}\npatience = {}\nmax_epochs = {}\nseed = {}\nval_beam = {}\n\
             eval_beam = {}\ncider_variant = {cider}\nembed_dim = {}\nhidden = {}\nattn_dim = {}\n\
             recon_attn_dim = {}\nmin_count = {}\nmask_padding = {}\nlocal_valid_only = {}\n",
            self.stage,
            self.xe_optimizer,
            self.rl_optimizer,
            self.batch_size,
            self.patience,
            self.max_epochs,
            self.seed,
            self.val_beam,
            self.eval_beam,
            self.embed_dim,
            self.hidden,
            self.attn_dim,
            self.recon_attn_dim,
            self.min_count,
            self.mask_padding,
            self.local_valid_only,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("max_epochs", self.max_epochs),
            ("val_beam", self.val_beam),
            ("eval_beam", self.eval_beam),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("attn_dim", self.attn_dim),
            ("recon_attn_dim", self.recon_attn_dim),
            ("min_count", self.min_count),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if matches!(self.stage, Stage::RlJoint) && self.reconstructor.is_none() {
            return Err(Error::Config("stage rl-joint needs a reconstructor".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let cfg = TrainConfig {
            stage: Stage::RlJoint,
            reconstructor: Some(ReconKind::Global),
            lambda: Some(0.25),
            xe_optimizer: OptimizerSpec::adam(1e-3),
            seed: 99,
            mask_padding: true,
            cider_variant: CiderVariant::D,
            ..TrainConfig::default()
        };
        let back = TrainConfig::from_kv_text(&cfg.to_kv_text()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(TrainConfig::from_kv_text("colour = blue").is_err());
        assert!(TrainConfig::from_kv_text("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = TrainConfig::from_kv_text("# header\n\nseed = 5 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn lambda_defaults_follow_reconstructor() {
        let mut cfg = TrainConfig::default();
        cfg.reconstructor = Some(ReconKind::Global);
        assert_eq!(cfg.effective_lambda(), 0.2);
        cfg.reconstructor = Some(ReconKind::Local);
        assert_eq!(cfg.effective_lambda(), 0.1);
        cfg.reconstructor = None;
        assert_eq!(cfg.effective_lambda(), 0.0);
        cfg.reconstructor = Some(ReconKind::Local);
        cfg.lambda = Some(0.0);
        assert_eq!(cfg.effective_lambda(), 0.0);
    }

    #[test]
    fn optimizer_specs_parse() {
        assert_eq!("adadelta".parse::<OptimizerSpec>().unwrap(), OptimizerSpec::adadelta());
        assert_eq!("adam(0.001)".parse::<OptimizerSpec>().unwrap(), OptimizerSpec::adam(1e-3));
        assert!("adam(1,2)".parse::<OptimizerSpec>().is_err());
        assert!("sgd".parse::<OptimizerSpec>().is_err());
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(TrainConfig::from_kv_text("lambda = -0.1").is_err());
    }
}
