//! Reconstructors that reproduce frame features from decoder hidden states.
//!
//! * Global: one LSTM step per decoder state, each consuming
//!   `(h_t, z_{t−1}, mean(H))`; the loss compares the mean reconstructed
//!   state with the mean of the valid frames.
//! * Local: one LSTM step per frame, each consuming an attention-weighted
//!   summary `μ_t = Σ_i β_i h_i` of the decoder states and `z_{t−1}`; the
//!   loss averages the per-frame distances.
//! * Joint: the local pass, scored by both the global and the local terms.
//!
//! Every LSTM here is a single bias-free transform over the concatenated
//! inputs with gates in input, forget, output, candidate order. The
//! distance is the dimension-averaged squared Euclidean distance.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::data::SampledFeatures;
use crate::error::{Error, Result};
use crate::rng::XorShift64Star;

use super::config::ModelConfig;
use super::decoder::bind_named;
use super::lstm::lstm_cell;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReconKind {
    Global,
    Local,
    Joint,
}

impl ReconKind {
    /// Trade-off weight used when none is configured.
    pub fn default_lambda(self) -> f64 {
        match self {
            ReconKind::Global => 0.2,
            ReconKind::Local | ReconKind::Joint => 0.1,
        }
    }
}

impl fmt::Display for ReconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReconKind::Global => "global",
            ReconKind::Local => "local",
            ReconKind::Joint => "joint",
        })
    }
}

impl FromStr for ReconKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(ReconKind::Global),
            "local" => Ok(ReconKind::Local),
            "joint" => Ok(ReconKind::Joint),
            _ => Err(Error::Config(format!("unknown reconstructor `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlobalReconParams {
    pub lstm_w: ParamId,
}

#[derive(Clone, Debug)]
pub struct LocalReconParams {
    pub w_beta: ParamId,
    pub w_hr: ParamId,
    pub w_zr: ParamId,
    pub b_r: ParamId,
    pub lstm_w: ParamId,
}

const GLOBAL_NAMES: [&str; 1] = ["recon.global.lstm.w"];
const LOCAL_NAMES: [&str; 5] = [
    "recon.local.attn.w_beta",
    "recon.local.attn.w_hr",
    "recon.local.attn.w_zr",
    "recon.local.attn.b_r",
    "recon.local.lstm.w",
];

#[derive(Clone, Debug)]
enum Variant {
    Global(GlobalReconParams),
    Local(LocalReconParams),
}

#[derive(Clone, Debug)]
pub struct Reconstructor {
    pub kind: ReconKind,
    cfg: ModelConfig,
    variant: Variant,
}

/// Tape handles produced by one reconstruction pass.
#[derive(Clone, Debug)]
pub struct ReconVars {
    pub z: Vec<Var>,
    pub beta: Vec<Var>,
    pub loss: Var,
    pub global_term: Option<Var>,
    pub local_term: Option<Var>,
}

impl ReconVars {
    pub fn trace(&self, t: &Tape<'_>) -> ReconTrace {
        ReconTrace {
            z: self.z.iter().map(|&v| t.data(v).to_vec()).collect(),
            beta: self.beta.iter().map(|&v| t.data(v).to_vec()).collect(),
            loss: t.scalar(self.loss),
            global_term: self.global_term.map(|v| t.scalar(v)),
            local_term: self.local_term.map(|v| t.scalar(v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconTrace {
    pub z: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub loss: f64,
    pub global_term: Option<f64>,
    pub local_term: Option<f64>,
}

impl Reconstructor {
    fn global_shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
        let (h, r) = (cfg.hidden, cfg.recon_hidden());
        vec![vec![h + r + h, 4 * r]]
    }

    fn local_shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
        let (h, r, k) = (cfg.hidden, cfg.recon_hidden(), cfg.recon_attn_dim);
        vec![vec![k], vec![h, k], vec![r, k], vec![k], vec![h + r, 4 * r]]
    }

    pub fn init(store: &mut ParamStore, cfg: &ModelConfig, kind: ReconKind, rng: &mut XorShift64Star) -> Result<Self> {
        cfg.validate()?;
        let variant = match kind {
            ReconKind::Global => {
                let shape = &Self::global_shapes(cfg)[0];
                let w = store.add_uniform(GLOBAL_NAMES[0], shape, shape[0], rng)?;
                Variant::Global(GlobalReconParams { lstm_w: w })
            }
            ReconKind::Local | ReconKind::Joint => {
                let shapes = Self::local_shapes(cfg);
                let fans = [cfg.recon_attn_dim, cfg.hidden, cfg.recon_hidden(), cfg.recon_attn_dim, shapes[4][0]];
                let mut ids = Vec::new();
                for ((name, shape), fan) in LOCAL_NAMES.iter().zip(&shapes).zip(fans) {
                    ids.push(store.add_uniform(name, shape, fan, rng)?);
                }
                Variant::Local(Self::local_from_ids(&ids))
            }
        };
        Ok(Reconstructor {
            kind,
            cfg: cfg.clone(),
            variant,
        })
    }

    pub fn bind(store: &ParamStore, cfg: &ModelConfig, kind: ReconKind) -> Result<Self> {
        let variant = match kind {
            ReconKind::Global => {
                let ids = bind_named(store, &GLOBAL_NAMES, &Self::global_shapes(cfg))?;
                Variant::Global(GlobalReconParams { lstm_w: ids[0] })
            }
            ReconKind::Local | ReconKind::Joint => {
                let ids = bind_named(store, &LOCAL_NAMES, &Self::local_shapes(cfg))?;
                Variant::Local(Self::local_from_ids(&ids))
            }
        };
        Ok(Reconstructor {
            kind,
            cfg: cfg.clone(),
            variant,
        })
    }

    fn local_from_ids(ids: &[ParamId]) -> LocalReconParams {
        LocalReconParams {
            w_beta: ids[0],
            w_hr: ids[1],
            w_zr: ids[2],
            b_r: ids[3],
            lstm_w: ids[4],
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match &self.variant {
            Variant::Global(g) => vec![g.lstm_w],
            Variant::Local(l) => vec![l.w_beta, l.w_hr, l.w_zr, l.b_r, l.lstm_w],
        }
    }

    pub fn local_params(&self) -> Option<&LocalReconParams> {
        match &self.variant {
            Variant::Local(l) => Some(l),
            Variant::Global(_) => None,
        }
    }

    fn check(&self, hidden: &[Var], v: &SampledFeatures) -> Result<()> {
        if hidden.is_empty() {
            return Err(Error::Empty("reconstructor hidden states"));
        }
        if v.dim() != self.cfg.recon_hidden() {
            return Err(Error::shape("reconstructor features", &[v.dim()], &[self.cfg.recon_hidden()]));
        }
        Ok(())
    }

    /// Runs the configured variant and its loss.
    pub fn forward(&self, t: &mut Tape<'_>, hidden: &[Var], v: &SampledFeatures) -> Result<ReconVars> {
        self.check(hidden, v)?;
        match (&self.variant, self.kind) {
            (Variant::Global(g), _) => {
                let z = self.run_global(t, g, hidden)?;
                let loss = global_loss(t, &z, v)?;
                Ok(ReconVars {
                    z,
                    beta: Vec::new(),
                    loss,
                    global_term: Some(loss),
                    local_term: None,
                })
            }
            (Variant::Local(l), ReconKind::Local) => {
                let (z, beta) = self.run_local(t, l, hidden, v.frames())?;
                let loss = local_loss(t, &z, v, self.cfg.local_valid_only)?;
                Ok(ReconVars {
                    z,
                    beta,
                    loss,
                    global_term: None,
                    local_term: Some(loss),
                })
            }
            (Variant::Local(l), _) => {
                let (z, beta) = self.run_local(t, l, hidden, v.frames())?;
                let (loss, g, lt) = joint_loss(t, &z, v, self.cfg.local_valid_only)?;
                Ok(ReconVars {
                    z,
                    beta,
                    loss,
                    global_term: Some(g),
                    local_term: Some(lt),
                })
            }
        }
    }

    fn run_global(&self, t: &mut Tape<'_>, p: &GlobalReconParams, hidden: &[Var]) -> Result<Vec<Var>> {
        let r = self.cfg.recon_hidden();
        let pooled = t.mean_pool(hidden)?;
        let w = t.param(p.lstm_w);
        let mut z = t.constant(Tensor::zeros(&[r]));
        let mut mem = t.constant(Tensor::zeros(&[r]));
        let mut out = Vec::with_capacity(hidden.len());
        for &h in hidden {
            let input = t.concat(&[h, z, pooled])?;
            let (zn, mn) = lstm_cell(t, w, None, input, mem, r)?;
            out.push(zn);
            z = zn;
            mem = mn;
        }
        Ok(out)
    }

    /// Attention over decoder states given the previous reconstructor state.
    pub fn attend(&self, t: &mut Tape<'_>, hidden_mat: Var, hidden_proj: Var, z_prev: Var) -> Result<(Var, Var)> {
        let p = self.local_params().ok_or(Error::Config("global reconstructor has no attention".into()))?;
        let w_zr = t.param(p.w_zr);
        let b_r = t.param(p.b_r);
        let w_beta = t.param(p.w_beta);
        let q = t.matmul(z_prev, w_zr)?;
        let q = t.add(q, b_r)?;
        let pre = t.add_row_bias(hidden_proj, q)?;
        let act = t.tanh(pre);
        let scores = t.matvec(act, w_beta)?;
        let beta = t.softmax(scores)?;
        let mu = t.matmul(beta, hidden_mat)?;
        Ok((beta, mu))
    }

    /// Stacks the decoder states and projects them once for attention.
    pub fn project_hidden(&self, t: &mut Tape<'_>, hidden: &[Var]) -> Result<(Var, Var)> {
        let p = self.local_params().ok_or(Error::Config("global reconstructor has no attention".into()))?;
        let hidden_mat = t.stack(hidden)?;
        let w_hr = t.param(p.w_hr);
        let proj = t.matmul(hidden_mat, w_hr)?;
        Ok((hidden_mat, proj))
    }

    fn run_local(
        &self,
        t: &mut Tape<'_>,
        p: &LocalReconParams,
        hidden: &[Var],
        steps: usize,
    ) -> Result<(Vec<Var>, Vec<Var>)> {
        let r = self.cfg.recon_hidden();
        let (hidden_mat, proj) = self.project_hidden(t, hidden)?;
        let w = t.param(p.lstm_w);
        let mut z = t.constant(Tensor::zeros(&[r]));
        let mut mem = t.constant(Tensor::zeros(&[r]));
        let mut zs = Vec::with_capacity(steps);
        let mut betas = Vec::with_capacity(steps);
        for _ in 0..steps {
            let (beta, mu) = self.attend(t, hidden_mat, proj, z)?;
            let input = t.concat(&[mu, z])?;
            let (zn, mn) = lstm_cell(t, w, None, input, mem, r)?;
            zs.push(zn);
            betas.push(beta);
            z = zn;
            mem = mn;
        }
        Ok((zs, betas))
    }
}

/// `ψ(mean(V_valid), mean(Z))`.
pub fn global_loss(t: &mut Tape<'_>, z: &[Var], v: &SampledFeatures) -> Result<Var> {
    let target = t.constant(Tensor::vector(v.valid_mean()));
    let pooled = t.mean_pool(z)?;
    t.sq_euclidean(target, pooled)
}

/// `(1/m) Σ_j ψ(z_j, v_j)` over all `m` frames, or over the valid ones.
pub fn local_loss(t: &mut Tape<'_>, z: &[Var], v: &SampledFeatures, valid_only: bool) -> Result<Var> {
    if z.len() != v.frames() {
        return Err(Error::shape("local_loss", &[z.len()], &[v.frames()]));
    }
    let m = if valid_only { v.valid_count } else { v.frames() };
    let mut terms = Vec::with_capacity(m);
    for (j, &zj) in z.iter().enumerate().take(m) {
        let target = t.constant(Tensor::vector(v.row(j).to_vec()));
        terms.push(t.sq_euclidean(zj, target)?);
    }
    let total = t.add_n(&terms)?;
    Ok(t.scale(total, 1.0 / m as f64))
}

/// Global term on the reconstructed valid frames plus the local term.
/// Returns `(total, global, local)`.
pub fn joint_loss(t: &mut Tape<'_>, z: &[Var], v: &SampledFeatures, valid_only: bool) -> Result<(Var, Var, Var)> {
    if z.len() != v.frames() {
        return Err(Error::shape("joint_loss", &[z.len()], &[v.frames()]));
    }
    let target = t.constant(Tensor::vector(v.valid_mean()));
    let pooled = t.mean_pool(&z[..v.valid_count])?;
    let global = t.sq_euclidean(pooled, target)?;
    let local = local_loss(t, z, v, valid_only)?;
    let total = t.add(global, local)?;
    Ok((total, global, local))
}
