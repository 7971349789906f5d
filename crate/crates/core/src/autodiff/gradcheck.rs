//! Central finite-difference gradient checks.
//!
//! Only forward values are used to form the numeric estimate, so these
//! checks stay independent of the reverse pass they validate.

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub eps: f64,
    pub rel: f64,
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eps: 1e-4,
            rel: 1e-4,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EntryCheck {
    pub label: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl EntryCheck {
    pub fn abs_error(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    pub fn rel_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.abs_error() / scale
        }
    }

    pub fn passes(&self, tol: &Tolerance) -> bool {
        self.abs_error() <= tol.abs_floor || self.rel_error() <= tol.rel
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub entries: Vec<EntryCheck>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: &Tolerance) -> bool {
        self.entries.iter().all(|e| e.passes(tol))
    }

    pub fn failures(&self, tol: &Tolerance) -> Vec<&EntryCheck> {
        self.entries.iter().filter(|e| !e.passes(tol)).collect()
    }

    /// Largest relative error among entries above the absolute floor.
    pub fn worst_rel_error(&self, tol: &Tolerance) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.abs_error() > tol.abs_floor)
            .map(EntryCheck::rel_error)
            .fold(0.0, f64::max)
    }

    pub fn any_nonzero_analytic(&self) -> bool {
        self.entries.iter().any(|e| e.analytic != 0.0)
    }
}

/// Checks d(loss)/d(input) for free leaves built from `inputs`.
pub fn check_leaves<F>(inputs: &[Tensor], build: F, tol: &Tolerance) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'static>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| t.leaf(x.clone())).collect();
        let loss = build(&mut t, &vars)?;
        Ok(t.scalar(loss))
    };

    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| t.leaf(x.clone())).collect();
    let loss = build(&mut t, &vars)?;
    let grads = t.backward(loss)?;

    let mut report = GradCheckReport::default();
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).map(<[f64]>::to_vec);
        for i in 0..input.len() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] += tol.eps;
            let up = eval(&xs)?;
            xs[k].data_mut()[i] -= 2.0 * tol.eps;
            let down = eval(&xs)?;
            report.entries.push(EntryCheck {
                label: format!("input{k}"),
                index: i,
                analytic: analytic.as_ref().map_or(0.0, |g| g[i]),
                numeric: (up - down) / (2.0 * tol.eps),
            });
        }
    }
    Ok(report)
}

/// Checks parameter gradients of `build` against finite differences.
///
/// At most `per_param` entries of each parameter are probed, spread evenly
/// over its elements.
pub fn check_params<F>(
    store: &ParamStore,
    ids: &[ParamId],
    per_param: usize,
    build: F,
    tol: &Tolerance,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var>,
{
    let grads = {
        let mut t = Tape::with_params(store);
        let loss = build(&mut t)?;
        t.backward(loss)?
    };

    let mut probe = store.clone();
    let mut report = GradCheckReport::default();
    for &id in ids {
        let n = store.value(id).len();
        let analytic = grads.param(id).map(<[f64]>::to_vec);
        let take = per_param.min(n).max(1);
        for j in 0..take {
            let i = j * n / take;
            let orig = store.value(id).data()[i];
            let mut eval_at = |x: f64| -> Result<f64> {
                probe.get_mut(id).tensor.value.data_mut()[i] = x;
                let mut t = Tape::with_params(&probe);
                let loss = build(&mut t)?;
                Ok(t.scalar(loss))
            };
            let up = eval_at(orig + tol.eps)?;
            let down = eval_at(orig - tol.eps)?;
            probe.get_mut(id).tensor.value.data_mut()[i] = orig;
            report.entries.push(EntryCheck {
                label: store.get(id).name.clone(),
                index: i,
                analytic: analytic.as_ref().map_or(0.0, |g| g[i]),
                numeric: (up - down) / (2.0 * tol.eps),
            });
        }
    }
    Ok(report)
}
