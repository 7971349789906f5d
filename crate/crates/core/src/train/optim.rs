use crate::autodiff::ParamStore;

use super::config::OptimizerSpec;

#[derive(Clone, Debug, Default)]
struct Slot {
    a: Vec<f64>,
    b: Vec<f64>,
    steps: u64,
}

/// First-order optimizer with per-parameter state.
///
/// Parameters whose gradient slot is empty are left untouched and their
/// state does not advance.
#[derive(Clone, Debug)]
pub struct Optimizer {
    spec: OptimizerSpec,
    slots: Vec<Option<Slot>>,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec) -> Self {
        Optimizer {
            spec,
            slots: Vec::new(),
        }
    }

    pub fn spec(&self) -> OptimizerSpec {
        self.spec
    }

    /// Applies one update from the gradients held in `store`.
    pub fn step(&mut self, store: &mut ParamStore) {
        if self.slots.len() < store.len() {
            self.slots.resize(store.len(), None);
        }
        for (id, p) in store.iter_mut() {
            let Some(g) = p.tensor.grad.as_ref() else { continue };
            let n = g.len();
            let slot = self.slots[id.index()].get_or_insert_with(|| Slot {
                a: vec![0.0; n],
                b: vec![0.0; n],
                steps: 0,
            });
            slot.steps += 1;
            let w = p.tensor.value.data_mut();
            match self.spec {
                OptimizerSpec::AdaDelta { rho, eps } => {
                    // a: running E[g²], b: running E[Δx²]
                    for i in 0..n {
                        slot.a[i] = rho * slot.a[i] + (1.0 - rho) * g[i] * g[i];
                        let dx = -((slot.b[i] + eps).sqrt() / (slot.a[i] + eps).sqrt()) * g[i];
                        slot.b[i] = rho * slot.b[i] + (1.0 - rho) * dx * dx;
                        w[i] += dx;
                    }
                }
                OptimizerSpec::Adam { lr, beta1, beta2, eps } => {
                    // a: first moment, b: second moment
                    let t = slot.steps as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..n {
                        slot.a[i] = beta1 * slot.a[i] + (1.0 - beta1) * g[i];
                        slot.b[i] = beta2 * slot.b[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = slot.a[i] / c1;
                        let v_hat = slot.b[i] / c2;
                        w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
