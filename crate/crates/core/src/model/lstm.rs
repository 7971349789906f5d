use crate::autodiff::{Tape, Var};
use crate::error::Result;

/// Hidden and memory-cell values of an LSTM between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub mem: Vec<f64>,
}

impl LstmState {
    pub fn zeros(size: usize) -> Self {
        LstmState {
            h: vec![0.0; size],
            mem: vec![0.0; size],
        }
    }
}

/// One LSTM step over a concatenated input.
///
/// `weight` maps the input to `4 * size` pre-activations laid out as
/// input, forget, output and candidate gates.
pub(crate) fn lstm_cell(
    t: &mut Tape<'_>,
    weight: Var,
    bias: Option<Var>,
    input: Var,
    mem_prev: Var,
    size: usize,
) -> Result<(Var, Var)> {
    let mut pre = t.matmul(input, weight)?;
    if let Some(b) = bias {
        pre = t.add(pre, b)?;
    }
    let i = t.slice(pre, 0, size)?;
    let f = t.slice(pre, size, size)?;
    let o = t.slice(pre, 2 * size, size)?;
    let g = t.slice(pre, 3 * size, size)?;
    let i = t.sigmoid(i);
    let f = t.sigmoid(f);
    let o = t.sigmoid(o);
    let g = t.tanh(g);
    let keep = t.hadamard(f, mem_prev)?;
    let write = t.hadamard(i, g)?;
    let mem = t.add(keep, write)?;
    let squashed = t.tanh(mem);
    let h = t.hadamard(o, squashed)?;
    Ok((h, mem))
}
