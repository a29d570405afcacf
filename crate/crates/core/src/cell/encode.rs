use crate::autodiff::{ParamStore, Tape, Var};
use crate::graph::{DagDecomposition, Direction};

use super::{CellContext, CellError, DirectionParams, LayerParams, MemoryBank};

/// Which update drives the walk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepPath {
    /// Per-type updates with summed incoming contributions.
    #[default]
    General,
    /// The stacked single-GRU update over the memory vector; only valid on
    /// chain-decomposable DAGs with split states.
    Chain,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    pub path: StepPath,
    /// Interpolate against the same-type memory state instead of the state
    /// at the previous position of the walk.
    pub interpolate_with_memory: bool,
}

/// Output of one directional walk.
#[derive(Clone, Debug)]
pub struct DirectionOutput {
    /// Concatenated slot states, indexed by node (not by visit order).
    pub rows: Vec<Var>,
    pub bank: MemoryBank,
    /// Number of step calls made.
    pub steps: usize,
}

/// Walks one DAG of `decomp` in its topological order, touching every
/// node once.
pub fn encode_direction(
    tape: &mut Tape,
    store: &ParamStore,
    params: &DirectionParams,
    decomp: &DagDecomposition,
    inputs: &[Var],
    opts: EncodeOptions,
) -> Result<DirectionOutput, CellError> {
    let n = decomp.len();
    if inputs.len() != n {
        return Err(CellError::WidthMismatch {
            what: "input count vs node count",
            left: inputs.len(),
            right: n,
        });
    }
    let dir = params.direction;
    let ctx = CellContext::new(tape, store, params, opts.interpolate_with_memory);
    let stacked = match opts.path {
        StepPath::General => None,
        StepPath::Chain => Some(ctx.stacked(tape)?),
    };
    let mut bank = MemoryBank::new(n);
    let mut rows: Vec<Option<Var>> = vec![None; n];
    let mut state = ctx.initial_state();
    let mut prev_out = match opts.path {
        StepPath::Chain if params.slots.len() > 1 => Some(tape.concat(&state.h, 0)?),
        StepPath::Chain => Some(state.h[0]),
        StepPath::General => None,
    };
    let mut steps = 0;
    for t in decomp.order(dir) {
        let incoming = decomp.incoming(dir, t);
        let (next, out) = match &stacked {
            None => {
                let (next, _) = ctx.step_general(tape, t, inputs[t], incoming, &bank, &state)?;
                let out = ctx.concat_output(tape, &next)?;
                (next, out)
            }
            Some(sp) => {
                let g = ctx.assemble_memory(tape, t, incoming, &bank)?;
                let h_prev = prev_out.expect("chain path keeps the previous output");
                let (next, out) = ctx.step_chain(tape, sp, t, inputs[t], g, h_prev)?;
                prev_out = Some(out);
                (next, out)
            }
        };
        steps += 1;
        bank.record(t, &next, out);
        rows[t] = Some(out);
        state = next;
    }
    Ok(DirectionOutput {
        rows: rows.into_iter().map(|r| r.expect("every node visited")).collect(),
        bank,
        steps,
    })
}

/// Bidirectional output: row `t` is `H_f[t] ∥ H_b[t]`.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub rows: Vec<Var>,
    pub forward: Vec<Var>,
    pub backward: Vec<Var>,
    pub steps: [usize; 2],
}

impl Encoded {
    /// Stacks the rows into a `T × width` matrix.
    pub fn matrix(&self, tape: &mut Tape) -> Result<Var, CellError> {
        Ok(tape.stack(&self.rows)?)
    }
}

pub fn encode_bidirectional(
    tape: &mut Tape,
    store: &ParamStore,
    layer: &LayerParams,
    decomp: &DagDecomposition,
    inputs: &[Var],
    opts: EncodeOptions,
) -> Result<Encoded, CellError> {
    if layer.forward.direction != Direction::Forward || layer.backward.direction != Direction::Backward {
        return Err(CellError::Config("layer directions are swapped".into()));
    }
    if layer.forward.width() != layer.backward.width() {
        return Err(CellError::WidthMismatch {
            what: "forward and backward state widths",
            left: layer.forward.width(),
            right: layer.backward.width(),
        });
    }
    let fwd = encode_direction(tape, store, &layer.forward, decomp, inputs, opts)?;
    let bwd = encode_direction(tape, store, &layer.backward, decomp, inputs, opts)?;
    let rows = fwd
        .rows
        .iter()
        .zip(&bwd.rows)
        .map(|(&f, &b)| tape.concat(&[f, b], 0))
        .collect::<Result<_, _>>()?;
    Ok(Encoded {
        rows,
        forward: fwd.rows,
        backward: bwd.rows,
        steps: [fwd.steps, bwd.steps],
    })
}

/// Runs the layers in sequence over the same DAG, feeding each layer's
/// bidirectional output to the next.
pub fn stack_layers(
    tape: &mut Tape,
    store: &ParamStore,
    layers: &[LayerParams],
    decomp: &DagDecomposition,
    inputs: &[Var],
    opts: EncodeOptions,
) -> Result<Encoded, CellError> {
    let (first, rest) = layers
        .split_first()
        .ok_or_else(|| CellError::Config("layer count must be at least 1".into()))?;
    let mut out = encode_bidirectional(tape, store, first, decomp, inputs, opts)?;
    let mut width = first.width();
    for layer in rest {
        if layer.d_in() != width {
            return Err(CellError::WidthMismatch {
                what: "layer input vs previous layer output",
                left: layer.d_in(),
                right: width,
            });
        }
        let next = encode_bidirectional(tape, store, layer, decomp, &out.rows, opts)?;
        out = Encoded {
            steps: [out.steps[0] + next.steps[0], out.steps[1] + next.steps[1]],
            ..next
        };
        width = layer.width();
    }
    Ok(out)
}
