use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::graph::Incoming;

use super::{CellError, DirectionParams};

/// Hidden states of every slot after processing node `t`.
#[derive(Clone, Debug)]
pub struct StepState {
    /// Node index of the step; `None` for the zero initial state.
    pub t: Option<usize>,
    pub h: Vec<Var>,
}

/// Gate activations of one slot, kept for inspection.
#[derive(Clone, Copy, Debug)]
pub struct GateTrace {
    pub r: Var,
    pub z: Var,
    pub candidate: Var,
}

/// Outputs of every node processed so far, by node index, plus the
/// concatenated outputs in processing order.
#[derive(Clone, Debug, Default)]
pub struct MemoryBank {
    states: Vec<Option<Vec<Var>>>,
    pub history: Vec<Var>,
}

impl MemoryBank {
    pub fn new(nodes: usize) -> Self {
        MemoryBank {
            states: vec![None; nodes],
            history: Vec::with_capacity(nodes),
        }
    }

    pub fn record(&mut self, t: usize, state: &StepState, output: Var) {
        self.states[t] = Some(state.h.clone());
        self.history.push(output);
    }

    pub fn state(&self, t: usize) -> Option<&[Var]> {
        self.states.get(t).and_then(|s| s.as_deref())
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }
}

/// Stacked `[r, z, h]` parameters of the combined chain update: input
/// matrices `Σd × d_in`, recurrence `Σd × Σd` with `U^{e,e'}` at block
/// `(e, e')`, and biases `Σd`.
#[derive(Clone, Copy, Debug)]
pub struct StackedParams {
    pub w: [Var; 3],
    pub u: [Var; 3],
    pub b: [Var; 3],
}

/// One direction's parameters placed on a tape, plus zero constants.
pub struct CellContext<'p> {
    pub params: &'p DirectionParams,
    w: Vec<[Var; 3]>,
    b: Vec<[Var; 3]>,
    u: Vec<Vec<[Var; 3]>>,
    zeros: Vec<Var>,
    interpolate_with_memory: bool,
}

fn on_tape(tape: &mut Tape, store: &ParamStore, ids: &[crate::autodiff::ParamId; 3]) -> [Var; 3] {
    [tape.param(store, ids[0]), tape.param(store, ids[1]), tape.param(store, ids[2])]
}

impl<'p> CellContext<'p> {
    pub fn new(
        tape: &mut Tape,
        store: &ParamStore,
        params: &'p DirectionParams,
        interpolate_with_memory: bool,
    ) -> Self {
        let w = params.slots.iter().map(|s| on_tape(tape, store, &s.w)).collect();
        let b = params.slots.iter().map(|s| on_tape(tape, store, &s.b)).collect();
        let u = params
            .u
            .iter()
            .map(|row| row.iter().map(|ids| on_tape(tape, store, ids)).collect())
            .collect();
        let zeros = params
            .slots
            .iter()
            .map(|s| tape.input(Tensor::zeros(&[s.dim])))
            .collect();
        CellContext {
            params,
            w,
            b,
            u,
            zeros,
            interpolate_with_memory,
        }
    }

    /// The all-zero state used before the first node.
    pub fn initial_state(&self) -> StepState {
        StepState {
            t: None,
            h: self.zeros.clone(),
        }
    }

    fn check_input(&self, tape: &Tape, x: Var) -> Result<(), CellError> {
        let shape = tape.value(x).shape();
        if shape != [self.params.d_in] {
            return Err(CellError::WidthMismatch {
                what: "input",
                left: shape.iter().product(),
                right: self.params.d_in,
            });
        }
        Ok(())
    }

    /// Resolves each incoming edge to (source slot, source state).
    fn sources(
        &self,
        incoming: &[Incoming],
        bank: &MemoryBank,
    ) -> Result<Vec<(usize, Var)>, CellError> {
        incoming
            .iter()
            .map(|&(src, e)| {
                let slot = self.params.slot_of(e).ok_or(CellError::MissingType(e))?;
                let state = bank.state(src).ok_or(CellError::Unprocessed(src))?;
                Ok((slot, state[slot]))
            })
            .collect()
    }

    /// General typed update: each slot's gates read the input and the sum
    /// of `U^{e,e'} h^{e'}_{t'}` over all incoming edges `(t', e')`, and
    /// interpolate against `prev`, the state at the previous position of
    /// the walk.
    pub fn step_general(
        &self,
        tape: &mut Tape,
        t: usize,
        x: Var,
        incoming: &[Incoming],
        bank: &MemoryBank,
        prev: &StepState,
    ) -> Result<(StepState, Vec<GateTrace>), CellError> {
        self.check_input(tape, x)?;
        let sources = self.sources(incoming, bank)?;
        let mut h = Vec::with_capacity(self.params.slots.len());
        let mut trace = Vec::with_capacity(self.params.slots.len());
        for slot in 0..self.params.slots.len() {
            let mut pre = Vec::with_capacity(3);
            let mut recur = Vec::with_capacity(3);
            for g in 0..3 {
                pre.push(tape.matvec(self.w[slot][g], x)?);
                let terms: Vec<Var> = sources
                    .iter()
                    .map(|&(src_slot, hs)| tape.matvec(self.u[slot][src_slot][g], hs))
                    .collect::<Result<_, _>>()?;
                recur.push(if terms.is_empty() { None } else { Some(tape.add_n(&terms)?) });
            }
            let r_pre = self.with_recurrence(tape, pre[0], recur[0], slot, 0)?;
            let r = tape.sigmoid(r_pre);
            let z_pre = self.with_recurrence(tape, pre[1], recur[1], slot, 1)?;
            let z = tape.sigmoid(z_pre);
            let gated = match recur[2] {
                Some(uh) => Some(tape.hadamard(r, uh)?),
                None => None,
            };
            let h_pre = self.with_recurrence(tape, pre[2], gated, slot, 2)?;
            let candidate = tape.tanh(h_pre);

            let anchor = if self.interpolate_with_memory {
                let same: Vec<Var> = sources
                    .iter()
                    .filter(|&&(s, _)| s == slot)
                    .map(|&(_, v)| v)
                    .collect();
                if same.is_empty() {
                    self.zeros[slot]
                } else {
                    tape.add_n(&same)?
                }
            } else {
                prev.h[slot]
            };
            h.push(interpolate(tape, anchor, candidate, z)?);
            trace.push(GateTrace { r, z, candidate });
        }
        Ok((StepState { t: Some(t), h }, trace))
    }

    fn with_recurrence(
        &self,
        tape: &mut Tape,
        wx: Var,
        recur: Option<Var>,
        slot: usize,
        gate: usize,
    ) -> Result<Var, CellError> {
        let parts: Vec<Var> = std::iter::once(wx)
            .chain(recur)
            .chain(std::iter::once(self.b[slot][gate]))
            .collect();
        Ok(tape.add_n(&parts)?)
    }

    /// Concatenates slot states in slot (registry) order.
    pub fn concat_output(&self, tape: &mut Tape, state: &StepState) -> Result<Var, CellError> {
        if state.h.len() != self.params.slots.len() {
            return Err(CellError::MissingState {
                have: state.h.len(),
                want: self.params.slots.len(),
            });
        }
        if state.h.len() == 1 {
            return Ok(state.h[0]);
        }
        Ok(tape.concat(&state.h, 0)?)
    }

    /// Block-places the per-type parameters into the stacked matrices of
    /// the combined update. Built from the tape's parameter nodes, so
    /// gradients flow back to the per-type tensors.
    pub fn stacked(&self, tape: &mut Tape) -> Result<StackedParams, CellError> {
        if self.params.shared {
            return Err(CellError::Config("the stacked update needs split states".into()));
        }
        let n = self.params.slots.len();
        let (mut w, mut u, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for g in 0..3 {
            let ws: Vec<Var> = (0..n).map(|s| self.w[s][g]).collect();
            w.push(tape.concat(&ws, 0)?);
            let bs: Vec<Var> = (0..n).map(|s| self.b[s][g]).collect();
            b.push(tape.concat(&bs, 0)?);
            let mut rows = Vec::with_capacity(n);
            for s in 0..n {
                let blocks: Vec<Var> = (0..n).map(|j| self.u[s][j][g]).collect();
                rows.push(tape.concat(&blocks, 1)?);
            }
            u.push(tape.concat(&rows, 0)?);
        }
        Ok(StackedParams {
            w: [w[0], w[1], w[2]],
            u: [u[0], u[1], u[2]],
            b: [b[0], b[1], b[2]],
        })
    }

    /// Memory vector `g_t`: for each slot, the state of the node linked
    /// to `t` by an edge of that slot's type, or zeros.
    pub fn assemble_memory(
        &self,
        tape: &mut Tape,
        t: usize,
        incoming: &[Incoming],
        bank: &MemoryBank,
    ) -> Result<Var, CellError> {
        let mut parts = self.zeros.clone();
        let mut filled = vec![false; parts.len()];
        for (slot, state) in self.sources(incoming, bank)? {
            if filled[slot] {
                return Err(CellError::NotChainDecomposable(t));
            }
            filled[slot] = true;
            parts[slot] = state;
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        Ok(tape.concat(&parts, 0)?)
    }

    /// Combined update `r = σ(W_r x + U_r g + b_r)`, ..., with
    /// `h = (1 − z) ⊙ h_prev + z ⊙ h̃`, sliced back into slot states.
    pub fn step_chain(
        &self,
        tape: &mut Tape,
        stacked: &StackedParams,
        t: usize,
        x: Var,
        g: Var,
        h_prev: Var,
    ) -> Result<(StepState, Var), CellError> {
        self.check_input(tape, x)?;
        let mut pre = Vec::with_capacity(3);
        let mut ug = Vec::with_capacity(3);
        for k in 0..3 {
            pre.push(tape.matvec(stacked.w[k], x)?);
            ug.push(tape.matvec(stacked.u[k], g)?);
        }
        let r_pre = tape.add_n(&[pre[0], ug[0], stacked.b[0]])?;
        let r = tape.sigmoid(r_pre);
        let z_pre = tape.add_n(&[pre[1], ug[1], stacked.b[1]])?;
        let z = tape.sigmoid(z_pre);
        let gated = tape.hadamard(r, ug[2])?;
        let h_pre = tape.add_n(&[pre[2], gated, stacked.b[2]])?;
        let candidate = tape.tanh(h_pre);
        let anchor = if self.interpolate_with_memory { g } else { h_prev };
        let out = interpolate(tape, anchor, candidate, z)?;
        let h = if self.params.slots.len() == 1 {
            vec![out]
        } else {
            let offsets = self.params.offsets();
            self.params
                .slots
                .iter()
                .zip(offsets)
                .map(|(s, o)| tape.slice(out, 0, o, s.dim))
                .collect::<Result<_, _>>()?
        };
        Ok((StepState { t: Some(t), h }, out))
    }
}

/// `(1 − z) ⊙ anchor + z ⊙ candidate`, written as
/// `anchor + z ⊙ (candidate − anchor)`.
fn interpolate(tape: &mut Tape, anchor: Var, candidate: Var, z: Var) -> Result<Var, CellError> {
    let diff = tape.sub(candidate, anchor)?;
    let moved = tape.hadamard(z, diff)?;
    Ok(tape.add(anchor, moved)?)
}
