use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tensor};
use crate::graph::{Direction, EdgeType, EdgeTypeRegistry};

use super::CellError;

/// Per-edge-type state widths for one direction, kept in registry order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeDimSplit {
    entries: Vec<(EdgeType, usize)>,
}

impl EdgeDimSplit {
    pub fn new(mut entries: Vec<(EdgeType, usize)>) -> Result<Self, CellError> {
        if entries.is_empty() {
            return Err(CellError::Config("dimension split has no edge types".into()));
        }
        entries.sort_by_key(|&(e, _)| e);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(CellError::Config(format!("edge type {} listed twice", w[0].0)));
            }
        }
        if let Some(&(e, _)) = entries.iter().find(|&&(_, d)| d == 0) {
            return Err(CellError::Config(format!("edge type {e} has zero width")));
        }
        Ok(EdgeDimSplit { entries })
    }

    pub fn entries(&self) -> &[(EdgeType, usize)] {
        &self.entries
    }

    pub fn types(&self) -> impl Iterator<Item = EdgeType> + '_ {
        self.entries.iter().map(|&(e, _)| e)
    }

    pub fn dim(&self, e: EdgeType) -> Option<usize> {
        self.entries.iter().find(|&&(t, _)| t == e).map(|&(_, d)| d)
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|&(_, d)| d).sum()
    }
}

/// `[r, z, h]` gate parameters.
pub type Gates = [ParamId; 3];

pub(crate) const GATES: [&str; 3] = ["r", "z", "h"];

/// One state slot: a per-type state in split mode, or the single tied
/// state in shared mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub dim: usize,
    pub w: Gates,
    pub b: Gates,
}

/// Recurrence parameters for one direction of one layer.
///
/// In split mode there is one slot per edge type and `u[i][j]` maps slot
/// `j`'s state into slot `i`. In shared mode every edge type reads and
/// writes the single slot 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionParams {
    pub direction: Direction,
    pub d_in: usize,
    pub shared: bool,
    pub slots: Vec<Slot>,
    pub u: Vec<Vec<Gates>>,
    /// Edge type to slot index.
    type_slots: Vec<(EdgeType, usize)>,
}

fn init_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

impl DirectionParams {
    /// Split-mode parameters with one hidden state per type of `split`.
    pub fn split<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        direction: Direction,
        d_in: usize,
        split: &EdgeDimSplit,
        registry: &EdgeTypeRegistry,
        rng: &mut R,
    ) -> Result<Self, CellError> {
        let slots: Vec<(String, usize)> = split
            .entries()
            .iter()
            .map(|&(e, d)| (registry.name(e).to_string(), d))
            .collect();
        let type_slots = split.types().enumerate().map(|(i, e)| (e, i)).collect();
        Self::build(store, prefix, direction, d_in, &slots, type_slots, false, rng)
    }

    /// Shared-mode parameters: all of `types` tie one state of width `dim`.
    #[allow(clippy::too_many_arguments)]
    pub fn shared<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        direction: Direction,
        d_in: usize,
        types: &[EdgeType],
        dim: usize,
        rng: &mut R,
    ) -> Result<Self, CellError> {
        if dim == 0 || types.is_empty() {
            return Err(CellError::Config("shared state needs a positive width and at least one type".into()));
        }
        let type_slots = types.iter().map(|&e| (e, 0)).collect();
        Self::build(store, prefix, direction, d_in, &[("shared".into(), dim)], type_slots, true, rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn build<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        direction: Direction,
        d_in: usize,
        slots: &[(String, usize)],
        type_slots: Vec<(EdgeType, usize)>,
        shared: bool,
        rng: &mut R,
    ) -> Result<Self, CellError> {
        if d_in == 0 {
            return Err(CellError::Config("input width must be positive".into()));
        }
        let base = format!("{prefix}.{}", direction.name());
        let mut built = Vec::with_capacity(slots.len());
        for (name, dim) in slots {
            let mut w = Vec::with_capacity(3);
            let mut b = Vec::with_capacity(3);
            for g in GATES {
                w.push(store.add(format!("{base}.W_{g}.{name}"), init_uniform(rng, *dim, d_in))?);
                b.push(store.add(format!("{base}.b_{g}.{name}"), Tensor::zeros(&[*dim]))?);
            }
            built.push(Slot {
                name: name.clone(),
                dim: *dim,
                w: [w[0], w[1], w[2]],
                b: [b[0], b[1], b[2]],
            });
        }
        let mut u = Vec::with_capacity(slots.len());
        for (name, dim) in slots {
            let mut row = Vec::with_capacity(slots.len());
            for (src_name, src_dim) in slots {
                let mut g3 = Vec::with_capacity(3);
                for g in GATES {
                    g3.push(store.add(
                        format!("{base}.U_{g}.{name}.{src_name}"),
                        init_uniform(rng, *dim, *src_dim),
                    )?);
                }
                row.push([g3[0], g3[1], g3[2]]);
            }
            u.push(row);
        }
        Ok(DirectionParams {
            direction,
            d_in,
            shared,
            slots: built,
            u,
            type_slots,
        })
    }

    pub fn width(&self) -> usize {
        self.slots.iter().map(|s| s.dim).sum()
    }

    /// Slot fed by edges of type `e`.
    pub fn slot_of(&self, e: EdgeType) -> Option<usize> {
        self.type_slots.iter().find(|&&(t, _)| t == e).map(|&(_, s)| s)
    }

    pub fn edge_types(&self) -> impl Iterator<Item = EdgeType> + '_ {
        self.type_slots.iter().map(|&(e, _)| e)
    }

    /// Offset of each slot inside the concatenated output.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.slots
            .iter()
            .map(|s| {
                let o = acc;
                acc += s.dim;
                o
            })
            .collect()
    }
}

/// Forward and backward parameters of one bidirectional layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerParams {
    pub forward: DirectionParams,
    pub backward: DirectionParams,
}

impl LayerParams {
    pub fn direction(&self, dir: Direction) -> &DirectionParams {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    pub fn d_in(&self) -> usize {
        self.forward.d_in
    }

    pub fn width(&self) -> usize {
        self.forward.width() + self.backward.width()
    }
}

/// How the per-direction state is laid out for every layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateLayout {
    /// One state per edge type.
    Split {
        forward: EdgeDimSplit,
        backward: EdgeDimSplit,
    },
    /// One tied state of width `dim` for all listed types.
    Shared {
        forward: Vec<EdgeType>,
        backward: Vec<EdgeType>,
        dim: usize,
    },
}

impl StateLayout {
    /// A plain bidirectional GRU: only sequential edges, one state each way.
    pub fn plain(dim: usize) -> Result<Self, CellError> {
        Ok(StateLayout::Split {
            forward: EdgeDimSplit::new(vec![(EdgeType::SEQ, dim)])?,
            backward: EdgeDimSplit::new(vec![(EdgeType::SEQ_INV, dim)])?,
        })
    }

    /// Sequential plus one relation type, e.g. `coref`, with separate widths.
    pub fn with_relation(
        registry: &EdgeTypeRegistry,
        relation: EdgeType,
        seq_dim: usize,
        rel_dim: usize,
    ) -> Result<Self, CellError> {
        let inv = registry.partner(relation);
        Ok(StateLayout::Split {
            forward: EdgeDimSplit::new(vec![(EdgeType::SEQ, seq_dim), (relation, rel_dim)])?,
            backward: EdgeDimSplit::new(vec![(EdgeType::SEQ_INV, seq_dim), (inv, rel_dim)])?,
        })
    }

    pub fn shared_with_relation(registry: &EdgeTypeRegistry, relation: EdgeType, dim: usize) -> Self {
        StateLayout::Shared {
            forward: vec![EdgeType::SEQ, relation],
            backward: vec![EdgeType::SEQ_INV, registry.partner(relation)],
            dim,
        }
    }

    pub fn direction_width(&self, dir: Direction) -> usize {
        match self {
            StateLayout::Split { forward, backward } => match dir {
                Direction::Forward => forward.total(),
                Direction::Backward => backward.total(),
            },
            StateLayout::Shared { dim, .. } => *dim,
        }
    }

    /// Allocates one layer's parameters under `prefix`.
    pub fn build_layer<R: Rng>(
        &self,
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        registry: &EdgeTypeRegistry,
        rng: &mut R,
    ) -> Result<LayerParams, CellError> {
        let fwd = self.direction_width(Direction::Forward);
        let bwd = self.direction_width(Direction::Backward);
        if fwd != bwd {
            return Err(CellError::WidthMismatch {
                what: "forward and backward state widths",
                left: fwd,
                right: bwd,
            });
        }
        let (forward, backward) = match self {
            StateLayout::Split { forward, backward } => (
                DirectionParams::split(store, prefix, Direction::Forward, d_in, forward, registry, rng)?,
                DirectionParams::split(store, prefix, Direction::Backward, d_in, backward, registry, rng)?,
            ),
            StateLayout::Shared { forward, backward, dim } => (
                DirectionParams::shared(store, prefix, Direction::Forward, d_in, forward, *dim, rng)?,
                DirectionParams::shared(store, prefix, Direction::Backward, d_in, backward, *dim, rng)?,
            ),
        };
        Ok(LayerParams { forward, backward })
    }

    /// Allocates `layers` stacked layers; layer k+1 reads layer k's output.
    pub fn build_stack<R: Rng>(
        &self,
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        layers: usize,
        registry: &EdgeTypeRegistry,
        rng: &mut R,
    ) -> Result<Vec<LayerParams>, CellError> {
        if layers == 0 {
            return Err(CellError::Config("layer count must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(layers);
        let mut width = d_in;
        for k in 0..layers {
            let layer = self.build_layer(store, &format!("{prefix}.{k}"), width, registry, rng)?;
            width = layer.width();
            out.push(layer);
        }
        Ok(out)
    }
}
