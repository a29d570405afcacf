use super::{AnnotatedGraph, Edge, EdgeType};

/// Which of the two acyclic subgraphs to walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Backward];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }
}

/// Incoming edge at a node: source index and edge type.
pub type Incoming = (usize, EdgeType);

/// The split of a graph's edges into a forward DAG (`src < dst`) and a
/// backward DAG (`src > dst`), with per-node incoming sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagDecomposition {
    len: usize,
    pub forward_edges: Vec<Edge>,
    pub backward_edges: Vec<Edge>,
    /// `incoming_fwd[t]` lists `(t', e)` for every forward edge `t' -> t`,
    /// sorted by source then type.
    pub incoming_fwd: Vec<Vec<Incoming>>,
    pub incoming_bwd: Vec<Vec<Incoming>>,
}

impl DagDecomposition {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn edges(&self, dir: Direction) -> &[Edge] {
        match dir {
            Direction::Forward => &self.forward_edges,
            Direction::Backward => &self.backward_edges,
        }
    }

    pub fn incoming(&self, dir: Direction, t: usize) -> &[Incoming] {
        match dir {
            Direction::Forward => &self.incoming_fwd[t],
            Direction::Backward => &self.incoming_bwd[t],
        }
    }

    /// Node indices in the direction's topological order.
    pub fn order(&self, dir: Direction) -> Vec<usize> {
        match dir {
            Direction::Forward => (0..self.len).collect(),
            Direction::Backward => (0..self.len).rev().collect(),
        }
    }

    /// Node visited just before `t` in the direction's order.
    pub fn previous(&self, dir: Direction, t: usize) -> Option<usize> {
        match dir {
            Direction::Forward => t.checked_sub(1),
            Direction::Backward => (t + 1 < self.len).then_some(t + 1),
        }
    }

    /// Distinct edge types present in one direction, ascending.
    pub fn types(&self, dir: Direction) -> Vec<EdgeType> {
        let mut v: Vec<EdgeType> = self.edges(dir).iter().map(|e| e.kind).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// True iff no node has two incoming edges of the same type in either
    /// direction.
    pub fn is_chain_decomposable(&self) -> bool {
        [&self.incoming_fwd, &self.incoming_bwd].iter().all(|sets| {
            sets.iter().all(|inc| {
                let mut kinds: Vec<EdgeType> = inc.iter().map(|&(_, e)| e).collect();
                kinds.sort_unstable();
                kinds.windows(2).all(|w| w[0] != w[1])
            })
        })
    }
}

/// Splits `g.all_edges` by index order and builds the incoming maps.
pub fn decompose(g: &AnnotatedGraph) -> DagDecomposition {
    let n = g.len();
    let mut d = DagDecomposition {
        len: n,
        forward_edges: Vec::new(),
        backward_edges: Vec::new(),
        incoming_fwd: vec![Vec::new(); n],
        incoming_bwd: vec![Vec::new(); n],
    };
    for &e in &g.all_edges {
        assert_ne!(e.src, e.dst, "self loop survived graph construction");
        if e.src < e.dst {
            d.forward_edges.push(e);
            d.incoming_fwd[e.dst].push((e.src, e.kind));
        } else {
            d.backward_edges.push(e);
            d.incoming_bwd[e.dst].push((e.src, e.kind));
        }
    }
    for inc in d.incoming_fwd.iter_mut().chain(d.incoming_bwd.iter_mut()) {
        inc.sort_unstable();
    }
    d
}
