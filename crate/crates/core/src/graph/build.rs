use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EdgeType, EdgeTypeRegistry, GraphError};

/// A directed, typed edge between two node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeType,
}

impl Edge {
    pub fn new(src: usize, dst: usize, kind: EdgeType) -> Self {
        Edge { src, dst, kind }
    }
}

/// A typed link between position `pos_a` of sequence `seq_a` and position
/// `pos_b` of sequence `seq_b`, directed from a to b.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Relation {
    pub seq_a: usize,
    pub pos_a: usize,
    pub seq_b: usize,
    pub pos_b: usize,
    pub kind: EdgeType,
}

/// Where each input sequence landed in the concatenated index space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.offset + self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= self.offset && i < self.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSequenceLayout {
    /// Indexed by the original sequence number.
    pub segments: Vec<Segment>,
    /// Original sequence numbers in concatenation order.
    pub permutation: Vec<usize>,
}

impl MultiSequenceLayout {
    pub fn from_permutation(lengths: &[usize], permutation: Vec<usize>) -> Self {
        let mut segments = vec![Segment { offset: 0, len: 0 }; lengths.len()];
        let mut offset = 0;
        for &s in &permutation {
            segments[s] = Segment {
                offset,
                len: lengths[s],
            };
            offset += lengths[s];
        }
        MultiSequenceLayout { segments, permutation }
    }

    pub fn num_sequences(&self) -> usize {
        self.segments.len()
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn global(&self, seq: usize, pos: usize) -> usize {
        self.segments[seq].offset + pos
    }

    /// Inverse of [`global`](Self::global).
    pub fn local(&self, index: usize) -> Option<(usize, usize)> {
        self.segments
            .iter()
            .position(|s| s.contains(index))
            .map(|s| (s, index - self.segments[s].offset))
    }
}

/// Token nodes plus typed edges. `all_edges` is `base_edges` followed by
/// the generated inverse of each base edge, in the same order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedGraph {
    pub tokens: Vec<usize>,
    pub base_edges: Vec<Edge>,
    pub all_edges: Vec<Edge>,
}

impl AnnotatedGraph {
    /// Validates `base_edges` and generates their inverses.
    pub fn from_base_edges(
        tokens: Vec<usize>,
        base_edges: Vec<Edge>,
        registry: &EdgeTypeRegistry,
    ) -> Result<Self, GraphError> {
        let n = tokens.len();
        let mut seen = HashSet::with_capacity(base_edges.len());
        for e in &base_edges {
            if e.src >= n || e.dst >= n {
                return Err(GraphError::NodeOutOfRange {
                    index: e.src.max(e.dst),
                    len: n,
                });
            }
            if e.src == e.dst {
                return Err(GraphError::SelfLoop(e.src));
            }
            if !registry.contains(e.kind) {
                return Err(GraphError::UnknownEdgeType(e.kind));
            }
            if registry.is_inverse(e.kind) {
                return Err(GraphError::InverseTypeGiven(registry.name(e.kind).to_string()));
            }
            if !seen.insert(*e) {
                return Err(GraphError::DuplicateEdge(e.src, e.dst, registry.name(e.kind).to_string()));
            }
        }
        let mut all_edges = base_edges.clone();
        all_edges.extend(
            base_edges
                .iter()
                .map(|e| Edge::new(e.dst, e.src, registry.partner(e.kind))),
        );
        Ok(AnnotatedGraph {
            tokens,
            base_edges,
            all_edges,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// How to order the sequences before concatenation.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum SequenceOrder {
    /// Input order (for a document/query pair: document first).
    #[default]
    Natural,
    Given(Vec<usize>),
    /// One uniformly random permutation drawn from this seed.
    Seeded(u64),
}

/// Result of [`build_graph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuiltGraph {
    pub graph: AnnotatedGraph,
    pub layout: MultiSequenceLayout,
    /// Relations whose endpoints were the same token; they are dropped.
    pub dropped_self_links: usize,
}

/// Concatenates `sequences` in the requested order, adds sequential edges
/// inside each segment, maps `relations` to global indices and generates
/// inverse edges.
pub fn build_graph(
    registry: &EdgeTypeRegistry,
    sequences: &[Vec<usize>],
    relations: &[Relation],
    order: &SequenceOrder,
) -> Result<BuiltGraph, GraphError> {
    if sequences.is_empty() {
        return Err(GraphError::NoSequences);
    }
    if let Some(s) = sequences.iter().position(Vec::is_empty) {
        return Err(GraphError::EmptySequence(s));
    }
    let permutation = match order {
        SequenceOrder::Natural => (0..sequences.len()).collect(),
        SequenceOrder::Given(p) => {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            if sorted != (0..sequences.len()).collect::<Vec<_>>() {
                return Err(GraphError::BadPermutation(p.clone()));
            }
            p.clone()
        }
        SequenceOrder::Seeded(seed) => {
            let mut p: Vec<usize> = (0..sequences.len()).collect();
            p.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            p
        }
    };
    let lengths: Vec<usize> = sequences.iter().map(Vec::len).collect();
    let layout = MultiSequenceLayout::from_permutation(&lengths, permutation);

    let mut tokens = Vec::with_capacity(layout.total_len());
    for &s in &layout.permutation {
        tokens.extend_from_slice(&sequences[s]);
    }

    let mut edges = Vec::new();
    for &s in &layout.permutation {
        let seg = layout.segments[s];
        edges.extend((seg.offset..seg.end() - 1).map(|i| Edge::new(i, i + 1, EdgeType::SEQ)));
    }

    let mut dropped = 0;
    for r in relations {
        for (seq, pos) in [(r.seq_a, r.pos_a), (r.seq_b, r.pos_b)] {
            if seq >= sequences.len() || pos >= sequences[seq].len() {
                return Err(GraphError::PositionOutOfRange { seq, pos });
            }
        }
        if !registry.contains(r.kind) {
            return Err(GraphError::UnknownEdgeType(r.kind));
        }
        let (src, dst) = (layout.global(r.seq_a, r.pos_a), layout.global(r.seq_b, r.pos_b));
        if src == dst {
            dropped += 1;
            log::warn!("dropping relation with identical endpoints at index {src}");
            continue;
        }
        edges.push(Edge::new(src, dst, r.kind));
    }

    let graph = AnnotatedGraph::from_base_edges(tokens, edges, registry)?;
    Ok(BuiltGraph {
        graph,
        layout,
        dropped_self_links: dropped,
    })
}
