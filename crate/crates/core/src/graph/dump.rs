//! Line-delimited JSON graph records.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AnnotatedGraph, Edge, EdgeTypeRegistry, GraphError, MultiSequenceLayout, Segment};

/// One graph per line. Only base edges are stored; inverses are
/// regenerated on load.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub tokens: Vec<String>,
    pub segments: Vec<[usize; 2]>,
    pub edges: Vec<(usize, usize, String)>,
}

impl GraphRecord {
    pub fn from_graph(
        graph: &AnnotatedGraph,
        layout: &MultiSequenceLayout,
        registry: &EdgeTypeRegistry,
        mut token_name: impl FnMut(usize) -> String,
    ) -> Self {
        GraphRecord {
            tokens: graph.tokens.iter().map(|&t| token_name(t)).collect(),
            segments: layout.segments.iter().map(|s| [s.offset, s.len]).collect(),
            edges: graph
                .base_edges
                .iter()
                .map(|e| (e.src, e.dst, registry.name(e.kind).to_string()))
                .collect(),
        }
    }

    pub fn to_graph(
        &self,
        registry: &EdgeTypeRegistry,
        mut token_id: impl FnMut(&str) -> usize,
    ) -> Result<(AnnotatedGraph, MultiSequenceLayout), GraphError> {
        let tokens = self.tokens.iter().map(|t| token_id(t)).collect();
        let mut edges = Vec::with_capacity(self.edges.len());
        for (src, dst, name) in &self.edges {
            let kind = registry
                .lookup(name)
                .ok_or_else(|| GraphError::UnknownEdgeName(name.clone()))?;
            edges.push(Edge::new(*src, *dst, kind));
        }
        let graph = AnnotatedGraph::from_base_edges(tokens, edges, registry)?;
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .map(|&[offset, len]| Segment { offset, len })
            .collect();
        let mut permutation: Vec<usize> = (0..segments.len()).collect();
        permutation.sort_by_key(|&s| segments[s].offset);
        let mut expected = 0;
        for &s in &permutation {
            if segments[s].offset != expected {
                return Err(GraphError::BadSegments);
            }
            expected += segments[s].len;
        }
        if expected != graph.len() {
            return Err(GraphError::BadSegments);
        }
        Ok((graph, MultiSequenceLayout { segments, permutation }))
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[GraphRecord]) -> Result<(), GraphError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<GraphRecord>, GraphError> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
