//! Independent reference implementations on plain vectors, and random
//! graph generators shared by the integration tests.

#![allow(dead_code)]

use mage_rnn::autodiff::ParamStore;
use mage_rnn::graph::{AnnotatedGraph, Edge, EdgeType, EdgeTypeRegistry};
use rand::Rng;

pub type Vector = Vec<f64>;

/// Row-major matrix read out of a parameter store.
#[derive(Clone, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn from_store(store: &ParamStore, name: &str) -> Mat {
        let id = store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
        let t = store.value(id);
        let (rows, cols) = match t.shape() {
            [r, c] => (*r, *c),
            [r] => (*r, 1),
            s => panic!("unexpected shape {s:?}"),
        };
        Mat {
            rows,
            cols,
            data: t.data().to_vec(),
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vector {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.data[i * self.cols + j] * x[j]).sum())
            .collect()
    }
}

pub fn vec_of(store: &ParamStore, name: &str) -> Vector {
    store.value(store.id(name).unwrap()).data().to_vec()
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Textbook GRU over `xs` in the given order:
/// `h = (1 − z) ⊙ h_prev + z ⊙ tanh(W_h x + r ⊙ U_h h_prev + b_h)`.
pub struct RefGru {
    pub w: [Mat; 3],
    pub u: [Mat; 3],
    pub b: [Vector; 3],
}

impl RefGru {
    /// Reads `{prefix}.{dir}.{W,U,b}_{r,z,h}` with slot name `slot`.
    pub fn from_store(store: &ParamStore, prefix: &str, dir: &str, slot: &str) -> RefGru {
        let g = ["r", "z", "h"];
        let w = g.map(|g| Mat::from_store(store, &format!("{prefix}.{dir}.W_{g}.{slot}")));
        let u = g.map(|g| Mat::from_store(store, &format!("{prefix}.{dir}.U_{g}.{slot}.{slot}")));
        let b = g.map(|g| vec_of(store, &format!("{prefix}.{dir}.b_{g}.{slot}")));
        RefGru { w, u, b }
    }

    pub fn run(&self, xs: &[Vector], order: impl Iterator<Item = usize>) -> Vec<Vector> {
        let d = self.b[0].len();
        let mut h = vec![0.0; d];
        let mut out = vec![Vec::new(); xs.len()];
        for t in order {
            let x = &xs[t];
            let pre = |k: usize, rec: &[f64]| -> Vector { add(&add(&self.w[k].mul(x), rec), &self.b[k]) };
            let r: Vector = pre(0, &self.u[0].mul(&h)).into_iter().map(sigmoid).collect();
            let z: Vector = pre(1, &self.u[1].mul(&h)).into_iter().map(sigmoid).collect();
            let uh = self.u[2].mul(&h);
            let gated: Vector = r.iter().zip(&uh).map(|(a, b)| a * b).collect();
            let cand: Vector = pre(2, &gated).into_iter().map(f64::tanh).collect();
            h = (0..d).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect();
            out[t] = h.clone();
        }
        out
    }

    /// Forward pass ∥ backward pass, row by row.
    pub fn bidirectional(fwd: &RefGru, bwd: &RefGru, xs: &[Vector]) -> Vec<Vector> {
        let n = xs.len();
        let f = fwd.run(xs, 0..n);
        let b = bwd.run(xs, (0..n).rev());
        f.into_iter().zip(b).map(|(mut a, b)| {
            a.extend(b);
            a
        }).collect()
    }
}

/// Per-type update over a DAG straight from the equations: every slot's
/// gates read `Σ_{(t',e')} U^{e,e'} h^{e'}_{t'}` over the incoming edges
/// and interpolate against the same slot's state at the previous position.
pub struct RefMage {
    /// Slot names in output order.
    pub slots: Vec<String>,
    pub w: Vec<[Mat; 3]>,
    pub b: Vec<[Vector; 3]>,
    /// `u[i][j]`: slot j's state into slot i.
    pub u: Vec<Vec<[Mat; 3]>>,
}

impl RefMage {
    pub fn from_store(store: &ParamStore, prefix: &str, dir: &str, slots: &[&str]) -> RefMage {
        let g = ["r", "z", "h"];
        RefMage {
            slots: slots.iter().map(|s| s.to_string()).collect(),
            w: slots
                .iter()
                .map(|s| g.map(|g| Mat::from_store(store, &format!("{prefix}.{dir}.W_{g}.{s}"))))
                .collect(),
            b: slots
                .iter()
                .map(|s| g.map(|g| vec_of(store, &format!("{prefix}.{dir}.b_{g}.{s}"))))
                .collect(),
            u: slots
                .iter()
                .map(|s| {
                    slots
                        .iter()
                        .map(|j| g.map(|g| Mat::from_store(store, &format!("{prefix}.{dir}.U_{g}.{s}.{j}"))))
                        .collect()
                })
                .collect(),
        }
    }

    /// `incoming(t)` lists `(source node, source slot)`; `order` is the
    /// walk. Returns the concatenated slot states per node.
    pub fn run(
        &self,
        xs: &[Vector],
        order: &[usize],
        incoming: impl Fn(usize) -> Vec<(usize, usize)>,
    ) -> Vec<Vector> {
        let n_slots = self.slots.len();
        let dims: Vec<usize> = self.b.iter().map(|b| b[0].len()).collect();
        let mut states: Vec<Option<Vec<Vector>>> = vec![None; xs.len()];
        let mut prev: Vec<Vector> = dims.iter().map(|&d| vec![0.0; d]).collect();
        for &t in order {
            let inc = incoming(t);
            let mut next = Vec::with_capacity(n_slots);
            for e in 0..n_slots {
                let d = dims[e];
                let mut rec = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
                for &(src, j) in &inc {
                    let hs = &states[src].as_ref().expect("source processed")[j];
                    for (k, acc) in rec.iter_mut().enumerate() {
                        *acc = add(acc, &self.u[e][j][k].mul(hs));
                    }
                }
                let x = &xs[t];
                let r: Vector = add(&add(&self.w[e][0].mul(x), &rec[0]), &self.b[e][0])
                    .into_iter()
                    .map(sigmoid)
                    .collect();
                let z: Vector = add(&add(&self.w[e][1].mul(x), &rec[1]), &self.b[e][1])
                    .into_iter()
                    .map(sigmoid)
                    .collect();
                let gated: Vector = r.iter().zip(&rec[2]).map(|(a, b)| a * b).collect();
                let cand: Vector = add(&add(&self.w[e][2].mul(x), &gated), &self.b[e][2])
                    .into_iter()
                    .map(f64::tanh)
                    .collect();
                next.push((0..d).map(|i| (1.0 - z[i]) * prev[e][i] + z[i] * cand[i]).collect());
            }
            prev = next.clone();
            states[t] = Some(next);
        }
        states.into_iter().map(|s| s.expect("every node visited").concat()).collect()
    }
}

pub fn random_inputs<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vector> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// A sequential chain of `n` tokens plus `coref` links between
/// consecutive mentions of random entities, so no node has two incoming
/// links of one type in either direction.
pub fn random_coref_graph<R: Rng>(rng: &mut R, n: usize, registry: &EdgeTypeRegistry) -> AnnotatedGraph {
    let coref = registry.lookup("coref").expect("coref registered");
    let entities = rng.gen_range(1..=3);
    let mut last: Vec<Option<usize>> = vec![None; entities];
    let mut edges: Vec<Edge> = (0..n.saturating_sub(1)).map(|i| Edge::new(i, i + 1, EdgeType::SEQ)).collect();
    for t in 0..n {
        if rng.gen_bool(0.4) {
            let e = rng.gen_range(0..entities);
            if let Some(p) = last[e] {
                edges.push(Edge::new(p, t, coref));
            }
            last[e] = Some(t);
        }
    }
    AnnotatedGraph::from_base_edges((0..n).collect(), edges, registry).expect("valid graph")
}

/// Sequential chain plus arbitrary forward `coref` edges; nodes may have
/// several incoming links of one type.
pub fn random_forward_graph<R: Rng>(rng: &mut R, n: usize, extra: usize, registry: &EdgeTypeRegistry) -> AnnotatedGraph {
    let coref = registry.lookup("coref").expect("coref registered");
    let mut edges: Vec<Edge> = (0..n - 1).map(|i| Edge::new(i, i + 1, EdgeType::SEQ)).collect();
    let mut tries = 0;
    while edges.len() < n - 1 + extra && tries < 1000 {
        tries += 1;
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let e = Edge::new(a.min(b), a.max(b), coref);
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    }
    AnnotatedGraph::from_base_edges((0..n).collect(), edges, registry).expect("valid graph")
}
