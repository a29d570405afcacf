//! The library encoder against the per-type reference update.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_forward_graph, random_inputs, RefGru, RefMage};
use mage_rnn::autodiff::{ParamStore, Tape, Tensor, Var};
use mage_rnn::cell::{encode_bidirectional, stack_layers, DirectionParams, EncodeOptions, StateLayout};
use mage_rnn::graph::{build_graph, decompose, DagDecomposition, Direction, EdgeTypeRegistry, SequenceOrder};

fn values(tape: &Tape, rows: &[Var]) -> Vec<Vec<f64>> {
    rows.iter().map(|&r| tape.value(r).data().to_vec()).collect()
}

fn assert_close(got: &[Vec<f64>], want: &[Vec<f64>], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (t, (g, w)) in got.iter().zip(want).enumerate() {
        assert_eq!(g.len(), w.len(), "row {t} width");
        for (a, b) in g.iter().zip(w) {
            assert!((a - b).abs() <= tol, "row {t}: {a} vs {b}");
        }
    }
}

fn reference_direction(
    store: &ParamStore,
    prefix: &str,
    params: &DirectionParams,
    decomp: &DagDecomposition,
    xs: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let slots: Vec<&str> = params.slots.iter().map(|s| s.name.as_str()).collect();
    let r = RefMage::from_store(store, prefix, params.direction.name(), &slots);
    let dir = params.direction;
    r.run(xs, &decomp.order(dir), |t| {
        decomp
            .incoming(dir, t)
            .iter()
            .map(|&(src, kind)| (src, params.slot_of(kind).expect("typed slot")))
            .collect()
    })
}

#[test]
fn split_layout_matches_reference_on_dags_with_fan_in() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let registry = EdgeTypeRegistry::with_coref();
    let coref = registry.lookup("coref").unwrap();
    for _ in 0..40 {
        let n = rng.gen_range(2..=14);
        let extra = rng.gen_range(0..2 * n);
        let g = random_forward_graph(&mut rng, n, extra, &registry);
        let decomp = decompose(&g);
        let d_in = rng.gen_range(1..=4);
        let mut store = ParamStore::new();
        let layer = StateLayout::with_relation(&registry, coref, rng.gen_range(1..=4), rng.gen_range(1..=3))
            .unwrap()
            .build_layer(&mut store, "enc", d_in, &registry, &mut rng)
            .unwrap();
        let xs = random_inputs(&mut rng, n, d_in);
        let mut tape = Tape::new();
        let inputs: Vec<Var> = xs.iter().map(|x| tape.input(Tensor::vector(x))).collect();
        let enc = encode_bidirectional(&mut tape, &store, &layer, &decomp, &inputs, EncodeOptions::default()).unwrap();

        let fwd = reference_direction(&store, "enc", &layer.forward, &decomp, &xs);
        let bwd = reference_direction(&store, "enc", &layer.backward, &decomp, &xs);
        assert_close(&values(&tape, &enc.forward), &fwd, 1e-12);
        assert_close(&values(&tape, &enc.backward), &bwd, 1e-12);
    }
}

#[test]
fn shared_layout_feeds_every_edge_into_one_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let registry = EdgeTypeRegistry::with_coref();
    let coref = registry.lookup("coref").unwrap();
    for _ in 0..20 {
        let n = rng.gen_range(2..=10);
        let g = random_forward_graph(&mut rng, n, n, &registry);
        let decomp = decompose(&g);
        let mut store = ParamStore::new();
        let layer = StateLayout::shared_with_relation(&registry, coref, 5)
            .build_layer(&mut store, "enc", 3, &registry, &mut rng)
            .unwrap();
        assert_eq!(layer.forward.slots.len(), 1);
        let xs = random_inputs(&mut rng, n, 3);
        let mut tape = Tape::new();
        let inputs: Vec<Var> = xs.iter().map(|x| tape.input(Tensor::vector(x))).collect();
        let enc = encode_bidirectional(&mut tape, &store, &layer, &decomp, &inputs, EncodeOptions::default()).unwrap();
        let fwd = reference_direction(&store, "enc", &layer.forward, &decomp, &xs);
        assert_close(&values(&tape, &enc.forward), &fwd, 1e-12);
    }
}

#[test]
fn two_layers_over_a_chain_match_a_two_layer_bigru() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let registry = EdgeTypeRegistry::new();
    for _ in 0..20 {
        let n = rng.gen_range(1..=10);
        let g = build_graph(&registry, &[(0..n).collect()], &[], &SequenceOrder::Natural).unwrap().graph;
        let decomp = decompose(&g);
        let mut store = ParamStore::new();
        let layers = StateLayout::plain(3)
            .unwrap()
            .build_stack(&mut store, "enc", 4, 2, &registry, &mut rng)
            .unwrap();
        let xs = random_inputs(&mut rng, n, 4);
        let mut tape = Tape::new();
        let inputs: Vec<Var> = xs.iter().map(|x| tape.input(Tensor::vector(x))).collect();
        let enc = stack_layers(&mut tape, &store, &layers, &decomp, &inputs, EncodeOptions::default()).unwrap();

        let mut h = xs;
        for k in 0..2 {
            let prefix = format!("enc.{k}");
            let fwd = RefGru::from_store(&store, &prefix, "fwd", "seq");
            let bwd = RefGru::from_store(&store, &prefix, "bwd", "seq_inv");
            h = RefGru::bidirectional(&fwd, &bwd, &h);
        }
        assert_close(&values(&tape, &enc.rows), &h, 1e-12);
        assert_eq!(enc.steps, [2 * n, 2 * n]);
    }
}

#[test]
fn every_node_is_visited_once_per_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let registry = EdgeTypeRegistry::with_coref();
    let coref = registry.lookup("coref").unwrap();
    let g = random_forward_graph(&mut rng, 9, 6, &registry);
    let decomp = decompose(&g);
    let mut store = ParamStore::new();
    let layer = StateLayout::with_relation(&registry, coref, 2, 2)
        .unwrap()
        .build_layer(&mut store, "enc", 2, &registry, &mut rng)
        .unwrap();
    let mut tape = Tape::new();
    let inputs: Vec<Var> = random_inputs(&mut rng, 9, 2)
        .iter()
        .map(|x| tape.input(Tensor::vector(x)))
        .collect();
    let enc = encode_bidirectional(&mut tape, &store, &layer, &decomp, &inputs, EncodeOptions::default()).unwrap();
    assert_eq!(enc.steps, [9, 9]);
    assert_eq!(layer.direction(Direction::Backward).slots[1].name, "coref_inv");
}
