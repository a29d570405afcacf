use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mage_rnn::autodiff::{softmax_values, ParamStore, Tensor};
use mage_rnn::babi::{
    generate_babi_mix, generate_stories, parse_stories, unmix, write_stories, EntityLexicon, SynthConfig,
};
use mage_rnn::graph::{
    build_graph, decompose, Direction, EdgeType, EdgeTypeRegistry, GraphRecord, Relation, SequenceOrder,
};
use mage_rnn::reader::answer_extractive;

fn sequences() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..20, 1..8), 1..4)
}

/// Sequences plus coref relations between random positions.
fn annotated() -> impl Strategy<Value = (Vec<Vec<usize>>, Vec<(usize, usize, usize, usize)>, u64)> {
    sequences().prop_flat_map(|seqs| {
        let lens: Vec<usize> = seqs.iter().map(Vec::len).collect();
        let pos = (0..lens.len()).prop_flat_map(move |s| (Just(s), 0..lens[s]));
        let rels = prop::collection::vec((pos.clone(), pos), 0..6)
            .prop_map(|v| v.into_iter().map(|((a, i), (b, j))| (a, i, b, j)).collect());
        (Just(seqs), rels, any::<u64>())
    })
}

/// One relation per unordered endpoint pair.
fn relations(raw: &[(usize, usize, usize, usize)], kind: EdgeType) -> Vec<Relation> {
    let mut seen = std::collections::BTreeSet::new();
    raw.iter()
        .filter(|&&(a, i, b, j)| seen.insert(((a, i).min((b, j)), (a, i).max((b, j)))))
        .map(|&(seq_a, pos_a, seq_b, pos_b)| Relation {
            seq_a,
            pos_a,
            seq_b,
            pos_b,
            kind,
        })
        .collect()
}

proptest! {
    #[test]
    fn decomposition_partitions_edges_by_direction((seqs, raw, seed) in annotated()) {
        let registry = EdgeTypeRegistry::with_coref();
        let coref = registry.lookup("coref").unwrap();
        let built = build_graph(&registry, &seqs, &relations(&raw, coref), &SequenceOrder::Seeded(seed)).unwrap();
        let d = decompose(&built.graph);
        prop_assert!(d.forward_edges.iter().all(|e| e.src < e.dst));
        prop_assert!(d.backward_edges.iter().all(|e| e.src > e.dst));
        prop_assert_eq!(d.forward_edges.len() + d.backward_edges.len(), built.graph.all_edges.len());
        prop_assert_eq!(built.graph.all_edges.len(), 2 * built.graph.base_edges.len());
        for dir in Direction::BOTH {
            let order = d.order(dir);
            let mut seen = vec![false; d.len()];
            for &t in &order {
                for &(src, _) in d.incoming(dir, t) {
                    prop_assert!(seen[src], "source visited before its target");
                }
                seen[t] = true;
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn sequential_edges_stay_inside_segments((seqs, _raw, seed) in annotated()) {
        let registry = EdgeTypeRegistry::new();
        let built = build_graph(&registry, &seqs, &[], &SequenceOrder::Seeded(seed)).unwrap();
        let total: usize = seqs.iter().map(Vec::len).sum();
        prop_assert_eq!(built.graph.base_edges.len(), total - seqs.len());
        for e in &built.graph.base_edges {
            let (sa, pa) = built.layout.local(e.src).unwrap();
            let (sb, pb) = built.layout.local(e.dst).unwrap();
            prop_assert_eq!(sa, sb);
            prop_assert_eq!(pa + 1, pb);
        }
        for (s, seq) in seqs.iter().enumerate() {
            for (p, &tok) in seq.iter().enumerate() {
                prop_assert_eq!(built.graph.tokens[built.layout.global(s, p)], tok);
            }
        }
    }

    #[test]
    fn graph_records_round_trip((seqs, raw, seed) in annotated()) {
        let registry = EdgeTypeRegistry::with_coref();
        let coref = registry.lookup("coref").unwrap();
        let built = build_graph(&registry, &seqs, &relations(&raw, coref), &SequenceOrder::Seeded(seed)).unwrap();
        let record = GraphRecord::from_graph(&built.graph, &built.layout, &registry, |t| format!("w{t}"));
        let json = serde_json::to_string(&record).unwrap();
        let back: GraphRecord = serde_json::from_str(&json).unwrap();
        let (graph, layout) = back
            .to_graph(&registry, |w| w[1..].parse().unwrap())
            .unwrap();
        prop_assert_eq!(graph, built.graph);
        prop_assert_eq!(layout, built.layout);
    }

    #[test]
    fn clipped_gradient_norm_is_bounded(
        grads in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 1..6), 1..5),
        max_norm in 0.01f64..10.0,
    ) {
        let mut store = ParamStore::new();
        for (i, g) in grads.iter().enumerate() {
            let id = store.add(format!("p{i}"), Tensor::zeros(&[g.len()])).unwrap();
            store.get_mut(id).grad = Tensor::vector(g);
        }
        let before = store.grad_norm();
        let reported = store.clip_grad_norm(max_norm);
        prop_assert_eq!(reported, before);
        prop_assert!(store.grad_norm() <= max_norm + 1e-9);
        if before <= max_norm {
            prop_assert_eq!(store.grad_norm(), before);
        }
    }

    #[test]
    fn softmax_is_a_distribution(x in prop::collection::vec(-50.0f64..50.0, 1..30)) {
        let p = softmax_values(&x);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn attention_sum_partitions_mass(
        scores in prop::collection::vec(-5.0f64..5.0, 1..25),
        words in prop::collection::vec(0usize..6, 25),
    ) {
        let alpha = softmax_values(&scores);
        let doc = &words[..alpha.len()];
        let total: f64 = (0..6).map(|w| answer_extractive(&alpha, doc, w)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn stories_survive_text_round_trip(task in 1u8..=2, seed in any::<u64>()) {
        let stories = generate_stories(&SynthConfig { stories: 3, ..SynthConfig::task(task, seed) }).unwrap();
        let mut text = Vec::new();
        write_stories(&mut text, &stories).unwrap();
        prop_assert_eq!(parse_stories(text.as_slice()).unwrap(), stories);
    }

    #[test]
    fn unmixing_recovers_both_stories(task in 1u8..=2, seed in any::<u64>()) {
        let stories = generate_stories(&SynthConfig { stories: 2, ..SynthConfig::task(task, seed) }).unwrap();
        let lexicon = EntityLexicon::from_stories(&stories);
        let mixed = generate_babi_mix(&stories[0], &stories[1], &lexicon, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(mixed.rename.is_injective());
        prop_assert_eq!(&unmix(&mixed.story, &mixed.rename), &stories[0]);
        let b_lines: Vec<_> = mixed
            .story
            .lines
            .iter()
            .zip(&mixed.from_a)
            .filter(|(_, &a)| !a)
            .map(|(l, _)| mixed.rename.inverse().apply_text(l.text()))
            .collect();
        let want: Vec<_> = stories[1].lines.iter().map(|l| l.text().to_string()).collect();
        prop_assert_eq!(b_lines, want);
    }
}
