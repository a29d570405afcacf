use std::collections::{BTreeSet, HashMap};

use super::{BabiExample, CorefAnnotation, DataError};
use crate::graph::{build_graph, BuiltGraph, EdgeTypeRegistry, Relation, SequenceOrder};

/// Id of the out-of-vocabulary token.
pub const UNK: usize = 0;

/// Word ids: `<unk>` is 0, the rest follow in sorted order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Collects every story, question and answer word of `examples`.
    pub fn build<'a>(examples: impl IntoIterator<Item = &'a BabiExample>) -> Self {
        let mut set = BTreeSet::new();
        for ex in examples {
            set.extend(ex.story.iter().flatten().cloned());
            set.extend(ex.question.iter().cloned());
            set.extend(ex.answer.iter().cloned());
        }
        let words: Vec<String> = std::iter::once("<unk>".to_string()).chain(set).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Sorted unique ids of the first answer word of every training example.
pub fn build_candidates(train: &[BabiExample], vocab: &Vocab) -> Result<Vec<usize>, DataError> {
    let set: BTreeSet<usize> = train
        .iter()
        .filter_map(|ex| ex.answer.first())
        .map(|a| vocab.id(a))
        .collect();
    if set.is_empty() {
        return Err(DataError::NoCandidates);
    }
    Ok(set.into_iter().collect())
}

/// A (story, question) pair as a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleGraph {
    pub built: BuiltGraph,
    /// Sequence 0 is the flattened story, sequence 1 the question.
    pub story_len: usize,
    pub question_len: usize,
}

impl ExampleGraph {
    /// Global index range of the story tokens.
    pub fn story_range(&self) -> std::ops::Range<usize> {
        let s = self.built.layout.segments[0];
        s.offset..s.end()
    }

    pub fn question_range(&self) -> std::ops::Range<usize> {
        let s = self.built.layout.segments[1];
        s.offset..s.end()
    }
}

/// Concatenates the flattened story and the question under `order` and
/// links consecutive chain mentions with `coref` edges. Chain positions
/// use story-then-question numbering; each chain is re-sorted by global
/// index so its links always point forward. A registry without a `coref`
/// type yields sequential edges only.
pub fn build_example_graph(
    example: &BabiExample,
    annotation: &CorefAnnotation,
    vocab: &Vocab,
    registry: &EdgeTypeRegistry,
    order: &SequenceOrder,
) -> Result<ExampleGraph, DataError> {
    let story: Vec<usize> = example.story.iter().flat_map(|s| vocab.encode(s)).collect();
    let question = vocab.encode(&example.question);
    let n_story = story.len();
    let locate = |p: usize| if p < n_story { (0, p) } else { (1, p - n_story) };

    let mut relations = Vec::new();
    if let Some(coref) = registry.lookup("coref") {
        // layout offsets depend only on lengths and order, so resolve them
        // with an edge-free build first
        let probe = build_graph(registry, &[story.clone(), question.clone()], &[], order)?;
        for chain in &annotation.chains {
            let mut mentions: Vec<(usize, usize)> = chain.iter().map(|&p| locate(p)).collect();
            mentions.sort_by_key(|&(s, p)| probe.layout.global(s, p));
            relations.extend(mentions.windows(2).map(|w| Relation {
                seq_a: w[0].0,
                pos_a: w[0].1,
                seq_b: w[1].0,
                pos_b: w[1].1,
                kind: coref,
            }));
        }
    }
    let built = build_graph(registry, &[story, question.clone()], &relations, order)?;
    Ok(ExampleGraph {
        built,
        story_len: n_story,
        question_len: question.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{examples_from_stories, extract_coref, parse_stories, EntityLexicon};
    use super::*;
    use crate::graph::{decompose, EdgeType};

    const TASK1: &str = "1 Mary moved to the bathroom.\n2 John went to the hallway.\n3 Where is Mary?\tbathroom\t1\n\
                         4 Mary went back to the kitchen.\n5 Where is Mary?\tkitchen\t4\n";

    fn setup() -> (Vec<BabiExample>, EntityLexicon, Vocab) {
        let stories = parse_stories(TASK1.as_bytes()).unwrap();
        let lex = EntityLexicon::from_stories(&stories);
        let ex = examples_from_stories(&stories, 1);
        let vocab = Vocab::build(&ex);
        (ex, lex, vocab)
    }

    #[test]
    fn chain_mentions_become_consecutive_links() {
        let (ex, _, vocab) = setup();
        let ann = CorefAnnotation {
            chains: vec![vec![3, 17, 20]],
            entities: vec!["x".into()],
        };
        let reg = EdgeTypeRegistry::with_coref();
        let g = build_example_graph(&ex[1], &ann, &vocab, &reg, &SequenceOrder::Natural).unwrap();
        let coref = reg.lookup("coref").unwrap();
        let links: Vec<(usize, usize)> = g
            .built
            .graph
            .base_edges
            .iter()
            .filter(|e| e.kind == coref)
            .map(|e| (e.src, e.dst))
            .collect();
        assert_eq!(links, vec![(3, 17), (17, 20)]);
    }

    #[test]
    fn question_first_order_keeps_links_forward() {
        let (ex, lex, vocab) = setup();
        let ann = extract_coref(&ex[1], &lex, true);
        let reg = EdgeTypeRegistry::with_coref();
        let g = build_example_graph(&ex[1], &ann, &vocab, &reg, &SequenceOrder::Given(vec![1, 0])).unwrap();
        assert_eq!(g.question_range(), 0..4);
        let coref = reg.lookup("coref").unwrap();
        assert!(g.built.graph.base_edges.iter().all(|e| e.src < e.dst));
        let d = decompose(&g.built.graph);
        assert!(d.is_chain_decomposable());
        // "mary" in the question (index 2) now leads the chain
        assert!(g.built.graph.base_edges.contains(&crate::graph::Edge::new(2, 4, coref)));
    }

    #[test]
    fn no_chains_gives_sequential_edges_only() {
        let (ex, _, vocab) = setup();
        let reg = EdgeTypeRegistry::with_coref();
        let g = build_example_graph(&ex[0], &CorefAnnotation::default(), &vocab, &reg, &SequenceOrder::Natural)
            .unwrap();
        assert!(g.built.graph.base_edges.iter().all(|e| e.kind == EdgeType::SEQ));
        assert_eq!(g.built.graph.base_edges.len(), g.story_len - 1 + g.question_len - 1);
    }

    #[test]
    fn candidates_are_sorted_unique_answers() {
        let (ex, _, vocab) = setup();
        let c = build_candidates(&ex, &vocab).unwrap();
        assert_eq!(c, vec![vocab.id("bathroom"), vocab.id("kitchen")]);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(matches!(build_candidates(&[], &vocab), Err(DataError::NoCandidates)));
    }
}
