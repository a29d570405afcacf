use std::collections::{BTreeMap, BTreeSet};

use super::parse::raw_tokens;
use super::{BabiExample, Line, Story};

/// Entity and object names of a task, lowercased.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityLexicon {
    pub words: BTreeSet<String>,
}

const DETERMINERS: [&str; 3] = ["the", "a", "an"];

impl EntityLexicon {
    /// Derives the lexicon from raw story blocks:
    ///
    /// * tokens written capitalized where they are not sentence-initial, or
    ///   sentence-initial in a statement and never seen lowercase;
    /// * answer tokens that occur in statements;
    /// * the noun after a determiner in a question ("Where is the milk?").
    pub fn from_stories(stories: &[Story]) -> Self {
        let mut capitalized_inner = BTreeSet::new();
        let mut capitalized_initial = BTreeSet::new();
        let mut lowercase = BTreeSet::new();
        let mut statement_words = BTreeSet::new();
        let mut answers = BTreeSet::new();
        let mut question_nouns = BTreeSet::new();

        for line in stories.iter().flat_map(|s| &s.lines) {
            let toks = raw_tokens(line.text());
            for (i, t) in toks.iter().enumerate() {
                let lower = t.to_lowercase();
                let is_cap = t.chars().next().is_some_and(char::is_uppercase);
                if is_cap && i > 0 {
                    capitalized_inner.insert(lower.clone());
                } else if is_cap && !line.is_question() {
                    capitalized_initial.insert(lower.clone());
                } else if !is_cap {
                    lowercase.insert(lower.clone());
                }
                if !line.is_question() {
                    statement_words.insert(lower);
                }
            }
            if let Line::Question { answer, .. } = line {
                answers.extend(answer.split(',').map(|a| a.trim().to_lowercase()));
                let lower: Vec<String> = toks.iter().map(|t| t.to_lowercase()).collect();
                for w in lower.windows(2) {
                    if DETERMINERS.contains(&w[0].as_str()) && w[1].chars().all(char::is_alphabetic) {
                        question_nouns.insert(w[1].clone());
                    }
                }
            }
        }

        let mut words: BTreeSet<String> = capitalized_inner;
        words.extend(capitalized_initial.into_iter().filter(|w| !lowercase.contains(w)));
        words.extend(answers.into_iter().filter(|a| statement_words.contains(a)));
        words.extend(question_nouns.into_iter().filter(|a| statement_words.contains(a)));
        EntityLexicon { words }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// Mention chains of one example, in document-then-question order: story
/// tokens are numbered first, then the question tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorefAnnotation {
    /// One chain per entity with at least two mentions; positions
    /// strictly increasing. Chains are ordered by first mention.
    pub chains: Vec<Vec<usize>>,
    /// Entity string of each chain.
    pub entities: Vec<String>,
}

impl CorefAnnotation {
    /// Consecutive-mention pairs `(earlier, later)` of every chain.
    pub fn links(&self) -> Vec<(usize, usize)> {
        self.chains
            .iter()
            .flat_map(|c| c.windows(2).map(|w| (w[0], w[1])))
            .collect()
    }

    /// Chain id of each of `len` positions, if any.
    pub fn chain_of(&self, len: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; len];
        for (c, chain) in self.chains.iter().enumerate() {
            for &p in chain {
                if p < len {
                    out[p] = Some(c);
                }
            }
        }
        out
    }
}

/// Groups mentions of each lexicon entity into a chain. With
/// `link_question` the question's mentions join the chains, so a question
/// entity links back to its latest story mention.
pub fn extract_coref(example: &BabiExample, lexicon: &EntityLexicon, link_question: bool) -> CorefAnnotation {
    let story_tokens = example.story.iter().flatten();
    let question_tokens = example.question.iter().filter(|_| link_question);
    let n_story = example.story_len();

    let mut mentions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (pos, tok) in story_tokens.enumerate() {
        if lexicon.contains(tok) {
            mentions.entry(tok.as_str()).or_default().push(pos);
        }
    }
    for (pos, tok) in question_tokens.enumerate() {
        if lexicon.contains(tok) {
            mentions.entry(tok.as_str()).or_default().push(n_story + pos);
        }
    }

    let mut chains: Vec<(String, Vec<usize>)> = mentions
        .into_iter()
        .filter(|(_, p)| p.len() >= 2)
        .map(|(e, p)| (e.to_string(), p))
        .collect();
    chains.sort_by_key(|(_, p)| p[0]);
    let (entities, chains) = chains.into_iter().unzip();
    CorefAnnotation { chains, entities }
}

#[cfg(test)]
mod tests {
    use super::super::parse::{examples_from_stories, parse_stories};
    use super::*;

    const TASK1: &str = "1 Mary moved to the bathroom.\n2 John went to the hallway.\n3 Where is Mary?\tbathroom\t1\n\
                         4 Mary went back to the kitchen.\n5 Where is Mary?\tkitchen\t4\n";

    #[test]
    fn lexicon_from_task1_text() {
        let stories = parse_stories(TASK1.as_bytes()).unwrap();
        let lex = EntityLexicon::from_stories(&stories);
        let words: Vec<&str> = lex.words.iter().map(String::as_str).collect();
        assert_eq!(words, ["bathroom", "john", "kitchen", "mary"]);
    }

    #[test]
    fn question_subject_nouns_join_lexicon() {
        let text = "1 Mary got the milk there.\n2 The kitchen is north of the garden.\n3 Where is the milk?\tkitchen\t1\n";
        let lex = EntityLexicon::from_stories(&parse_stories(text.as_bytes()).unwrap());
        assert!(lex.contains("milk"));
        assert!(lex.contains("mary"));
        assert!(!lex.contains("the"));
        assert!(!lex.contains("where"));
    }

    #[test]
    fn repeated_mentions_form_chains() {
        let stories = parse_stories(TASK1.as_bytes()).unwrap();
        let lex = EntityLexicon::from_stories(&stories);
        let ex = &examples_from_stories(&stories, 1)[1];
        // story: mary moved to the bathroom . john went to the hallway . mary went back to the kitchen .
        let ann = extract_coref(ex, &lex, false);
        assert_eq!(ann.entities, vec!["mary"]);
        assert_eq!(ann.chains, vec![vec![0, 12]]);
        // the question mention joins the chain last
        let ann = extract_coref(ex, &lex, true);
        assert_eq!(ann.chains, vec![vec![0, 12, 21]]);
        assert_eq!(ann.links(), vec![(0, 12), (12, 21)]);
    }

    #[test]
    fn single_mentions_and_no_repeats_give_nothing() {
        let stories = parse_stories(TASK1.as_bytes()).unwrap();
        let lex = EntityLexicon::from_stories(&stories);
        let ex = &examples_from_stories(&stories, 1)[0];
        let ann = extract_coref(ex, &lex, false);
        assert!(ann.chains.is_empty());
    }

    #[test]
    fn chain_ids_per_position() {
        let ann = CorefAnnotation {
            chains: vec![vec![1, 4], vec![2, 5]],
            entities: vec!["a".into(), "b".into()],
        };
        assert_eq!(ann.chain_of(6), vec![None, Some(0), Some(1), None, Some(0), Some(1)]);
    }
}
