use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataSource, Encoder, TrainConfig};
use crate::babi::{
    build_candidates, build_example_graph, examples_from_stories, extract_coref, generate_stories, read_stories_file,
    task_from_path, BabiExample, DataError, EntityLexicon, Story, SynthConfig, Vocab,
};
use crate::graph::{decompose, DagDecomposition, EdgeTypeRegistry, SequenceOrder};
use crate::{Error, Result};

/// Raw training and test stories.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StorySplits {
    pub task: u8,
    pub train: Vec<Story>,
    pub test: Vec<Story>,
}

impl StorySplits {
    pub fn load(source: &DataSource) -> Result<Self> {
        match source {
            DataSource::Files { train, test, task } => {
                let task = task
                    .or_else(|| task_from_path(train))
                    .ok_or_else(|| DataError::UnknownTask(train.display().to_string()))?;
                Ok(StorySplits {
                    task,
                    train: read_stories_file(train)?,
                    test: read_stories_file(test)?,
                })
            }
            &DataSource::Synthetic {
                task,
                seed,
                stories,
                statements_min,
                statements_max,
            } => {
                let cfg = |seed| SynthConfig {
                    task,
                    stories,
                    questions_per_story: 5,
                    statements_between: (statements_min, statements_max),
                    seed,
                };
                Ok(StorySplits {
                    task,
                    train: generate_stories(&cfg(seed))?,
                    test: generate_stories(&cfg(seed.wrapping_add(1)))?,
                })
            }
        }
    }
}

/// One question ready for the encoder.
#[derive(Clone, Debug)]
pub struct PreparedExample {
    /// Position in its split.
    pub id: usize,
    /// Token id of every node, in global order.
    pub tokens: Vec<usize>,
    pub decomp: DagDecomposition,
    pub story: Range<usize>,
    pub question: Range<usize>,
    /// Gold answer token and its candidate index when it is a candidate.
    pub answer: usize,
    pub gold: Option<usize>,
    /// Story-local row of the last token of each sentence.
    pub boundaries: Vec<usize>,
    /// Chain id of every node, for the one-hot features.
    pub chain_of: Vec<Option<usize>>,
    pub chains: usize,
}

/// Everything a run needs: vocabulary, candidates and the three splits.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub task: u8,
    pub vocab: Vocab,
    pub lexicon: EntityLexicon,
    pub registry: EdgeTypeRegistry,
    pub candidates: Vec<usize>,
    pub train: Vec<PreparedExample>,
    pub valid: Vec<PreparedExample>,
    pub test: Vec<PreparedExample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

impl Dataset {
    pub fn split(&self, s: Split) -> &[PreparedExample] {
        match s {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Loads the stories named by the config and prepares every question.
    pub fn load(cfg: &TrainConfig) -> Result<Self> {
        Self::from_splits(cfg, &StorySplits::load(&cfg.data)?)
    }

    /// The last `valid_fraction` of the training stories become the
    /// validation split. Candidates come from the remaining training
    /// questions; the lexicon and vocabulary from the whole training file.
    pub fn from_splits(cfg: &TrainConfig, splits: &StorySplits) -> Result<Self> {
        let n = splits.train.len();
        let n_valid = ((n as f64 * cfg.valid_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        if n < 2 {
            return Err(Error::Config("need at least two training stories".into()));
        }
        let (train_stories, valid_stories) = splits.train.split_at(n - n_valid);
        let train_ex = examples_from_stories(train_stories, splits.task);
        let valid_ex = examples_from_stories(valid_stories, splits.task);
        let test_ex = examples_from_stories(&splits.test, splits.task);

        let lexicon = EntityLexicon::from_stories(&splits.train);
        let vocab = Vocab::build(train_ex.iter().chain(&valid_ex));
        let candidates = build_candidates(&train_ex, &vocab)?;
        let registry = match cfg.encoder {
            Encoder::Mage | Encoder::MageShared => EdgeTypeRegistry::with_coref(),
            Encoder::Bigru | Encoder::Onehot => EdgeTypeRegistry::new(),
        };
        let mut ds = Dataset {
            task: splits.task,
            vocab,
            lexicon,
            registry,
            candidates,
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        };
        // distinct order streams per split so permutations never coincide
        ds.train = ds.prepare_all(cfg, &train_ex, 0)?;
        ds.valid = ds.prepare_all(cfg, &valid_ex, 1)?;
        ds.test = ds.prepare_all(cfg, &test_ex, 2)?;
        let unseen = ds.valid.iter().chain(&ds.test).filter(|e| e.gold.is_none()).count();
        if unseen > 0 {
            log::warn!("{unseen} held-out answers are not candidates and will count as errors");
        }
        Ok(ds)
    }

    fn prepare_all(&self, cfg: &TrainConfig, examples: &[BabiExample], stream: u64) -> Result<Vec<PreparedExample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        examples
            .iter()
            .enumerate()
            .map(|(id, ex)| {
                let order = if cfg.permute {
                    SequenceOrder::Seeded(rng.gen())
                } else {
                    SequenceOrder::Natural
                };
                self.prepare(cfg, id, ex, &order)
            })
            .collect()
    }

    pub fn prepare(
        &self,
        cfg: &TrainConfig,
        id: usize,
        ex: &BabiExample,
        order: &SequenceOrder,
    ) -> Result<PreparedExample> {
        let ann = extract_coref(ex, &self.lexicon, cfg.link_question);
        let g = build_example_graph(ex, &ann, &self.vocab, &self.registry, order)?;
        let layout = &g.built.layout;
        let story = g.story_range();
        let question = g.question_range();

        // chain ids live in story-then-question numbering; move them to
        // global indices
        let local = ann.chain_of(g.story_len + g.question_len);
        let mut chain_of = vec![None; layout.total_len()];
        for (p, c) in local.into_iter().enumerate() {
            let (seq, pos) = if p < g.story_len { (0, p) } else { (1, p - g.story_len) };
            chain_of[layout.global(seq, pos)] = c;
        }

        let mut boundaries = Vec::with_capacity(ex.story.len());
        let mut end = 0;
        for s in &ex.story {
            end += s.len();
            boundaries.push(end - 1);
        }

        let answer = self.vocab.id(&ex.answer[0]);
        Ok(PreparedExample {
            id,
            tokens: g.built.graph.tokens.clone(),
            decomp: decompose(&g.built.graph),
            story,
            question,
            answer,
            gold: self.candidates.iter().position(|&c| c == answer),
            boundaries,
            chain_of,
            chains: ann.chains.len(),
        })
    }
}
