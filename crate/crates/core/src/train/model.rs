use rand::Rng;

use super::{Encoder, Head, PreparedExample, TrainConfig};
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::cell::{stack_layers, EncodeOptions, LayerParams, StateLayout, StepPath};
use crate::graph::EdgeTypeRegistry;
use crate::reader::{
    answer_classify, append_onehot, attention, extractive_distribution, extractive_prob, CandidateSet,
    OneHotFeatures,
};
use crate::Result;

/// Embeddings, encoder layers and the answer head's output embeddings.
#[derive(Clone, Debug)]
pub struct Model {
    pub store: ParamStore,
    pub embedding: ParamId,
    pub layers: Vec<LayerParams>,
    pub candidates: CandidateSet,
    pub encoder: Encoder,
    pub head: Head,
    pub m_max: usize,
    pub opts: EncodeOptions,
}

/// Result of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub loss: Option<Var>,
    /// Predicted answer token.
    pub predicted: usize,
    pub correct: bool,
    /// The document rows, for probing.
    pub h_d: Var,
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::matrix(rows, cols, data).expect("positive extents")
}

impl Model {
    pub fn new<R: Rng>(
        cfg: &TrainConfig,
        registry: &EdgeTypeRegistry,
        vocab_size: usize,
        candidates: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let embedding = store.add("embedding", glorot(vocab_size, cfg.d_emb, rng))?;
        let layout = match cfg.encoder {
            Encoder::Bigru | Encoder::Onehot => StateLayout::plain(cfg.seq_dim)?,
            Encoder::Mage => {
                let coref = registry.lookup("coref").expect("mage registry has coref");
                StateLayout::with_relation(registry, coref, cfg.seq_dim, cfg.coref_dim)?
            }
            Encoder::MageShared => {
                let coref = registry.lookup("coref").expect("mage registry has coref");
                StateLayout::shared_with_relation(registry, coref, cfg.state_width())
            }
        };
        let d_in = match cfg.encoder {
            Encoder::Onehot => cfg.d_emb + cfg.m_max,
            _ => cfg.d_emb,
        };
        let layers = layout.build_stack(&mut store, "enc", d_in, cfg.layers, registry, rng)?;
        let width = layers.last().expect("at least one layer").width();
        let w_c = store.add("W_C", glorot(width, candidates.len(), rng))?;
        let candidates = CandidateSet::new(candidates.to_vec(), w_c, &store)?;
        let path = if cfg.fast_path && !matches!(layout, StateLayout::Shared { .. }) {
            StepPath::Chain
        } else {
            StepPath::General
        };
        Ok(Model {
            store,
            embedding,
            layers,
            candidates,
            encoder: cfg.encoder,
            head: cfg.head,
            m_max: cfg.m_max,
            opts: EncodeOptions {
                path,
                interpolate_with_memory: cfg.interpolate_with_memory,
            },
        })
    }

    /// Builds the loss (when the gold answer is reachable) and prediction
    /// for one example on `tape`.
    pub fn forward(&self, tape: &mut Tape, ex: &PreparedExample) -> Result<Forward> {
        let table = tape.param(&self.store, self.embedding);
        let mut inputs = ex
            .tokens
            .iter()
            .map(|&t| tape.gather_row(table, t))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if self.encoder == Encoder::Onehot {
            let feats = OneHotFeatures {
                chains: ex.chains,
                chain_of: ex.chain_of.clone(),
            };
            inputs = append_onehot(tape, &inputs, &feats, self.m_max)?.0;
        }
        let enc = stack_layers(tape, &self.store, &self.layers, &ex.decomp, &inputs, self.opts)?;

        // the forward walk has read the whole query at its last token, the
        // backward walk at its first
        let q_last = ex.question.end - 1;
        let h_q = tape.concat(&[enc.forward[q_last], enc.backward[ex.question.start]], 0)?;
        let h_d = tape.stack(&enc.rows[ex.story.clone()])?;
        let alpha = attention(tape, h_q, h_d)?;

        match self.head {
            Head::Classify => {
                let (p, best) = answer_classify(tape, &self.store, alpha, h_d, &self.candidates)?;
                let loss = match ex.gold {
                    Some(g) => Some(tape.nll_loss(p, g)?),
                    None => None,
                };
                Ok(Forward {
                    loss,
                    predicted: self.candidates.tokens[best],
                    correct: ex.gold == Some(best),
                    h_d,
                })
            }
            Head::Extractive => {
                let doc = &ex.tokens[ex.story.clone()];
                let dist = extractive_distribution(tape.value(alpha).data(), doc);
                // BTreeMap order: the lowest token id wins ties
                let predicted = dist
                    .iter()
                    .fold(None::<(usize, f64)>, |best, (&w, &p)| match best {
                        Some((_, bp)) if bp >= p => best,
                        _ => Some((w, p)),
                    })
                    .map(|(w, _)| w)
                    .expect("non-empty document");
                let loss = if doc.contains(&ex.answer) {
                    let p = extractive_prob(tape, alpha, doc, ex.answer)?;
                    Some(tape.nll_loss(p, 0)?)
                } else {
                    None
                };
                Ok(Forward {
                    loss,
                    predicted,
                    correct: predicted == ex.answer,
                    h_d,
                })
            }
        }
    }

    /// Prediction only; no gradient bookkeeping is kept.
    pub fn predict(&self, ex: &PreparedExample) -> Result<bool> {
        let mut tape = Tape::new();
        Ok(self.forward(&mut tape, ex)?.correct)
    }

    /// Candidate distributions read from the document row at each sentence
    /// boundary.
    pub fn probe(&self, ex: &PreparedExample) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, ex)?;
        let w_c = self.store.value(self.candidates.w_c);
        Ok(crate::reader::sentence_probe(tape.value(f.h_d), &ex.boundaries, w_c)?)
    }
}
