//! Answer heads over an encoded document/query pair.
//!
//! The query vector scores every document row; the softmax of those scores
//! is the attention `α`. Extractive answers sum `α` over every occurrence
//! of a token; classification answers project `αᵀ H_d` onto an output
//! embedding per candidate.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::autodiff::{softmax_values, ParamId, ParamStore, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum ReaderError {
    #[error("{what}: width {left} does not match {right}")]
    WidthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("candidate set: {0}")]
    Candidates(String),
    #[error("sentence boundary {index} out of range for {len} document rows")]
    BoundaryOutOfRange { index: usize, len: usize },
    #[error("sentence boundaries are not sorted")]
    UnsortedBoundaries,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Document rows `H_d` (a `|d| × width` matrix on the tape), the query
/// vector and the token id at each document position.
#[derive(Clone, Debug)]
pub struct EncodedPair {
    pub h_d: Var,
    pub h_q: Var,
    pub token_map: Vec<usize>,
}

impl EncodedPair {
    pub fn new(tape: &Tape, h_d: Var, h_q: Var, token_map: Vec<usize>) -> Result<Self, ReaderError> {
        let (ds, qs) = (tape.value(h_d).shape(), tape.value(h_q).shape());
        if ds.len() != 2 || qs.len() != 1 || ds[1] != qs[0] {
            return Err(ReaderError::WidthMismatch {
                what: "document rows vs query",
                left: *ds.last().unwrap(),
                right: qs[0],
            });
        }
        if ds[0] != token_map.len() {
            return Err(ReaderError::WidthMismatch {
                what: "document rows vs token map",
                left: ds[0],
                right: token_map.len(),
            });
        }
        Ok(EncodedPair { h_d, h_q, token_map })
    }
}

/// Candidate answer tokens and the parameter holding their output
/// embeddings `W_C` (`width × |C|`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub tokens: Vec<usize>,
    pub w_c: ParamId,
}

impl CandidateSet {
    pub fn new(tokens: Vec<usize>, w_c: ParamId, store: &ParamStore) -> Result<Self, ReaderError> {
        if tokens.len() < 2 {
            return Err(ReaderError::Candidates("need at least two candidates".into()));
        }
        let mut sorted = tokens.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ReaderError::Candidates("candidates are not unique".into()));
        }
        let shape = store.value(w_c).shape();
        if shape.len() != 2 || shape[1] != tokens.len() {
            return Err(ReaderError::Candidates(format!(
                "output embedding shape {shape:?} does not fit {} candidates",
                tokens.len()
            )));
        }
        Ok(CandidateSet { tokens, w_c })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: usize) -> Option<usize> {
        self.tokens.iter().position(|&t| t == token)
    }
}

/// `softmax(H_d · h_q)`: a distribution over document positions.
pub fn attention(tape: &mut Tape, h_q: Var, h_d: Var) -> Result<Var, ReaderError> {
    let scores = tape.matvec(h_d, h_q).map_err(|_| ReaderError::WidthMismatch {
        what: "document rows vs query",
        left: tape.value(h_d).cols(),
        right: tape.value(h_q).len(),
    })?;
    Ok(tape.softmax(scores)?)
}

/// Attention mass on every occurrence of token `w`; zero when absent.
pub fn answer_extractive(alpha: &[f64], token_map: &[usize], w: usize) -> f64 {
    alpha
        .iter()
        .zip(token_map)
        .filter(|&(_, &t)| t == w)
        .map(|(a, _)| a)
        .sum()
}

/// Extractive probability of every distinct document token.
pub fn extractive_distribution(alpha: &[f64], token_map: &[usize]) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (&a, &t) in alpha.iter().zip(token_map) {
        *out.entry(t).or_insert(0.0) += a;
    }
    out
}

/// Differentiable form of [`answer_extractive`].
pub fn extractive_prob(tape: &mut Tape, alpha: Var, token_map: &[usize], w: usize) -> Result<Var, ReaderError> {
    let positions: Vec<usize> = token_map
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t == w)
        .map(|(i, _)| i)
        .collect();
    Ok(tape.select_sum(alpha, &positions)?)
}

/// First index of the largest entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `h = αᵀ H_d`, `p_C = softmax(hᵀ W_C)`. Returns `p_C` and the argmax
/// candidate index (lowest index on ties).
pub fn answer_classify(
    tape: &mut Tape,
    store: &ParamStore,
    alpha: Var,
    h_d: Var,
    cand: &CandidateSet,
) -> Result<(Var, usize), ReaderError> {
    let summary = tape.vecmat(alpha, h_d)?;
    classify_summary(tape, store, summary, cand)
}

fn classify_summary(
    tape: &mut Tape,
    store: &ParamStore,
    summary: Var,
    cand: &CandidateSet,
) -> Result<(Var, usize), ReaderError> {
    let w_c = tape.param(store, cand.w_c);
    let logits = tape.vecmat(summary, w_c).map_err(|_| ReaderError::WidthMismatch {
        what: "document summary vs output embeddings",
        left: tape.value(summary).len(),
        right: tape.value(w_c).rows(),
    })?;
    let p = tape.softmax(logits)?;
    let best = argmax(tape.value(p).data());
    Ok((p, best))
}

/// Chain-membership indicators for the one-hot baseline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneHotFeatures {
    /// Number of chains in the pair.
    pub chains: usize,
    /// Chain id of each token, if any.
    pub chain_of: Vec<Option<usize>>,
}

/// Appends a `m_max`-wide one-hot chain indicator to each embedding.
/// Chains numbered `m_max` or above get an all-zero suffix; their count is
/// returned alongside the new inputs.
pub fn append_onehot(
    tape: &mut Tape,
    embeddings: &[Var],
    feats: &OneHotFeatures,
    m_max: usize,
) -> Result<(Vec<Var>, usize), ReaderError> {
    if embeddings.len() != feats.chain_of.len() {
        return Err(ReaderError::WidthMismatch {
            what: "embeddings vs feature rows",
            left: embeddings.len(),
            right: feats.chain_of.len(),
        });
    }
    let mut overflow = 0;
    let mut out = Vec::with_capacity(embeddings.len());
    for (&e, chain) in embeddings.iter().zip(&feats.chain_of) {
        let mut bits = vec![0.0; m_max];
        match *chain {
            Some(c) if c < m_max => bits[c] = 1.0,
            Some(_) => overflow += 1,
            None => {}
        }
        if m_max == 0 {
            out.push(e);
            continue;
        }
        let suffix = tape.input(Tensor::vector(&bits));
        out.push(tape.concat(&[e, suffix], 0)?);
    }
    if overflow > 0 {
        log::warn!("{overflow} tokens belong to chains beyond the one-hot cap {m_max}");
    }
    Ok((out, overflow))
}

/// Candidate distribution computed from the document row at each sentence
/// boundary instead of the attention summary. One row per boundary.
pub fn sentence_probe(
    h_d: &Tensor,
    boundaries: &[usize],
    w_c: &Tensor,
) -> Result<Vec<Vec<f64>>, ReaderError> {
    if boundaries.windows(2).any(|w| w[0] > w[1]) {
        return Err(ReaderError::UnsortedBoundaries);
    }
    if h_d.cols() != w_c.rows() {
        return Err(ReaderError::WidthMismatch {
            what: "document rows vs output embeddings",
            left: h_d.cols(),
            right: w_c.rows(),
        });
    }
    let n = w_c.cols();
    boundaries
        .iter()
        .map(|&b| {
            if b >= h_d.rows() {
                return Err(ReaderError::BoundaryOutOfRange { index: b, len: h_d.rows() });
            }
            let row = h_d.row(b);
            let mut logits = vec![0.0; n];
            for (k, &hv) in row.iter().enumerate() {
                for (l, &wv) in logits.iter_mut().zip(w_c.row(k)) {
                    *l += hv * wv;
                }
            }
            Ok(softmax_values(&logits))
        })
        .collect()
}

/// Writes probe rows as a tab-separated table with a header of candidate
/// names and one line per sentence.
pub fn write_probe_table<W: Write>(
    mut w: W,
    sentences: &[String],
    candidates: &[String],
    rows: &[Vec<f64>],
) -> Result<(), ReaderError> {
    writeln!(w, "sentence\t{}", candidates.join("\t"))?;
    for (label, row) in sentences.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
        writeln!(w, "{label}\t{}", cells.join("\t"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn orthogonal_query_gives_uniform_attention() {
        let mut tape = Tape::new();
        let h_d = tape.input(matrix(&[&[1.0, 0.0], &[2.0, 0.0], &[-3.0, 0.0]]));
        let h_q = tape.input(Tensor::vector(&[0.0, 1.0]));
        let a = attention(&mut tape, h_q, h_d).unwrap();
        for &v in tape.value(a).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_row_attention_is_one() {
        let mut tape = Tape::new();
        let h_d = tape.input(matrix(&[&[0.3, -2.0]]));
        let h_q = tape.input(Tensor::vector(&[5.0, 1.0]));
        let a = attention(&mut tape, h_q, h_d).unwrap();
        assert_eq!(tape.value(a).data(), &[1.0]);
    }

    #[test]
    fn attention_width_mismatch() {
        let mut tape = Tape::new();
        let h_d = tape.input(matrix(&[&[0.3, -2.0]]));
        let h_q = tape.input(Tensor::vector(&[5.0, 1.0, 0.0]));
        assert!(matches!(attention(&mut tape, h_q, h_d), Err(ReaderError::WidthMismatch { .. })));
    }

    #[test]
    fn extractive_sums_occurrences() {
        let alpha = [0.1, 0.2, 0.3, 0.4];
        let tokens = [7, 9, 8, 9];
        assert!((answer_extractive(&alpha, &tokens, 9) - 0.6).abs() < 1e-15);
        assert_eq!(answer_extractive(&alpha, &tokens, 8), 0.3);
        assert_eq!(answer_extractive(&alpha, &tokens, 42), 0.0);
    }

    #[test]
    fn onehot_alpha_selects_row() {
        let mut store = ParamStore::new();
        let w = store
            .add("W_C", Tensor::matrix(2, 3, vec![1.0, 0.0, 2.0, 0.0, 1.0, -1.0]).unwrap())
            .unwrap();
        let cand = CandidateSet::new(vec![10, 11, 12], w, &store).unwrap();
        let mut tape = Tape::new();
        let h_d = tape.input(matrix(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let alpha = tape.input(Tensor::vector(&[0.0, 1.0]));
        let summary = tape.vecmat(alpha, h_d).unwrap();
        assert_eq!(tape.value(summary).data(), &[3.0, 4.0]);
        let (p, best) = answer_classify(&mut tape, &store, alpha, h_d, &cand).unwrap();
        let expected = softmax_values(&[3.0, 4.0, 2.0]);
        assert_eq!(tape.value(p).data(), expected.as_slice());
        assert_eq!(best, 1);
    }

    #[test]
    fn identical_columns_give_uniform_and_lowest_index() {
        let mut store = ParamStore::new();
        let w = store.add("W_C", Tensor::matrix(2, 3, vec![0.5, 0.5, 0.5, -1.0, -1.0, -1.0]).unwrap()).unwrap();
        let cand = CandidateSet::new(vec![1, 2, 3], w, &store).unwrap();
        let mut tape = Tape::new();
        let h_d = tape.input(matrix(&[&[1.0, 2.0], &[0.0, 4.0]]));
        let alpha = tape.input(Tensor::vector(&[0.25, 0.75]));
        let (p, best) = answer_classify(&mut tape, &store, alpha, h_d, &cand).unwrap();
        for &v in tape.value(p).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(best, 0);
    }

    #[test]
    fn candidate_validation() {
        let mut store = ParamStore::new();
        let w = store.add("W_C", Tensor::zeros(&[2, 2])).unwrap();
        assert!(CandidateSet::new(vec![1], w, &store).is_err());
        assert!(CandidateSet::new(vec![1, 1], w, &store).is_err());
        assert!(CandidateSet::new(vec![1, 2, 3], w, &store).is_err());
        assert!(CandidateSet::new(vec![1, 2], w, &store).is_ok());
    }

    #[test]
    fn onehot_suffixes() {
        let mut tape = Tape::new();
        let embs: Vec<Var> = (0..4).map(|i| tape.input(Tensor::vector(&[i as f64, 1.0]))).collect();
        let feats = OneHotFeatures {
            chains: 5,
            chain_of: vec![None, Some(2), Some(2), Some(7)],
        };
        let (out, overflow) = append_onehot(&mut tape, &embs, &feats, 5).unwrap();
        assert_eq!(overflow, 1);
        assert_eq!(tape.value(out[0]).data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(tape.value(out[1]).data()[2..], [0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(tape.value(out[1]).data()[2..], tape.value(out[2]).data()[2..]);
        assert_eq!(tape.value(out[3]).data()[2..], [0.0; 5]);
    }

    #[test]
    fn probe_rows_are_distributions() {
        let h_d = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let w_c = Tensor::matrix(2, 3, vec![1.0, 0.0, -1.0, 0.0, 2.0, 0.5]).unwrap();
        let rows = sentence_probe(&h_d, &[0, 2], &w_c).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(sentence_probe(&h_d, &[3], &w_c), Err(ReaderError::BoundaryOutOfRange { .. })));
        assert!(matches!(sentence_probe(&h_d, &[2, 1], &w_c), Err(ReaderError::UnsortedBoundaries)));

        let mut buf = Vec::new();
        write_probe_table(&mut buf, &["s1".into(), "s2".into()], &["a".into(), "b".into(), "c".into()], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sentence\ta\tb\tc");
        assert_eq!(lines[1].split('\t').count(), 4);
        assert!(lines[1].split('\t').nth(1).unwrap().len() == 6);
    }
}
