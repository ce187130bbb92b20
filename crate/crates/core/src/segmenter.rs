//! Greedy left-to-right segmentation driven by the language model.
//!
//! Token `i` joins the current segment when
//! `P(w_i) - max(2^a P(w_{i-1} w_i), 3^a P(w_{i-2} w_{i-1} w_i)) <= t`,
//! where window probabilities are chain-rule joints with no outside context.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::ngram_lm::MknModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// 1-based segment id per token.
    pub ids: Vec<usize>,
    /// Token span of each segment, in order.
    pub spans: Vec<Range<usize>>,
    /// `ln(n^alpha * P(segment))` per segment, using the segmentation alpha.
    pub log_scores: Vec<f64>,
}

impl Segmentation {
    /// Builds spans and scores from per-token ids.
    pub fn from_ids(model: &MknModel, tokens: &[String], ids: Vec<usize>, alpha: f64) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        if ids.len() != tokens.len() {
            return Err(Error::LengthMismatch {
                expected: tokens.len(),
                got: ids.len(),
            });
        }
        if !is_contiguous(&ids) {
            return Err(Error::InvalidArgument("segment ids are not contiguous from 1".into()));
        }
        let mut spans: Vec<Range<usize>> = Vec::new();
        for (i, &id) in ids.iter().enumerate() {
            if id > spans.len() {
                spans.push(i..i + 1);
            } else {
                spans.last_mut().expect("id 1 opens the first span").end = i + 1;
            }
        }
        let token_ids = model.ids(tokens);
        let log_scores = spans
            .iter()
            .map(|s| model.log_length_normalized_score_ids(&token_ids[s.clone()], alpha))
            .collect();
        Ok(Self {
            ids,
            spans,
            log_scores,
        })
    }

    pub fn num_segments(&self) -> usize {
        self.spans.len()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Linear length-normalized score of segment `index` (0-based).
    pub fn score(&self, index: usize) -> f64 {
        self.log_scores[index].exp()
    }

    /// Index of the highest-scoring segment, earliest on ties.
    pub fn best_segment(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.log_scores.iter().enumerate().skip(1) {
            if s > self.log_scores[best] {
                best = i;
            }
        }
        best
    }
}

/// Ids start at 1 and grow by at most one per token.
pub fn is_contiguous(ids: &[usize]) -> bool {
    match ids.first() {
        Some(1) => ids.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1),
        _ => false,
    }
}

/// The split/join statistic for token `i >= 1` (0-based).
pub fn boundary_score(model: &MknModel, ids: &[u32], i: usize, alpha: f64) -> f64 {
    let unigram = model.prob_id(ids[i], &[]);
    let left2 = alpha * 2f64.ln() + model.log_sequence_prob_ids(&ids[i - 1..=i]);
    let left = if i >= 2 {
        let left3 = alpha * 3f64.ln() + model.log_sequence_prob_ids(&ids[i - 2..=i]);
        left2.max(left3)
    } else {
        left2
    };
    unigram - left.exp()
}

/// All boundary statistics of a title, one per token after the first.
pub fn boundary_scores(model: &MknModel, tokens: &[String], alpha: f64) -> Vec<f64> {
    let ids = model.ids(tokens);
    (1..ids.len()).map(|i| boundary_score(model, &ids, i, alpha)).collect()
}

pub fn segment(model: &MknModel, tokens: &[String], alpha: f64, t: f64) -> Result<Segmentation> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !alpha.is_finite() || !t.is_finite() {
        return Err(Error::InvalidArgument("alpha and t must be finite".into()));
    }
    let token_ids = model.ids(tokens);
    let mut ids = Vec::with_capacity(tokens.len());
    ids.push(1);
    for i in 1..tokens.len() {
        let det = boundary_score(model, &token_ids, i, alpha);
        let prev = ids[i - 1];
        ids.push(if det <= t { prev } else { prev + 1 });
    }
    Segmentation::from_ids(model, tokens, ids, alpha)
}
