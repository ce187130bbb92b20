use std::collections::HashMap;

use super::counts::{count_ngrams_with, CountTable, Vocab, PAD_ID, UNK_ID};
use super::discounts::{estimate_discounts, Discounts};
use crate::error::{Error, Result};
use crate::text_norm::TokenSequence;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainOptions {
    /// Count tokens seen once in training as `<unk>`.
    pub unk_singletons: bool,
}

/// Integer tallies only, so results do not depend on hash-map order.
#[derive(Debug, Clone, Copy, Default)]
struct ContextStats {
    total: u64,
    /// Continuations seen once, twice, and three or more times.
    buckets: [u64; 3],
}

impl ContextStats {
    fn add(&mut self, count: u64) {
        self.total += count;
        if count > 0 {
            self.buckets[(count.min(3) - 1) as usize] += 1;
        }
    }

    /// Discount mass taken from the context's continuations.
    fn mass(&self, d: &Discounts) -> f64 {
        d.d1 * self.buckets[0] as f64 + d.d2 * self.buckets[1] as f64 + d.d3plus * self.buckets[2] as f64
    }
}

/// A trained, immutable interpolated modified-Kneser-Ney trigram model.
#[derive(Debug, Clone)]
pub struct MknModel {
    counts: CountTable,
    discounts: [Discounts; 3],
    unigram: ContextStats,
    bigram_ctx: HashMap<u32, ContextStats>,
    trigram_ctx: HashMap<(u32, u32), ContextStats>,
    n_predictable: f64,
}

impl MknModel {
    pub fn train(corpus: &[TokenSequence], opts: TrainOptions) -> Result<Self> {
        let counts = count_ngrams_with(corpus, opts.unk_singletons)?;
        Ok(Self::from_counts(counts))
    }

    pub fn from_counts(counts: CountTable) -> Self {
        let discounts = estimate_discounts(&counts);
        Self::with_discounts(counts, discounts)
    }

    pub fn with_discounts(counts: CountTable, discounts: [Discounts; 3]) -> Self {
        let mut unigram = ContextStats::default();
        for (id, &c) in counts.unigram_continuation.iter().enumerate() {
            if id as u32 != PAD_ID && c > 0 {
                unigram.add(c);
            }
        }
        let mut bigram_ctx: HashMap<u32, ContextStats> = HashMap::new();
        for (&(v, _), &c) in &counts.bigram_continuation {
            bigram_ctx.entry(v).or_default().add(c);
        }
        let mut trigram_ctx: HashMap<(u32, u32), ContextStats> = HashMap::new();
        for (&(u, v, _), &c) in &counts.trigrams {
            trigram_ctx.entry((u, v)).or_default().add(c);
        }
        let n_predictable = (counts.vocab.len() - 1) as f64;
        Self {
            counts,
            discounts,
            unigram,
            bigram_ctx,
            trigram_ctx,
            n_predictable,
        }
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }

    pub fn discounts(&self) -> &[Discounts; 3] {
        &self.discounts
    }

    pub fn vocab(&self) -> &Vocab {
        &self.counts.vocab
    }

    /// Maps tokens to ids, OOV to `<unk>`.
    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.counts.vocab.id(t.as_ref())).collect()
    }

    fn unigram_prob(&self, w: u32) -> f64 {
        let uniform = 1.0 / self.n_predictable;
        if self.unigram.total == 0 {
            return uniform;
        }
        let c = self.counts.unigram_continuation[w as usize];
        let discounted = (c as f64 - self.discounts[0].for_count(c)).max(0.0);
        (discounted + self.unigram.mass(&self.discounts[0]) * uniform) / self.unigram.total as f64
    }

    fn bigram_prob(&self, v: u32, w: u32) -> f64 {
        let lower = self.unigram_prob(w);
        match self.bigram_ctx.get(&v) {
            Some(ctx) if ctx.total > 0 => {
                let c = self.counts.bigram_continuation.get(&(v, w)).copied().unwrap_or(0);
                let discounted = (c as f64 - self.discounts[1].for_count(c)).max(0.0);
                (discounted + ctx.mass(&self.discounts[1]) * lower) / ctx.total as f64
            }
            _ => lower,
        }
    }

    fn trigram_prob(&self, u: u32, v: u32, w: u32) -> f64 {
        let lower = self.bigram_prob(v, w);
        match self.trigram_ctx.get(&(u, v)) {
            Some(ctx) if ctx.total > 0 => {
                let c = self.counts.trigrams.get(&(u, v, w)).copied().unwrap_or(0);
                let discounted = (c as f64 - self.discounts[2].for_count(c)).max(0.0);
                (discounted + ctx.mass(&self.discounts[2]) * lower) / ctx.total as f64
            }
            _ => lower,
        }
    }

    /// Linear probability of id `w` after up to two context ids (longer
    /// contexts are truncated to the last two).
    pub(crate) fn prob_id(&self, w: u32, context: &[u32]) -> f64 {
        let w = if w == PAD_ID { UNK_ID } else { w };
        match *context {
            [] => self.unigram_prob(w),
            [v] => self.bigram_prob(v, w),
            [.., u, v] => self.trigram_prob(u, v, w),
        }
    }

    pub fn prob<S: AsRef<str>>(&self, word: &str, context: &[S]) -> f64 {
        let ctx = self.ids(context);
        self.prob_id(self.counts.vocab.id(word), &ctx)
    }

    pub fn log_prob<S: AsRef<str>>(&self, word: &str, context: &[S]) -> f64 {
        self.prob(word, context).ln()
    }

    /// Chain-rule log probability with context drawn only from `ids` itself.
    pub(crate) fn log_sequence_prob_ids(&self, ids: &[u32]) -> f64 {
        (0..ids.len())
            .map(|i| self.prob_id(ids[i], &ids[i.saturating_sub(2)..i]).ln())
            .sum()
    }

    pub fn log_sequence_prob<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(self.log_sequence_prob_ids(&self.ids(tokens)))
    }

    pub fn sequence_prob<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        self.log_sequence_prob(tokens).map(f64::exp)
    }

    /// `ln(n^alpha * P(tokens))`.
    pub fn log_length_normalized_score<S: AsRef<str>>(&self, tokens: &[S], alpha: f64) -> Result<f64> {
        let lp = self.log_sequence_prob(tokens)?;
        Ok(alpha * (tokens.len() as f64).ln() + lp)
    }

    pub(crate) fn log_length_normalized_score_ids(&self, ids: &[u32], alpha: f64) -> f64 {
        alpha * (ids.len() as f64).ln() + self.log_sequence_prob_ids(ids)
    }

    /// `n^alpha * P(tokens)` for a sequence of `n` tokens.
    pub fn length_normalized_score<S: AsRef<str>>(&self, tokens: &[S], alpha: f64) -> Result<f64> {
        self.log_length_normalized_score(tokens, alpha).map(f64::exp)
    }
}
