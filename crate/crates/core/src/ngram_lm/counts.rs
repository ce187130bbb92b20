use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::text_norm::TokenSequence;

pub const PAD: &str = "<s>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

const SHARD_LINES: usize = 4096;

/// Token ids: `<s>` is 0, `<unk>` is 1, the remaining tokens follow in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub(crate) fn from_sorted_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut tokens = vec![PAD.to_owned(), UNK.to_owned()];
        tokens.extend(words.into_iter().filter(|w| w != PAD && w != UNK));
        Self::from_id_order(tokens)
    }

    pub(crate) fn from_id_order(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Maps out-of-vocabulary tokens to `<unk>`.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Ids a model can predict: everything except the start pad.
    pub fn predictable(&self) -> impl Iterator<Item = u32> + '_ {
        1..self.tokens.len() as u32
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub(crate) struct ShardCounts {
    pub unigrams: HashMap<u32, u64>,
    pub bigrams: HashMap<(u32, u32), u64>,
    pub trigrams: HashMap<(u32, u32, u32), u64>,
}

impl ShardCounts {
    fn add_line(&mut self, ids: &[u32]) {
        let padded: Vec<u32> = [PAD_ID, PAD_ID].into_iter().chain(ids.iter().copied()).collect();
        for &w in &padded {
            *self.unigrams.entry(w).or_default() += 1;
        }
        for w in padded.windows(2) {
            *self.bigrams.entry((w[0], w[1])).or_default() += 1;
        }
        for w in padded.windows(3) {
            *self.trigrams.entry((w[0], w[1], w[2])).or_default() += 1;
        }
    }

    /// Commutative, associative addition of partial counts.
    pub fn merge(mut self, other: ShardCounts) -> ShardCounts {
        for (k, v) in other.unigrams {
            *self.unigrams.entry(k).or_default() += v;
        }
        for (k, v) in other.bigrams {
            *self.bigrams.entry(k).or_default() += v;
        }
        for (k, v) in other.trigrams {
            *self.trigrams.entry(k).or_default() += v;
        }
        self
    }
}

/// Raw and continuation counts for orders 1-3 plus count-of-counts.
///
/// `count_of_counts[o][k-1]` is the number of order-`o+1` n-grams whose
/// count (raw for trigrams, continuation for lower orders) equals `k`,
/// for `k` in 1..=4. The start pad is never counted as a predicted unigram.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub vocab: Vocab,
    pub unigrams: Vec<u64>,
    pub bigrams: HashMap<(u32, u32), u64>,
    pub trigrams: HashMap<(u32, u32, u32), u64>,
    pub unigram_continuation: Vec<u64>,
    pub bigram_continuation: HashMap<(u32, u32), u64>,
    pub count_of_counts: [[u64; 4]; 3],
    pub unk_singletons: bool,
}

impl CountTable {
    pub(crate) fn from_raw(vocab: Vocab, raw: ShardCounts, unk_singletons: bool) -> Self {
        let mut unigrams = vec![0u64; vocab.len()];
        for (id, c) in raw.unigrams {
            unigrams[id as usize] = c;
        }

        let mut bigram_continuation: HashMap<(u32, u32), u64> = HashMap::new();
        for &(_, v, w) in raw.trigrams.keys() {
            *bigram_continuation.entry((v, w)).or_default() += 1;
        }
        let mut unigram_continuation = vec![0u64; vocab.len()];
        for &(_, w) in raw.bigrams.keys() {
            unigram_continuation[w as usize] += 1;
        }

        let mut count_of_counts = [[0u64; 4]; 3];
        let mut tally = |order: usize, c: u64| {
            if (1..=4).contains(&c) {
                count_of_counts[order][c as usize - 1] += 1;
            }
        };
        for (id, &c) in unigram_continuation.iter().enumerate() {
            if id as u32 != PAD_ID {
                tally(0, c);
            }
        }
        for &c in bigram_continuation.values() {
            tally(1, c);
        }
        for &c in raw.trigrams.values() {
            tally(2, c);
        }

        Self {
            vocab,
            unigrams,
            bigrams: raw.bigrams,
            trigrams: raw.trigrams,
            unigram_continuation,
            bigram_continuation,
            count_of_counts,
            unk_singletons,
        }
    }

    pub fn unigram(&self, token: &str) -> u64 {
        self.vocab
            .get(token)
            .map(|id| self.unigrams[id as usize])
            .unwrap_or(0)
    }

    pub fn bigram(&self, a: &str, b: &str) -> u64 {
        match (self.vocab.get(a), self.vocab.get(b)) {
            (Some(a), Some(b)) => self.bigrams.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn trigram(&self, a: &str, b: &str, c: &str) -> u64 {
        match (self.vocab.get(a), self.vocab.get(b), self.vocab.get(c)) {
            (Some(a), Some(b), Some(c)) => self.trigrams.get(&(a, b, c)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn unigram_continuation(&self, token: &str) -> u64 {
        self.vocab
            .get(token)
            .map(|id| self.unigram_continuation[id as usize])
            .unwrap_or(0)
    }

    pub fn bigram_continuation(&self, a: &str, b: &str) -> u64 {
        match (self.vocab.get(a), self.vocab.get(b)) {
            (Some(a), Some(b)) => self.bigram_continuation.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }
}

/// Counts with every token kept in the vocabulary.
pub fn count_ngrams(corpus: &[TokenSequence]) -> Result<CountTable> {
    count_ngrams_with(corpus, false)
}

/// Counts the corpus in shards and merges them. With `unk_singletons`,
/// tokens seen exactly once are counted as `<unk>`.
pub fn count_ngrams_with(corpus: &[TokenSequence], unk_singletons: bool) -> Result<CountTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let freq: HashMap<&str, u64> = corpus
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<&str, u64>, line| {
            for t in &line.tokens {
                *acc.entry(t.as_str()).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });

    let words: BTreeSet<String> = freq
        .iter()
        .filter(|(_, &c)| !unk_singletons || c > 1)
        .map(|(w, _)| (*w).to_owned())
        .collect();
    let vocab = Vocab::from_sorted_words(words);

    let raw = corpus
        .par_chunks(SHARD_LINES)
        .map(|chunk| {
            let mut shard = ShardCounts::default();
            for line in chunk {
                let ids: Vec<u32> = line.tokens.iter().map(|t| vocab.id(t)).collect();
                shard.add_line(&ids);
            }
            shard
        })
        .reduce(ShardCounts::default, ShardCounts::merge);

    Ok(CountTable::from_raw(vocab, raw, unk_singletons))
}
