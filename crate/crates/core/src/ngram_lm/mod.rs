//! Interpolated modified-Kneser-Ney trigram language model.
//!
//! Lines are padded with two sentence-start symbols and no end symbol.
//! The highest order is estimated from raw trigram counts; the bigram and
//! unigram orders use continuation counts (number of distinct left
//! extensions). Each order carries three discounts, for counts 1, 2 and 3+.

mod corpus;
mod counts;
mod discounts;
mod io;
mod model;

pub use corpus::{read_corpus, sample_training_corpus, WeightedQuery};
pub use counts::{count_ngrams, count_ngrams_with, CountTable, Vocab, PAD, PAD_ID, UNK, UNK_ID};
pub use discounts::{estimate_discounts, Discounts, FALLBACK_DISCOUNT};
pub use model::{MknModel, TrainOptions};
