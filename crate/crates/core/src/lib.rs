//! Unsupervised generation of 1-shot extractive title-compression tasks.
//!
//! A task is a [`rule_engine::CompressionRule`]: a sampled composition of
//! four latent processes (segmentation, segment mapping, segment retention
//! and intra-segment retention). Applying one rule to two products of the
//! same category yields a coherent pair of compressions, which becomes one
//! [`task_dataset::MetaExample`].
//!
//! The crate also ships a training-free prototypical-network meta-learner
//! ([`protonet`]) and token-level evaluation ([`metrics`]).

pub mod cli;
pub mod embeddings;
pub mod error;
pub mod metrics;
pub mod ngram_lm;
pub mod protonet;
pub mod rule_engine;
pub mod segment_mapper;
pub mod segmenter;
pub mod synth;
pub mod task_dataset;
pub mod text_norm;

pub use error::{Error, Result};
pub use ngram_lm::{CountTable, Discounts, MknModel};
pub use rule_engine::{CompressionRule, LabelVector, RetentionMode};
pub use segmenter::Segmentation;
pub use task_dataset::MetaExample;
pub use text_norm::TokenSequence;
