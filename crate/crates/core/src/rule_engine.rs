//! Composition of the four latent processes into a transferable rule:
//! segmentation, segment mapping, segment retention and intra-segment
//! retention. Labels follow `y = concat(m_j * r_j)` over segments `j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::ngram_lm::MknModel;
use crate::segment_mapper::{map_segments, sample_mapping_params_with, uniform, MappingParams, SegmentMap};
use crate::segmenter::{segment, Segmentation};
use crate::text_norm::TokenSequence;

/// Per-token keep (1) / drop (0) bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<u8>);

impl LabelVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!("label bit must be 0 or 1, got {b}")));
        }
        Ok(Self(bits))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of retained tokens.
    pub fn ones_count(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

/// How the tokens of a retained segment are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetentionMode {
    Prefix,
    Suffix,
    Substring,
    All,
}

impl RetentionMode {
    pub const EVERY: [RetentionMode; 4] = [
        RetentionMode::Prefix,
        RetentionMode::Suffix,
        RetentionMode::Substring,
        RetentionMode::All,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "prefix" => Ok(Self::Prefix),
            "suffix" => Ok(Self::Suffix),
            "substring" => Ok(Self::Substring),
            "all" => Ok(Self::All),
            other => Err(Error::InvalidArgument(format!("unknown retention mode {other:?}"))),
        }
    }
}

/// One compression task. Retention bits and modes are indexed by bucket
/// label `l` at position `l - 1`, so a rule applies to any product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionRule {
    pub category: String,
    pub seed: u64,
    pub alpha: f64,
    pub t: f64,
    pub mapping: MappingParams,
    pub retain: Vec<u8>,
    pub modes: Vec<RetentionMode>,
}

/// Ranges and choices a rule is drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSampling {
    pub dim: usize,
    pub buckets: usize,
    pub alpha_range: (f64, f64),
    pub t_range: (f64, f64),
    pub modes: Vec<RetentionMode>,
}

impl CompressionRule {
    pub fn buckets(&self) -> usize {
        self.mapping.buckets
    }

    pub fn validate(&self) -> Result<()> {
        self.mapping.validate()?;
        let b = self.buckets();
        if self.retain.len() != b || self.modes.len() != b {
            return Err(Error::InvalidArgument(format!(
                "rule tables must have {b} entries, got {} and {}",
                self.retain.len(),
                self.modes.len()
            )));
        }
        if self.retain.iter().any(|&r| r > 1) || !self.alpha.is_finite() || !self.t.is_finite() {
            return Err(Error::InvalidArgument("invalid retention bit or threshold".into()));
        }
        Ok(())
    }

    pub fn retains(&self, label: usize) -> u8 {
        self.retain[label - 1]
    }

    pub fn mode(&self, label: usize) -> RetentionMode {
        self.modes[label - 1]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("rule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rule: Self = serde_json::from_str(s)?;
        rule.validate()?;
        Ok(rule)
    }
}

pub fn sample_rule(category: &str, seed: u64, cfg: &RuleSampling) -> Result<CompressionRule> {
    if cfg.modes.is_empty() {
        return Err(Error::InvalidArgument("at least one retention mode is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mapping = sample_mapping_params_with(&mut rng, cfg.dim, cfg.buckets, cfg.alpha_range)?;
    let alpha = uniform(&mut rng, cfg.alpha_range)?;
    let t = uniform(&mut rng, cfg.t_range)?;
    let retain = (0..cfg.buckets).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let modes = (0..cfg.buckets)
        .map(|_| cfg.modes[rng.random_range(0..cfg.modes.len())])
        .collect();
    Ok(CompressionRule {
        category: category.to_owned(),
        seed,
        alpha,
        t,
        mapping,
        retain,
        modes,
    })
}

/// Per-segment keep bits from the rule table, with the highest-scoring
/// segment always kept.
pub fn retain_segments(seg: &Segmentation, smap: &SegmentMap, rule: &CompressionRule) -> Vec<u8> {
    let mut r: Vec<u8> = smap.segment_labels.iter().map(|&l| rule.retains(l)).collect();
    if !r.is_empty() {
        r[seg.best_segment()] = 1;
    }
    r
}

/// Token mask of a segment: the prefix, suffix or contiguous span with the
/// highest length-normalized score (shortest, then leftmost on ties).
pub fn intra_retention(
    segment_tokens: &[String],
    mode: RetentionMode,
    model: &MknModel,
    alpha: f64,
) -> Vec<u8> {
    let n = segment_tokens.len();
    if mode == RetentionMode::All || n <= 1 {
        return vec![1; n];
    }
    let ids = model.ids(segment_tokens);
    let mut best: Option<(f64, usize, usize)> = None;
    for len in 1..=n {
        let starts = match mode {
            RetentionMode::Prefix => 0..1,
            RetentionMode::Suffix => n - len..n - len + 1,
            _ => 0..n - len + 1,
        };
        for start in starts {
            let score = model.log_length_normalized_score_ids(&ids[start..start + len], alpha);
            if best.map_or(true, |(b, _, _)| score > b) {
                best = Some((score, start, len));
            }
        }
    }
    let (_, start, len) = best.expect("non-empty segment has a span");
    (0..n).map(|i| u8::from((start..start + len).contains(&i))).collect()
}

/// Token bit = mask bit x segment bit, concatenated in token order.
pub fn compose_labels(seg: &Segmentation, r: &[u8], masks: &[Vec<u8>]) -> Result<LabelVector> {
    let k = seg.num_segments();
    if r.len() != k || masks.len() != k {
        return Err(Error::CoverageMismatch(format!(
            "{k} segments but {} retention bits and {} masks",
            r.len(),
            masks.len()
        )));
    }
    let mut bits = Vec::with_capacity(seg.len());
    for (j, (span, mask)) in seg.spans.iter().zip(masks).enumerate() {
        if mask.len() != span.len() {
            return Err(Error::CoverageMismatch(format!(
                "segment {} has {} tokens but a mask of {}",
                j + 1,
                span.len(),
                mask.len()
            )));
        }
        bits.extend(mask.iter().map(|&m| m * r[j]));
    }
    LabelVector::new(bits)
}

/// Every intermediate of one rule application.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleTrace {
    pub segmentation: Segmentation,
    pub map: SegmentMap,
    pub retained: Vec<u8>,
    pub masks: Vec<Vec<u8>>,
    pub labels: LabelVector,
}

pub fn trace_rule(
    rule: &CompressionRule,
    product: &TokenSequence,
    model: &MknModel,
    table: &EmbeddingTable,
) -> Result<RuleTrace> {
    let tokens = product.as_slice();
    let segmentation = segment(model, tokens, rule.alpha, rule.t)?;
    let map = map_segments(tokens, &segmentation, model, table, &rule.mapping)?;
    let retained = retain_segments(&segmentation, &map, rule);
    let masks: Vec<Vec<u8>> = segmentation
        .spans
        .iter()
        .enumerate()
        .map(|(j, span)| {
            if retained[j] == 1 {
                let mode = rule.mode(map.segment_labels[j]);
                intra_retention(&tokens[span.clone()], mode, model, rule.alpha)
            } else {
                vec![0; span.len()]
            }
        })
        .collect();
    let labels = compose_labels(&segmentation, &retained, &masks)?;
    Ok(RuleTrace {
        segmentation,
        map,
        retained,
        masks,
        labels,
    })
}

/// Segment, map, retain, trim, and compose.
pub fn apply_rule(
    rule: &CompressionRule,
    product: &TokenSequence,
    model: &MknModel,
    table: &EmbeddingTable,
) -> Result<LabelVector> {
    trace_rule(rule, product, model, table).map(|t| t.labels)
}

/// The same rule applied to an example and a test product.
pub fn transfer_rule(
    rule: &CompressionRule,
    example: &TokenSequence,
    test: &TokenSequence,
    model: &MknModel,
    table: &EmbeddingTable,
) -> Result<(LabelVector, LabelVector)> {
    Ok((
        apply_rule(rule, example, model, table)?,
        apply_rule(rule, test, model, table)?,
    ))
}
