//! Meta-training and segment-rank dataset generation, plus the JSON-lines
//! readers and writers for every dataset file.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::ngram_lm::MknModel;
use crate::rule_engine::{sample_rule, transfer_rule, LabelVector, RuleSampling};
use crate::segment_mapper::descending_ranks;
use crate::segmenter::{boundary_scores, segment};
use crate::text_norm::{normalize, TokenSequence};

/// Rule resamples allowed for a degenerate pair before it is skipped.
pub const MAX_RESAMPLES: u32 = 5;

/// Schema check applied to every row read from disk.
pub trait Row {
    fn check(&self) -> std::result::Result<(), String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaExample {
    pub x_ex: Vec<String>,
    pub y_ex: LabelVector,
    pub x_ts: Vec<String>,
    pub y_ts: LabelVector,
    pub category: String,
    pub rule_id: String,
    pub seed: u64,
}

impl Row for MetaExample {
    fn check(&self) -> std::result::Result<(), String> {
        if self.x_ex.is_empty() || self.x_ts.is_empty() {
            return Err("empty product".into());
        }
        if self.x_ex.len() != self.y_ex.len() {
            return Err(format!(
                "x_ex has {} tokens but y_ex has {} labels",
                self.x_ex.len(),
                self.y_ex.len()
            ));
        }
        if self.x_ts.len() != self.y_ts.len() {
            return Err(format!(
                "x_ts has {} tokens but y_ts has {} labels",
                self.x_ts.len(),
                self.y_ts.len()
            ));
        }
        if self.y_ex.ones_count() == 0 || self.y_ts.ones_count() == 0 {
            return Err("label vector keeps no token".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankExample {
    pub tokens: Vec<String>,
    pub ranks: Vec<usize>,
}

impl Row for RankExample {
    fn check(&self) -> std::result::Result<(), String> {
        if self.tokens.len() != self.ranks.len() {
            return Err(format!(
                "{} tokens but {} ranks",
                self.tokens.len(),
                self.ranks.len()
            ));
        }
        if self.tokens.is_empty() {
            return Err("empty product".into());
        }
        if self.ranks.contains(&0) {
            return Err("ranks start at 1".into());
        }
        Ok(())
    }
}

/// Any row carrying test labels: meta rows and prediction rows both fit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub y_ts: LabelVector,
}

impl Row for LabelRow {
    fn check(&self) -> std::result::Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductRow {
    pub title: String,
    pub category: String,
}

impl Row for ProductRow {
    fn check(&self) -> std::result::Result<(), String> {
        normalize(&self.title).map(|_| ()).map_err(|e| e.to_string())
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(rows: &[T], mut w: W) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one JSON object per line; blank lines are ignored.
pub fn read_jsonl<T: DeserializeOwned + Row, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| Error::MalformedRow { line: i + 1, msg };
        let row: T = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        row.check().map_err(malformed)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Normalized products grouped by category, categories in sorted order and
/// products in file order.
pub fn group_products(rows: &[ProductRow]) -> Result<BTreeMap<String, Vec<TokenSequence>>> {
    let mut groups: BTreeMap<String, Vec<TokenSequence>> = BTreeMap::new();
    for row in rows {
        groups
            .entry(row.category.clone())
            .or_default()
            .push(normalize(&row.title)?);
    }
    Ok(groups)
}

/// SplitMix64 finalizer chained over `parts`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// `count` distinct unordered pairs of `0..n`, each oriented at random
/// (the first index is the example). Returns every pair when fewer exist.
pub fn sample_pairs(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    let chosen: Vec<(usize, usize)> = if count * 2 >= total {
        let mut all: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        all.shuffle(rng);
        all.truncate(count);
        all
    } else {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j && seen.insert((i.min(j), i.max(j))) {
                out.push((i.min(j), i.max(j)));
            }
        }
        out
    };
    chosen
        .into_iter()
        .map(|(i, j)| if rng.random_bool(0.5) { (j, i) } else { (i, j) })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    pub n_pairs: usize,
    pub rules_per_pair: usize,
    pub seed: u64,
    pub sampling: RuleSampling,
    /// Treat pairs where both sides keep every token as degenerate.
    pub reject_all_ones: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenStats {
    pub rows: usize,
    pub resampled: usize,
    pub skipped: usize,
}

fn is_degenerate(y_ex: &LabelVector, y_ts: &LabelVector, reject_all_ones: bool) -> bool {
    let keeps_nothing = y_ex.ones_count() == 0 || y_ts.ones_count() == 0;
    let keeps_all = y_ex.ones_count() == y_ex.len() && y_ts.ones_count() == y_ts.len();
    keeps_nothing || (reject_all_ones && keeps_all)
}

/// Seed of rule `rule` for pair `pair` of category index `cat`, after
/// `attempt` resamples.
pub fn rule_seed(base: u64, cat: usize, pair: usize, rule: usize, attempt: u32) -> u64 {
    derive_seed(base, &[1, cat as u64, pair as u64, rule as u64, attempt as u64])
}

pub fn generate_meta_dataset(
    products: &BTreeMap<String, Vec<TokenSequence>>,
    cfg: &MetaConfig,
    model: &MknModel,
    table: &EmbeddingTable,
) -> Result<(Vec<MetaExample>, GenStats)> {
    for (category, items) in products {
        if items.len() < 2 {
            return Err(Error::CategoryTooSmall {
                category: category.clone(),
                size: items.len(),
            });
        }
    }

    let mut jobs = Vec::new();
    for (cat, (category, items)) in products.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0, cat as u64]));
        let pairs = sample_pairs(items.len(), cfg.n_pairs, &mut rng);
        if pairs.len() < cfg.n_pairs {
            warn!(
                "category {category:?} has only {} distinct pairs, {} requested",
                pairs.len(),
                cfg.n_pairs
            );
        }
        for (p, (i, j)) in pairs.into_iter().enumerate() {
            jobs.push((cat, category, p, &items[i], &items[j]));
        }
    }

    let per_pair: Vec<Result<(Vec<MetaExample>, GenStats)>> = jobs
        .par_iter()
        .map(|&(cat, category, pair, ex, ts)| {
            let mut rows = Vec::with_capacity(cfg.rules_per_pair);
            let mut stats = GenStats::default();
            for r in 0..cfg.rules_per_pair {
                let mut accepted = None;
                for attempt in 0..=MAX_RESAMPLES {
                    let seed = rule_seed(cfg.seed, cat, pair, r, attempt);
                    let rule = sample_rule(category, seed, &cfg.sampling)?;
                    let (y_ex, y_ts) = transfer_rule(&rule, ex, ts, model, table)?;
                    if !is_degenerate(&y_ex, &y_ts, cfg.reject_all_ones) {
                        accepted = Some((seed, y_ex, y_ts));
                        break;
                    }
                    stats.resampled += 1;
                }
                match accepted {
                    Some((seed, y_ex, y_ts)) => {
                        rows.push(MetaExample {
                            x_ex: ex.tokens.clone(),
                            y_ex,
                            x_ts: ts.tokens.clone(),
                            y_ts,
                            category: category.clone(),
                            rule_id: format!("{category}/{pair}/{r}"),
                            seed,
                        });
                        stats.rows += 1;
                    }
                    None => stats.skipped += 1,
                }
            }
            Ok((rows, stats))
        })
        .collect();

    let mut rows = Vec::new();
    let mut stats = GenStats::default();
    for result in per_pair {
        let (r, s) = result?;
        rows.extend(r);
        stats.rows += s.rows;
        stats.resampled += s.resampled;
        stats.skipped += s.skipped;
    }
    if stats.skipped > 0 {
        info!("skipped {} degenerate rules after {MAX_RESAMPLES} resamples", stats.skipped);
    }
    Ok((rows, stats))
}

/// Per-token rank of its segment by length-normalized likelihood
/// (1 = most likely, ties to the earlier segment), clamped to `buckets`.
pub fn rank_example(
    product: &TokenSequence,
    model: &MknModel,
    buckets: usize,
    alpha: f64,
    t: f64,
) -> Result<RankExample> {
    if buckets == 0 {
        return Err(Error::InvalidArgument("bucket count must be at least 1".into()));
    }
    let seg = segment(model, product.as_slice(), alpha, t)?;
    let segment_ranks: Vec<usize> = descending_ranks(&seg.log_scores)
        .into_iter()
        .map(|r| (r + 1).min(buckets))
        .collect();
    Ok(RankExample {
        tokens: product.tokens.clone(),
        ranks: seg.ids.iter().map(|&id| segment_ranks[id - 1]).collect(),
    })
}

pub fn generate_rank_dataset(
    products: &[TokenSequence],
    model: &MknModel,
    buckets: usize,
    alpha: f64,
    t: f64,
) -> Result<Vec<RankExample>> {
    products
        .par_iter()
        .map(|p| rank_example(p, model, buckets, alpha, t))
        .collect()
}

/// Nearest-rank percentile of the boundary statistic over `products`,
/// pooled across five alphas spanning `alpha_range`.
pub fn empirical_threshold_range(
    model: &MknModel,
    products: &[&TokenSequence],
    alpha_range: (f64, f64),
    percentiles: (f64, f64),
) -> (f64, f64) {
    let (lo, hi) = alpha_range;
    let alphas: Vec<f64> = (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect();
    let mut dets: Vec<f64> = products
        .par_iter()
        .flat_map_iter(|p| {
            alphas
                .iter()
                .flat_map(|&a| boundary_scores(model, p.as_slice(), a))
                .collect::<Vec<_>>()
        })
        .collect();
    if dets.is_empty() {
        return (0.0, 0.0);
    }
    dets.sort_by(f64::total_cmp);
    let pick = |q: f64| {
        let rank = ((q / 100.0) * dets.len() as f64).ceil().max(1.0) as usize;
        dets[rank.min(dets.len()) - 1]
    };
    (pick(percentiles.0), pick(percentiles.1))
}
