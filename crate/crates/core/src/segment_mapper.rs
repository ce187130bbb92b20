//! Maps segments to rank buckets `1..=B` by a random linear projection of
//! `[centroid * theta_a (2 values), length-normalized likelihood, position]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::ngram_lm::MknModel;
use crate::segmenter::Segmentation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingParams {
    /// `d x 2` projection of the segment centroid.
    pub theta_a: Vec<[f64; 2]>,
    pub theta_b: [f64; 4],
    pub alpha: f64,
    pub buckets: usize,
}

impl MappingParams {
    pub fn dim(&self) -> usize {
        self.theta_a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets == 0 {
            return Err(Error::InvalidArgument("bucket count must be at least 1".into()));
        }
        let finite = self.alpha.is_finite()
            && self.theta_b.iter().all(|x| x.is_finite())
            && self.theta_a.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("mapping parameters must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap {
    /// Bucket label per token.
    pub labels: Vec<usize>,
    /// Bucket label per segment.
    pub segment_labels: Vec<usize>,
    pub features: Vec<[f64; 4]>,
    pub projections: Vec<f64>,
}

/// Rank positions (0-based) of `scores` sorted descending; ties keep the
/// earlier index first.
pub fn descending_ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank;
    }
    ranks
}

pub fn map_segments(
    tokens: &[String],
    seg: &Segmentation,
    model: &MknModel,
    table: &EmbeddingTable,
    params: &MappingParams,
) -> Result<SegmentMap> {
    if table.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: table.dim(),
        });
    }
    if seg.len() != tokens.len() {
        return Err(Error::LengthMismatch {
            expected: tokens.len(),
            got: seg.len(),
        });
    }
    params.validate()?;

    let token_ids = model.ids(tokens);
    let features: Vec<[f64; 4]> = seg
        .spans
        .iter()
        .enumerate()
        .map(|(c, span)| {
            let centroid = table.centroid(&tokens[span.clone()]);
            let mut projected = [0.0; 2];
            for (x, row) in centroid.iter().zip(&params.theta_a) {
                projected[0] += x * row[0];
                projected[1] += x * row[1];
            }
            let likelihood = model
                .log_length_normalized_score_ids(&token_ids[span.clone()], params.alpha)
                .exp();
            [projected[0], projected[1], likelihood, (c + 1) as f64]
        })
        .collect();
    let projections: Vec<f64> = features
        .iter()
        .map(|f| f.iter().zip(&params.theta_b).map(|(x, w)| x * w).sum())
        .collect();

    let segment_labels: Vec<usize> = descending_ranks(&projections)
        .into_iter()
        .map(|r| (r + 1).min(params.buckets))
        .collect();
    let labels = seg.ids.iter().map(|&id| segment_labels[id - 1]).collect();
    Ok(SegmentMap {
        labels,
        segment_labels,
        features,
        projections,
    })
}

/// Standard-Gaussian `theta_a`, `theta_b`; alpha uniform in `alpha_range`.
pub fn sample_mapping_params(
    dim: usize,
    buckets: usize,
    alpha_range: (f64, f64),
    seed: u64,
) -> Result<MappingParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_mapping_params_with(&mut rng, dim, buckets, alpha_range)
}

pub(crate) fn sample_mapping_params_with(
    rng: &mut ChaCha8Rng,
    dim: usize,
    buckets: usize,
    alpha_range: (f64, f64),
) -> Result<MappingParams> {
    if dim == 0 || buckets == 0 {
        return Err(Error::InvalidArgument("dimension and bucket count must be positive".into()));
    }
    let theta_a = (0..dim)
        .map(|_| [StandardNormal.sample(rng), StandardNormal.sample(rng)])
        .collect();
    let mut theta_b = [0.0; 4];
    theta_b.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
    let alpha = uniform(rng, alpha_range)?;
    let params = MappingParams {
        theta_a,
        theta_b,
        alpha,
        buckets,
    };
    params.validate()?;
    Ok(params)
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("bad range [{lo}, {hi}]")));
    }
    Ok(if lo == hi { lo } else { rng.random_range(lo..hi) })
}
