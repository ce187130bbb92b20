use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::text_norm::{normalize, TokenSequence};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuery {
    pub tokens: TokenSequence,
    pub frequency: f64,
}

/// Reads one query per line with an optional `\t<frequency>` suffix
/// (default 1). Lines that normalize to nothing are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<WeightedQuery>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let (text, frequency) = match line.rsplit_once('\t') {
            Some((text, freq)) => {
                let f: f64 = freq.trim().parse().map_err(|_| Error::MalformedFile {
                    line: line_no,
                    msg: format!("bad frequency {freq:?}"),
                })?;
                if !(f.is_finite() && f > 0.0) {
                    return Err(Error::MalformedFile {
                        line: line_no,
                        msg: format!("frequency must be positive, got {f}"),
                    });
                }
                (text, f)
            }
            None => (line.as_str(), 1.0),
        };
        match normalize(text) {
            Ok(tokens) => out.push(WeightedQuery { tokens, frequency }),
            Err(Error::EmptyInput) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Weighted sampling without replacement, weight = frequency / token count.
///
/// Uses exponential keys `ln(u) / weight`; the output is ordered by key, so
/// the first element follows the single-draw weighted distribution.
pub fn sample_training_corpus(
    queries: &[WeightedQuery],
    size: usize,
    seed: u64,
) -> Result<Vec<TokenSequence>> {
    if size > queries.len() {
        return Err(Error::SizeTooLarge {
            requested: size,
            available: queries.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let weight = q.frequency / q.tokens.len() as f64;
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / weight, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keyed
        .into_iter()
        .take(size)
        .map(|(_, i)| queries[i].tokens.clone())
        .collect())
}
