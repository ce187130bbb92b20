//! Training-free 2-way prototypical network over token embeddings.

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rule_engine::LabelVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    pub centroid_0: Vec<f64>,
    pub centroid_1: Vec<f64>,
}

impl Prototypes {
    pub fn dim(&self) -> usize {
        self.centroid_0.len()
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Class centroids of the example tokens.
pub fn fit_prototypes(example: &[Vec<f64>], y_ex: &LabelVector) -> Result<Prototypes> {
    if example.len() != y_ex.len() {
        return Err(Error::LengthMismatch {
            expected: y_ex.len(),
            got: example.len(),
        });
    }
    let dim = example.first().map_or(0, Vec::len);
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (row, label) in example.iter().zip(y_ex.iter()) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        let c = label as usize;
        counts[c] += 1;
        sums[c].iter_mut().zip(row).for_each(|(s, x)| *s += x);
    }
    for c in 0..2 {
        if counts[c] == 0 {
            return Err(Error::MissingClass(c as u8));
        }
    }
    let [mut c0, mut c1] = sums;
    c0.iter_mut().for_each(|x| *x /= counts[0] as f64);
    c1.iter_mut().for_each(|x| *x /= counts[1] as f64);
    Ok(Prototypes {
        centroid_0: c0,
        centroid_1: c1,
    })
}

/// Softmax over negative squared distances. Returns labels (ties go to 0)
/// and the probability of class 1 per token.
pub fn classify(test: &[Vec<f64>], protos: &Prototypes) -> Result<(LabelVector, Vec<f64>)> {
    let mut labels = Vec::with_capacity(test.len());
    let mut probs = Vec::with_capacity(test.len());
    for row in test {
        if row.len() != protos.dim() {
            return Err(Error::DimensionMismatch {
                expected: protos.dim(),
                got: row.len(),
            });
        }
        let d0 = squared_distance(row, &protos.centroid_0);
        let d1 = squared_distance(row, &protos.centroid_1);
        // p1 = e^-d1 / (e^-d0 + e^-d1) = sigmoid(d0 - d1)
        let z = d0 - d1;
        let p1 = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        labels.push(u8::from(d1 < d0));
        probs.push(p1);
    }
    Ok((LabelVector::new(labels)?, probs))
}

/// One 1-shot episode. When the example shows only one class, every test
/// token gets that class.
pub fn predict_episode<S: AsRef<str>>(
    table: &EmbeddingTable,
    x_ex: &[S],
    y_ex: &LabelVector,
    x_ts: &[S],
) -> Result<(LabelVector, Vec<f64>)> {
    let example = table.embed(x_ex);
    match fit_prototypes(&example, y_ex) {
        Ok(protos) => classify(&table.embed(x_ts), &protos),
        Err(Error::MissingClass(missing)) => {
            let present = 1 - missing;
            Ok((
                LabelVector::new(vec![present; x_ts.len()])?,
                vec![f64::from(present); x_ts.len()],
            ))
        }
        Err(e) => Err(e),
    }
}
