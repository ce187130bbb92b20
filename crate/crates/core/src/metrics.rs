//! Micro-averaged token precision/recall/F1 over the keep class, and
//! exact match over whole label vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rule_engine::LabelVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Percentage of rows predicted exactly.
    pub em: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub exact: u64,
    pub rows: u64,
}

impl Confusion {
    pub fn add_row(&mut self, gold: &LabelVector, pred: &LabelVector) -> Result<()> {
        if gold.len() != pred.len() {
            return Err(Error::LengthMismatch {
                expected: gold.len(),
                got: pred.len(),
            });
        }
        for (g, p) in gold.iter().zip(pred.iter()) {
            match (g, p) {
                (1, 1) => self.tp += 1,
                (0, 1) => self.fp += 1,
                (1, 0) => self.fn_ += 1,
                _ => {}
            }
        }
        self.exact += u64::from(gold == pred);
        self.rows += 1;
        Ok(())
    }

    pub fn merge(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            exact: self.exact + o.exact,
            rows: self.rows + o.rows,
        }
    }

    pub fn report(&self) -> EvalReport {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            precision,
            recall,
            f1,
            em: 100.0 * ratio(self.exact, self.rows),
            n: self.rows as usize,
        }
    }
}

fn confusion(gold: &[LabelVector], pred: &[LabelVector]) -> Result<Confusion> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    let mut c = Confusion::default();
    for (g, p) in gold.iter().zip(pred) {
        c.add_row(g, p)?;
    }
    Ok(c)
}

/// `(precision, recall, f1)`; a zero denominator yields 0.
pub fn token_prf(gold: &[LabelVector], pred: &[LabelVector]) -> Result<(f64, f64, f64)> {
    let r = confusion(gold, pred)?.report();
    Ok((r.precision, r.recall, r.f1))
}

pub fn exact_match(gold: &[LabelVector], pred: &[LabelVector]) -> Result<f64> {
    Ok(confusion(gold, pred)?.report().em)
}

pub fn evaluate(gold: &[LabelVector], pred: &[LabelVector]) -> Result<EvalReport> {
    Ok(confusion(gold, pred)?.report())
}
