use serde::{Deserialize, Serialize};

use super::counts::CountTable;

pub const FALLBACK_DISCOUNT: f64 = 0.75;

/// Discounts applied to n-grams seen once, twice, and three or more times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discounts {
    pub d1: f64,
    pub d2: f64,
    pub d3plus: f64,
}

impl Default for Discounts {
    fn default() -> Self {
        Self {
            d1: FALLBACK_DISCOUNT,
            d2: FALLBACK_DISCOUNT,
            d3plus: FALLBACK_DISCOUNT,
        }
    }
}

impl Discounts {
    /// Closed-form estimate from count-of-counts `n = [n1, n2, n3, n4]`.
    ///
    /// `Y = n1 / (n1 + 2 n2)`, `D1 = 1 - 2Y n2/n1`, `D2 = 2 - 3Y n3/n2`,
    /// `D3+ = 3 - 4Y n4/n3`. A discount whose inputs are zero falls back to
    /// 0.75; results are clamped to `[0, k]` for bucket `k`.
    pub fn from_count_of_counts(n: [u64; 4]) -> Self {
        let [n1, n2, n3, n4] = n.map(|c| c as f64);
        if n1 == 0.0 || n2 == 0.0 {
            return Self::default();
        }
        let y = n1 / (n1 + 2.0 * n2);
        let pick = |ok: bool, v: f64, k: f64| {
            if ok && v.is_finite() {
                v.clamp(0.0, k)
            } else {
                FALLBACK_DISCOUNT
            }
        };
        Self {
            d1: pick(true, 1.0 - 2.0 * y * n2 / n1, 1.0),
            d2: pick(n3 > 0.0, 2.0 - 3.0 * y * n3 / n2, 2.0),
            d3plus: pick(n3 > 0.0 && n4 > 0.0, 3.0 - 4.0 * y * n4 / n3, 3.0),
        }
    }

    #[inline]
    pub fn for_count(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3plus,
        }
    }

    pub fn is_valid(&self) -> bool {
        [(self.d1, 1.0), (self.d2, 2.0), (self.d3plus, 3.0)]
            .iter()
            .all(|&(d, k)| d.is_finite() && (0.0..=k).contains(&d))
    }
}

/// Per-order discounts, index 0 = unigram, 2 = trigram.
pub fn estimate_discounts(counts: &CountTable) -> [Discounts; 3] {
    counts.count_of_counts.map(Discounts::from_count_of_counts)
}
