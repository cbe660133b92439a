use serde::{Deserialize, Serialize};

/// Integer object counts over the catalog for one building or room.
///
/// The normalized distribution is always derived from the counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn zeros(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn add(&mut self, i: usize, k: u64) {
        self.counts[i] += k;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts divided by the total; all zeros when the total is zero.
    pub fn distribution(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let t = total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn distribution_sums_to_one(counts in prop::collection::vec(0u64..50, 1..46)) {
            let h = Histogram::from_counts(counts);
            let s: f64 = h.distribution().iter().sum();
            if h.total() > 0 {
                prop_assert!((s - 1.0).abs() <= 1e-12);
            } else {
                prop_assert_eq!(s, 0.0);
            }
        }
    }
}
