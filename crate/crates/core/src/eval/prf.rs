use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Micro-averaged precision, recall and F1 with their supports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Additive counts behind a [`Prf`]; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfCounts {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl PrfCounts {
    pub fn add_sets<T: Ord>(&mut self, pred: &BTreeSet<T>, gold: &BTreeSet<T>) {
        self.true_positives += pred.intersection(gold).count();
        self.predicted += pred.len();
        self.gold += gold.len();
    }

    pub fn merge(&mut self, other: &PrfCounts) {
        self.true_positives += other.true_positives;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    /// Ratios are 0 when their denominator is 0.
    pub fn prf(&self) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.true_positives, self.predicted);
        let recall = ratio(self.true_positives, self.gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            true_positives: self.true_positives,
            predicted: self.predicted,
            gold: self.gold,
        }
    }
}
