//! Classification metrics.

use crate::{Error, Result};

/// Square confusion matrix, rows = gold, columns = predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Confusion {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_pairs(classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut c = Confusion::new(classes);
        for (g, p) in pairs {
            c.add(g, p);
        }
        c
    }

    pub fn add(&mut self, gold: usize, predicted: usize) {
        self.counts[gold][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let hits: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        hits as f64 / total as f64
    }

    /// F1 of one class; 0 when the class is never predicted or never gold.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let predicted: u64 = self.counts.iter().map(|row| row[class]).sum();
        let gold: u64 = self.counts[class].iter().sum();
        if predicted == 0 || gold == 0 || tp == 0.0 {
            return 0.0;
        }
        let precision = tp / predicted as f64;
        let recall = tp / gold as f64;
        2.0 * precision * recall / (precision + recall)
    }

    /// Unweighted mean of per-class F1.
    pub fn macro_f1(&self) -> f64 {
        let k = self.counts.len();
        (0..k).map(|c| self.f1(c)).sum::<f64>() / k as f64
    }

    /// Errors when some class never occurs as gold.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.counts.iter().position(|row| row.iter().sum::<u64>() == 0) {
            Some(c) => Err(Error::Contract(format!("class {c} has no gold instances"))),
            None => Ok(()),
        }
    }
}

/// Binary precision/recall summary where `true` is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinaryScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn binary_scores(pairs: impl IntoIterator<Item = (bool, bool)>) -> BinaryScores {
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (gold, pred) in pairs {
        match (gold, pred) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let total = (tp + fp + fn_ + tn) as f64;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    BinaryScores {
        accuracy: if total == 0.0 { 0.0 } else { (tp + tn) as f64 / total },
        precision,
        recall,
        f1: if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        },
    }
}
