use std::collections::HashSet;

use rand::seq::index::sample;
use serde::Serialize;

use crate::corpus::{nfc, DatasetSplit, LabeledDocument};
use crate::rng;
use crate::textprep::Cleaner;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassBalance {
    pub hate: usize,
    pub nonhate: usize,
}

impl ClassBalance {
    pub fn of(docs: &[LabeledDocument]) -> Self {
        let hate = docs.iter().filter(|d| d.label.is_hate()).count();
        ClassBalance {
            hate,
            nonhate: docs.len() - hate,
        }
    }

    pub fn hate_rate(&self) -> f64 {
        let n = self.hate + self.nonhate;
        if n == 0 {
            0.0
        } else {
            self.hate as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    /// Test documents whose NFC text equals some train text.
    pub exact_duplicates: usize,
    /// Test documents whose non-empty cleaned tokens equal some train
    /// document's, not counting exact duplicates.
    pub near_duplicates: usize,
    pub train: ClassBalance,
    pub test: ClassBalance,
    /// Ids of the exact duplicates, in test order.
    pub exact_ids: Vec<String>,
    pub near_ids: Vec<String>,
}

pub fn leakage_audit(split: &DatasetSplit, cleaner: &Cleaner) -> AuditReport {
    let train_text: HashSet<String> = split.train.iter().map(|d| nfc(&d.text)).collect();
    let train_tokens: HashSet<Vec<String>> = split
        .train
        .iter()
        .map(|d| cleaner.clean_text(&d.text))
        .filter(|t| !t.is_empty())
        .collect();
    let mut exact_ids = Vec::new();
    let mut near_ids = Vec::new();
    for d in &split.test {
        if train_text.contains(&nfc(&d.text)) {
            exact_ids.push(d.id.clone());
        } else {
            let t = cleaner.clean_text(&d.text);
            if !t.is_empty() && train_tokens.contains(&t) {
                near_ids.push(d.id.clone());
            }
        }
    }
    AuditReport {
        exact_duplicates: exact_ids.len(),
        near_duplicates: near_ids.len(),
        train: ClassBalance::of(&split.train),
        test: ClassBalance::of(&split.test),
        exact_ids,
        near_ids,
    }
}

/// Overwrite `round(fraction · |test|)` seeded test slots with the text and
/// label of distinct train documents, keeping the test ids. Returns the new
/// split and the number planted.
pub fn plant_duplicates(
    split: &DatasetSplit,
    fraction: f64,
    seed: u64,
) -> Result<(DatasetSplit, usize)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "duplicate fraction {fraction} outside [0, 1]"
        )));
    }
    let k = (fraction * split.test.len() as f64).round() as usize;
    if k > split.train.len() {
        return Err(Error::invalid(format!(
            "cannot plant {k} duplicates from {} train documents",
            split.train.len()
        )));
    }
    let mut r = rng::seeded(seed);
    let slots = sample(&mut r, split.test.len(), k);
    let sources = sample(&mut r, split.train.len(), k);
    let mut out = split.clone();
    for (slot, src) in slots.iter().zip(sources.iter()) {
        let from = &split.train[src];
        let to = &mut out.test[slot];
        to.text = from.text.clone();
        to.label = from.label;
    }
    Ok((out, k))
}
