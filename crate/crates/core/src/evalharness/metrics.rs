use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::{Error, Result};

/// Confusion counts with Hate as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with NonHate treated as positive.
    pub fn flipped(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in pred.iter().zip(truth) {
        match (p, t) {
            (Label::Hate, Label::Hate) => c.tp += 1,
            (Label::Hate, Label::NonHate) => c.fp += 1,
            (Label::NonHate, Label::NonHate) => c.tn += 1,
            (Label::NonHate, Label::Hate) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Binary metrics for the positive class; a zero denominator yields 0.
pub fn metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    if c.total() == 0 {
        return Err(Error::invalid("confusion counts are empty"));
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsReport {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
    })
}

/// Unweighted mean of the per-class precision, recall and F1.
pub fn macro_metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    let a = metrics(c)?;
    let b = metrics(&c.flipped())?;
    Ok(MetricsReport {
        accuracy: a.accuracy,
        precision: (a.precision + b.precision) / 2.0,
        recall: (a.recall + b.recall) / 2.0,
        f1: (a.f1 + b.f1) / 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MetricAverage {
    /// Precision/recall/F1 of the Hate class.
    #[default]
    Binary,
    Macro,
}

impl MetricAverage {
    pub fn describe(self) -> &'static str {
        match self {
            MetricAverage::Binary => "binary, positive class = hate",
            MetricAverage::Macro => "macro-averaged over both classes",
        }
    }

    pub fn score(self, c: &ConfusionCounts) -> Result<MetricsReport> {
        match self {
            MetricAverage::Binary => metrics(c),
            MetricAverage::Macro => macro_metrics(c),
        }
    }
}

/// Four decimals, rounding half away from zero on the decimal expansion
/// (so 0.12345 becomes 0.1235 even though its binary value is slightly below).
pub fn format4(x: f64) -> String {
    let s = format!("{:.12}", x.abs());
    let (int, frac) = s.split_once('.').unwrap();
    let mut digits: Vec<u8> = int
        .bytes()
        .chain(frac.bytes().take(4))
        .map(|b| b - b'0')
        .collect();
    if frac.as_bytes()[4] >= b'5' {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let n = digits.len();
    let body: String = digits.iter().map(|d| (d + b'0') as char).collect();
    let out = format!("{}.{}", &body[..n - 4], &body[n - 4..]);
    if x < 0.0 && out.bytes().any(|b| (b'1'..=b'9').contains(&b)) {
        format!("-{out}")
    } else {
        out
    }
}
