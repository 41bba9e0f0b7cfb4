use serde::{Deserialize, Serialize};

use super::{check_training_data, check_width, Classifier};
use crate::corpus::Label;
use crate::embeddings::sigmoid;
use crate::matrix::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Unused by the optimizer (weights start at zero); kept so every
    /// classifier spec carries a seed.
    pub seed: u64,
    /// Decision threshold on P(Hate); predictions are Hate iff P ≥ threshold.
    pub threshold: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            learning_rate: 0.1,
            epochs: 300,
            l2: 1e-4,
            seed: 0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub threshold: f64,
}

/// Per-column mean and scale (population std, or 1 for constant columns).
pub fn standardize_columns(x: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows().max(1) as f64;
    let mut mean = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Mean binary cross-entropy plus `l2/2 · ‖w‖²` on already standardized rows.
/// Returns `(loss, ∂loss/∂w, ∂loss/∂b)`.
pub fn lr_loss_and_gradient(
    weights: &[f64],
    bias: f64,
    z: &DenseMatrix,
    y: &[Label],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = z.rows() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, label) in z.iter_rows().zip(y) {
        let s = bias + row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
        let t = label.target();
        loss += softplus(s) - t * s;
        let r = sigmoid(s) - t;
        gb += r;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
    }
    loss /= n;
    gb /= n;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, gw, gb)
}

/// Full-batch gradient descent on standardized columns, weights from zero.
pub fn lr_fit(x: &DenseMatrix, y: &[Label], cfg: &LrConfig) -> Result<LrModel> {
    check_training_data(x, y, 2)?;
    if y.iter().all(|l| *l == y[0]) {
        return Err(Error::invalid(
            "logistic regression needs both classes in the training data",
        ));
    }
    let (mean, scale) = standardize_columns(x);
    let z = standardized(x, &mean, &scale);
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    for _ in 0..cfg.epochs {
        let (_, gw, gb) = lr_loss_and_gradient(&w, b, &z, y, cfg.l2);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= cfg.learning_rate * gi;
        }
        b -= cfg.learning_rate * gb;
    }
    Ok(LrModel {
        weights: w,
        bias: b,
        mean,
        scale,
        threshold: cfg.threshold,
    })
}

fn standardized(x: &DenseMatrix, mean: &[f64], scale: &[f64]) -> DenseMatrix {
    let mut z = x.clone();
    for i in 0..z.rows() {
        for ((v, m), s) in z.row_mut(i).iter_mut().zip(mean).zip(scale) {
            *v = (*v - m) / s;
        }
    }
    z
}

impl LrModel {
    pub fn predict_with_threshold(&self, x: &DenseMatrix, threshold: f64) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| {
                if p >= threshold {
                    Label::Hate
                } else {
                    Label::NonHate
                }
            })
            .collect())
    }
}

impl Classifier for LrModel {
    fn width(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_width(self.weights.len(), x)?;
        Ok(x.iter_rows()
            .map(|r| {
                let s = self.bias
                    + r.iter()
                        .zip(&self.weights)
                        .zip(self.mean.iter().zip(&self.scale))
                        .map(|((v, w), (m, s))| (v - m) / s * w)
                        .sum::<f64>();
                sigmoid(s)
            })
            .collect())
    }

    fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        self.predict_with_threshold(x, self.threshold)
    }
}
