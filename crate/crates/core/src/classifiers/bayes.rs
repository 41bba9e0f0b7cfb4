use serde::{Deserialize, Serialize};

use super::{check_training_data, check_width, Classifier};
use crate::corpus::Label;
use crate::matrix::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NbVariant {
    /// Multinomial when every value is a nonnegative integer, Gaussian otherwise.
    Auto,
    Gaussian,
    Multinomial,
}

/// Class-indexed parameters; index 0 is NonHate, 1 is Hate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NbParams {
    Gaussian {
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    /// Laplace-smoothed (α = 1) per-class feature rates, stored as logs.
    Multinomial { log_rate: [Vec<f64>; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub width: usize,
    pub priors: [f64; 2],
    pub params: NbParams,
}

fn is_count_matrix(x: &DenseMatrix) -> bool {
    x.as_slice().iter().all(|v| *v >= 0.0 && v.fract() == 0.0)
}

pub fn nb_fit(x: &DenseMatrix, y: &[Label], variant: NbVariant) -> Result<NbModel> {
    check_training_data(x, y, 1)?;
    let d = x.cols();
    let variant = match variant {
        NbVariant::Auto if is_count_matrix(x) => NbVariant::Multinomial,
        NbVariant::Auto => NbVariant::Gaussian,
        v => v,
    };
    let mut n = [0usize; 2];
    for l in y {
        n[l.is_hate() as usize] += 1;
    }
    let priors = [n[0] as f64 / y.len() as f64, n[1] as f64 / y.len() as f64];
    let params = match variant {
        NbVariant::Multinomial => {
            if x.as_slice().iter().any(|v| *v < 0.0) {
                return Err(Error::invalid(
                    "multinomial naive Bayes needs nonnegative features",
                ));
            }
            let mut counts = [vec![0.0; d], vec![0.0; d]];
            for (row, l) in x.iter_rows().zip(y) {
                for (c, v) in counts[l.is_hate() as usize].iter_mut().zip(row) {
                    *c += v;
                }
            }
            let log_rate = counts.map(|c| {
                let total: f64 = c.iter().sum::<f64>() + d as f64;
                c.iter().map(|v| ((v + 1.0) / total).ln()).collect()
            });
            NbParams::Multinomial { log_rate }
        }
        _ => {
            let mut mean = [vec![0.0; d], vec![0.0; d]];
            for (row, l) in x.iter_rows().zip(y) {
                for (m, v) in mean[l.is_hate() as usize].iter_mut().zip(row) {
                    *m += v;
                }
            }
            for c in 0..2 {
                let k = n[c].max(1) as f64;
                mean[c].iter_mut().for_each(|m| *m /= k);
            }
            let mut var = [vec![0.0; d], vec![0.0; d]];
            for (row, l) in x.iter_rows().zip(y) {
                let c = l.is_hate() as usize;
                for ((s, v), m) in var[c].iter_mut().zip(row).zip(&mean[c]) {
                    *s += (v - m) * (v - m);
                }
            }
            let floor = variance_floor(x);
            for c in 0..2 {
                let k = n[c].max(1) as f64;
                var[c].iter_mut().for_each(|s| *s = *s / k + floor);
            }
            NbParams::Gaussian { mean, var }
        }
    };
    Ok(NbModel {
        width: d,
        priors,
        params,
    })
}

/// 1e-9 times the largest column variance (or 1e-9 when every column is constant).
fn variance_floor(x: &DenseMatrix) -> f64 {
    let n = x.rows() as f64;
    let mut max_var: f64 = 0.0;
    for j in 0..x.cols() {
        let col = x.column(j);
        let m = col.iter().sum::<f64>() / n;
        let v = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / n;
        max_var = max_var.max(v);
    }
    1e-9 * if max_var > 0.0 { max_var } else { 1.0 }
}

impl NbModel {
    /// Unnormalized log posterior `[nonhate, hate]` for one row.
    pub fn log_joint(&self, row: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let prior = self.priors[c].ln();
            *o = prior
                + match &self.params {
                    NbParams::Multinomial { log_rate } => row
                        .iter()
                        .zip(&log_rate[c])
                        .map(|(v, lr)| v * lr)
                        .sum::<f64>(),
                    NbParams::Gaussian { mean, var } => row
                        .iter()
                        .zip(&mean[c])
                        .zip(&var[c])
                        .map(|((v, m), s)| {
                            -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s)
                        })
                        .sum::<f64>(),
                };
        }
        out
    }
}

impl Classifier for NbModel {
    fn width(&self) -> usize {
        self.width
    }

    fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_width(self.width, x)?;
        Ok(x.iter_rows()
            .map(|r| {
                let [a, b] = self.log_joint(r);
                if b == f64::NEG_INFINITY {
                    0.0
                } else if a == f64::NEG_INFINITY {
                    1.0
                } else {
                    1.0 / (1.0 + (a - b).exp())
                }
            })
            .collect())
    }

    fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        check_width(self.width, x)?;
        Ok(x.iter_rows()
            .map(|r| {
                let [a, b] = self.log_joint(r);
                if b > a {
                    Label::Hate
                } else {
                    Label::NonHate
                }
            })
            .collect())
    }
}
