use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, FeatureSampler};
use super::{check_training_data, check_width, Classifier, DtConfig, DtModel};
use crate::corpus::Label;
use crate::matrix::DenseMatrix;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// ⌈√d⌉ features per split.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
    pub tree: DtConfig,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
            tree: DtConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub width: usize,
    pub trees: Vec<DtModel>,
    pub max_features: MaxFeatures,
    /// Substream index of each tree under the forest seed.
    pub tree_streams: Vec<u64>,
    pub seed: u64,
}

/// Tree `i` draws its bootstrap sample and split features from
/// `substream(seed, i)`, so the forest is the same however trees are scheduled.
pub fn rf_fit(x: &DenseMatrix, y: &[Label], cfg: &RfConfig) -> Result<RfModel> {
    if cfg.n_trees == 0 {
        return Err(Error::invalid("random forest needs at least one tree"));
    }
    check_training_data(x, y, 1)?;
    let n = x.rows();
    let k = cfg.max_features.resolve(x.cols());
    let trees: Vec<DtModel> = (0..cfg.n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::substream(cfg.seed, t);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| r.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampler = (k < x.cols()).then_some(FeatureSampler { rng: &mut r, k });
            grow(x, y, rows, &cfg.tree, sampler)
        })
        .collect();
    Ok(RfModel {
        width: x.cols(),
        trees,
        max_features: cfg.max_features,
        tree_streams: (0..cfg.n_trees as u64).collect(),
        seed: cfg.seed,
    })
}

impl RfModel {
    /// Number of trees voting Hate per row.
    pub fn hate_votes(&self, x: &DenseMatrix) -> Result<Vec<usize>> {
        check_width(self.width, x)?;
        let mut votes = vec![0usize; x.rows()];
        for t in &self.trees {
            for (v, p) in votes.iter_mut().zip(t.predict(x)?) {
                *v += p.is_hate() as usize;
            }
        }
        Ok(votes)
    }
}

/// Unweighted majority; an even split goes to NonHate.
pub(crate) fn vote(hate: usize, total: usize) -> Label {
    if 2 * hate > total {
        Label::Hate
    } else {
        Label::NonHate
    }
}

impl Classifier for RfModel {
    fn width(&self) -> usize {
        self.width
    }

    fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        let n = self.trees.len() as f64;
        Ok(self
            .hate_votes(x)?
            .into_iter()
            .map(|v| v as f64 / n)
            .collect())
    }

    fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        let n = self.trees.len();
        Ok(self
            .hate_votes(x)?
            .into_iter()
            .map(|v| vote(v, n))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::dt_fit;

    #[test]
    fn vote_rules() {
        assert_eq!(vote(2, 3), Label::Hate);
        assert_eq!(vote(1, 2), Label::NonHate);
        assert_eq!(vote(0, 4), Label::NonHate);
        assert_eq!(vote(4, 4), Label::Hate);
    }

    #[test]
    fn sqrt_policy_rounds_up() {
        assert_eq!(MaxFeatures::Sqrt.resolve(1501), 39);
        assert_eq!(MaxFeatures::Sqrt.resolve(1000), 32);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Count(50).resolve(10), 10);
    }

    fn random_data(seed: u64, n: usize, d: usize) -> (DenseMatrix, Vec<Label>) {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.gen_range(0..5) as f64).collect())
            .collect();
        let y = (0..n)
            .map(|_| {
                if r.gen::<bool>() {
                    Label::Hate
                } else {
                    Label::NonHate
                }
            })
            .collect();
        (DenseMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = random_data(1, 80, 9);
        let cfg = RfConfig {
            n_trees: 15,
            seed: 42,
            ..RfConfig::default()
        };
        assert_eq!(rf_fit(&x, &y, &cfg).unwrap(), rf_fit(&x, &y, &cfg).unwrap());
        let other = rf_fit(&x, &y, &RfConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(other, rf_fit(&x, &y, &cfg).unwrap());
    }

    #[test]
    fn degenerate_forest_is_the_tree() {
        let (x, y) = random_data(2, 60, 5);
        let cfg = RfConfig {
            n_trees: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
            seed: 9,
            tree: DtConfig::default(),
        };
        let f = rf_fit(&x, &y, &cfg).unwrap();
        let t = dt_fit(&x, &y, &DtConfig::default()).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn zero_trees_rejected() {
        let (x, y) = random_data(3, 10, 2);
        let cfg = RfConfig {
            n_trees: 0,
            ..RfConfig::default()
        };
        assert!(rf_fit(&x, &y, &cfg).is_err());
    }
}
