//! Binary classifiers behind one fit/predict contract.
//!
//! Positive class is [`Label::Hate`]. Every model is immutable once fitted and
//! can be saved to and restored from a versioned JSON document
//! (`{"format": "hatebench-model", "version": 1, "model": {"kind": ..., ...}}`).

mod bayes;
mod forest;
mod logistic;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::matrix::DenseMatrix;
use crate::{Error, Result};

pub use bayes::{nb_fit, NbModel, NbParams, NbVariant};
pub use forest::{rf_fit, MaxFeatures, RfConfig, RfModel};
pub use logistic::{lr_fit, lr_loss_and_gradient, standardize_columns, LrConfig, LrModel};
pub use tree::{dt_fit, DtConfig, DtModel, Node};

pub trait Classifier {
    /// Number of feature columns the model was trained on.
    fn width(&self) -> usize;

    /// P(Hate) per row.
    fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>>;

    fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>>;
}

pub(crate) fn check_width(expected: usize, x: &DenseMatrix) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.cols(),
        });
    }
    Ok(())
}

pub(crate) fn check_training_data(x: &DenseMatrix, y: &[Label], min_rows: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if y.len() < min_rows {
        return Err(Error::invalid(format!(
            "need at least {min_rows} training rows, got {}",
            y.len()
        )));
    }
    if x.has_nan() {
        return Err(Error::invalid("training matrix contains NaN"));
    }
    Ok(())
}

/// Majority class with ties going to NonHate.
pub(crate) fn majority(hate: usize, nonhate: usize) -> Label {
    if hate > nonhate {
        Label::Hate
    } else {
        Label::NonHate
    }
}

/// Constant predictor of the training majority class (tie → NonHate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityModel {
    pub width: usize,
    pub class: Label,
    pub hate_rate: f64,
}

pub fn majority_fit(x: &DenseMatrix, y: &[Label]) -> Result<MajorityModel> {
    check_training_data(x, y, 1)?;
    let hate = y.iter().filter(|l| l.is_hate()).count();
    Ok(MajorityModel {
        width: x.cols(),
        class: majority(hate, y.len() - hate),
        hate_rate: hate as f64 / y.len() as f64,
    })
}

impl Classifier for MajorityModel {
    fn width(&self) -> usize {
        self.width
    }

    fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        check_width(self.width, x)?;
        Ok(vec![self.hate_rate; x.rows()])
    }

    fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        check_width(self.width, x)?;
        Ok(vec![self.class; x.rows()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    Lr,
    Dt,
    Rf,
    Nb,
    Majority,
}

impl ClassifierKind {
    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            ClassifierKind::Lr => "LR",
            ClassifierKind::Dt => "DT",
            ClassifierKind::Rf => "RF",
            ClassifierKind::Nb => "NB",
            ClassifierKind::Majority => "Majority",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(ClassifierKind::Lr),
            "dt" => Ok(ClassifierKind::Dt),
            "rf" => Ok(ClassifierKind::Rf),
            "nb" => Ok(ClassifierKind::Nb),
            "majority" => Ok(ClassifierKind::Majority),
            other => Err(Error::invalid(format!(
                "unknown classifier {other:?} (lr, dt, rf, nb, majority)"
            ))),
        }
    }
}

/// Classifier kind plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassifierSpec {
    Lr(LrConfig),
    Dt(DtConfig),
    Rf(RfConfig),
    Nb(NbVariant),
    Majority,
}

impl ClassifierSpec {
    /// Module defaults for a kind.
    pub fn default_for(kind: ClassifierKind, seed: u64) -> Self {
        match kind {
            ClassifierKind::Lr => ClassifierSpec::Lr(LrConfig::default()),
            ClassifierKind::Dt => ClassifierSpec::Dt(DtConfig::default()),
            ClassifierKind::Rf => ClassifierSpec::Rf(RfConfig {
                seed,
                ..RfConfig::default()
            }),
            ClassifierKind::Nb => ClassifierSpec::Nb(NbVariant::Auto),
            ClassifierKind::Majority => ClassifierSpec::Majority,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Lr(_) => ClassifierKind::Lr,
            ClassifierSpec::Dt(_) => ClassifierKind::Dt,
            ClassifierSpec::Rf(_) => ClassifierKind::Rf,
            ClassifierSpec::Nb(_) => ClassifierKind::Nb,
            ClassifierSpec::Majority => ClassifierKind::Majority,
        }
    }

    pub fn fit(&self, x: &DenseMatrix, y: &[Label]) -> Result<TrainedClassifier> {
        Ok(match self {
            ClassifierSpec::Lr(c) => TrainedClassifier::Lr(lr_fit(x, y, c)?),
            ClassifierSpec::Dt(c) => TrainedClassifier::Dt(dt_fit(x, y, c)?),
            ClassifierSpec::Rf(c) => TrainedClassifier::Rf(rf_fit(x, y, c)?),
            ClassifierSpec::Nb(v) => TrainedClassifier::Nb(nb_fit(x, y, *v)?),
            ClassifierSpec::Majority => TrainedClassifier::Majority(majority_fit(x, y)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedClassifier {
    Lr(LrModel),
    Dt(DtModel),
    Rf(RfModel),
    Nb(NbModel),
    Majority(MajorityModel),
}

pub const MODEL_FORMAT: &str = "hatebench-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format: String,
    version: u32,
    model: TrainedClassifier,
}

impl TrainedClassifier {
    fn inner(&self) -> &dyn Classifier {
        match self {
            TrainedClassifier::Lr(m) => m,
            TrainedClassifier::Dt(m) => m,
            TrainedClassifier::Rf(m) => m,
            TrainedClassifier::Nb(m) => m,
            TrainedClassifier::Majority(m) => m,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainedClassifier::Lr(_) => ClassifierKind::Lr,
            TrainedClassifier::Dt(_) => ClassifierKind::Dt,
            TrainedClassifier::Rf(_) => ClassifierKind::Rf,
            TrainedClassifier::Nb(_) => ClassifierKind::Nb,
            TrainedClassifier::Majority(_) => ClassifierKind::Majority,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelEnvelope {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: ModelEnvelope = serde_json::from_str(s)?;
        if env.format != MODEL_FORMAT {
            return Err(Error::invalid(format!(
                "not a model file (format {:?})",
                env.format
            )));
        }
        if env.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {}",
                env.version
            )));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

impl Classifier for TrainedClassifier {
    fn width(&self) -> usize {
        self.inner().width()
    }

    fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.inner().predict_proba(x)
    }

    fn predict(&self, x: &DenseMatrix) -> Result<Vec<Label>> {
        self.inner().predict(x)
    }
}
