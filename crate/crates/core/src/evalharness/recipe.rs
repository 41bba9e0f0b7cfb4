use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::MetricAverage;
use crate::classifiers::{
    ClassifierKind, ClassifierSpec, DtConfig, LrConfig, MaxFeatures, NbVariant, RfConfig,
};
use crate::embeddings::EmbeddingConfig;
use crate::features::RankBy;
use crate::neural::{CellKind, RnnConfig};
use crate::{Error, Result};

/// One block of columns in a classical feature recipe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSource {
    Bow {
        n_min: usize,
        n_max: usize,
        max_features: usize,
    },
    Tfidf {
        n_min: usize,
        n_max: usize,
        max_features: usize,
    },
    Sentiment,
    Doc2vec {
        dim: usize,
    },
    /// Sentence-embedding file; `None` generates seeded stand-in vectors.
    Sent2vec {
        file: Option<PathBuf>,
        dim: usize,
    },
}

/// Word vectors feeding a recurrent model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WordVectors {
    /// Pretrained text file; `None` uses seeded stand-in vectors over a fixed word list.
    Glove {
        file: Option<PathBuf>,
        dim: usize,
    },
    Word2vec {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recipe {
    Features(Vec<FeatureSource>),
    Sequence(WordVectors),
}

impl FeatureSource {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureSource::Bow { .. } => "BoW",
            FeatureSource::Tfidf { .. } => "TF-IDF",
            FeatureSource::Sentiment => "Sentiment",
            FeatureSource::Doc2vec { .. } => "Doc2Vec",
            FeatureSource::Sent2vec { .. } => "Sent2Vec",
        }
    }

    /// Column count when the vocabulary fills its cap.
    pub fn nominal_width(&self) -> usize {
        match self {
            FeatureSource::Bow { max_features, .. } | FeatureSource::Tfidf { max_features, .. } => {
                *max_features
            }
            FeatureSource::Sentiment => 1,
            FeatureSource::Doc2vec { dim } | FeatureSource::Sent2vec { dim, .. } => *dim,
        }
    }
}

impl Recipe {
    pub fn parse(s: &str) -> Result<Self> {
        let terms: Vec<Term> = split_top(s, '+')?
            .iter()
            .map(|t| Term::parse(t))
            .collect::<Result<_>>()?;
        if terms.is_empty() {
            return Err(Error::invalid("empty recipe"));
        }
        let seq = terms
            .iter()
            .filter(|t| matches!(t.name.as_str(), "glove" | "word2vec"))
            .count();
        if seq > 0 {
            if terms.len() != 1 {
                return Err(Error::invalid(
                    "word-vector recipes (glove, word2vec) cannot be combined with other features",
                ));
            }
            let t = &terms[0];
            return Ok(Recipe::Sequence(match t.name.as_str() {
                "glove" => {
                    t.allow(&["file", "dim"])?;
                    WordVectors::Glove {
                        file: t.get("file").map(PathBuf::from),
                        dim: t.usize_or("dim", 50)?,
                    }
                }
                _ => {
                    t.allow(&["dim"])?;
                    WordVectors::Word2vec {
                        dim: t.usize_or("dim", 100)?,
                    }
                }
            }));
        }
        let mut sources = Vec::new();
        for t in &terms {
            let src = match t.name.as_str() {
                "bow" | "tfidf" => {
                    t.allow(&["n", "max"])?;
                    let (n_min, n_max) = match t.get("n") {
                        None => (1, 6),
                        Some(r) => parse_range(r)?,
                    };
                    let max_features = t.usize_or("max", 1000)?;
                    if t.name == "bow" {
                        FeatureSource::Bow { n_min, n_max, max_features }
                    } else {
                        FeatureSource::Tfidf { n_min, n_max, max_features }
                    }
                }
                "sentiment" => {
                    t.allow(&[])?;
                    FeatureSource::Sentiment
                }
                "doc2vec" => {
                    t.allow(&["dim"])?;
                    FeatureSource::Doc2vec {
                        dim: t.usize_or("dim", 500)?,
                    }
                }
                "sent2vec" => {
                    t.allow(&["file", "dim"])?;
                    FeatureSource::Sent2vec {
                        file: t.get("file").map(PathBuf::from),
                        dim: t.usize_or("dim", 1024)?,
                    }
                }
                other => {
                    return Err(Error::invalid(format!(
                        "unknown recipe term {other:?} (bow, tfidf, sentiment, doc2vec, sent2vec, glove, word2vec)"
                    )))
                }
            };
            if sources.contains(&src) {
                return Err(Error::invalid(format!(
                    "recipe lists {} twice",
                    src.label()
                )));
            }
            sources.push(src);
        }
        Ok(Recipe::Features(sources))
    }

    /// Short label used in report rows, e.g. `TF-IDF+Doc2Vec+Sentiment`.
    pub fn label(&self) -> String {
        match self {
            Recipe::Features(s) => s.iter().map(|f| f.label()).collect::<Vec<_>>().join("+"),
            Recipe::Sequence(WordVectors::Glove { .. }) => "GloVe".into(),
            Recipe::Sequence(WordVectors::Word2vec { .. }) => "Word2vec".into(),
        }
    }

    pub fn nominal_width(&self) -> Option<usize> {
        match self {
            Recipe::Features(s) => Some(s.iter().map(FeatureSource::nominal_width).sum()),
            Recipe::Sequence(_) => None,
        }
    }
}

impl fmt::Display for Recipe {
    /// Canonical, re-parsable form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| format!("file={},", p.display()))
                .unwrap_or_default()
        };
        let parts: Vec<String> = match self {
            Recipe::Features(s) => s
                .iter()
                .map(|src| match src {
                    FeatureSource::Bow {
                        n_min,
                        n_max,
                        max_features,
                    } => format!("bow(n={n_min}..{n_max},max={max_features})"),
                    FeatureSource::Tfidf {
                        n_min,
                        n_max,
                        max_features,
                    } => format!("tfidf(n={n_min}..{n_max},max={max_features})"),
                    FeatureSource::Sentiment => "sentiment".into(),
                    FeatureSource::Doc2vec { dim } => format!("doc2vec(dim={dim})"),
                    FeatureSource::Sent2vec { file: p, dim } => {
                        format!("sent2vec({}dim={dim})", file(p))
                    }
                })
                .collect(),
            Recipe::Sequence(WordVectors::Glove { file: p, dim }) => {
                vec![format!("glove({}dim={dim})", file(p))]
            }
            Recipe::Sequence(WordVectors::Word2vec { dim }) => vec![format!("word2vec(dim={dim})")],
        };
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::parse(s)
    }
}

/// Split on `sep` outside parentheses.
fn split_top(s: &str, sep: char) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(Error::invalid(format!("unbalanced parentheses in {s:?}")));
        }
        if c == sep && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    if depth != 0 {
        return Err(Error::invalid(format!("unbalanced parentheses in {s:?}")));
    }
    out.push(cur);
    Ok(out
        .into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect())
}

/// `name` or `name(key=value, ...)`.
struct Term {
    name: String,
    args: Vec<(String, String)>,
}

impl Term {
    fn parse(s: &str) -> Result<Self> {
        let (name, args) = match s.find('(') {
            None => (s, ""),
            Some(i) => {
                let rest = s[i + 1..].strip_suffix(')').ok_or_else(|| {
                    Error::invalid(format!("recipe term {s:?} lacks a closing ')'"))
                })?;
                (&s[..i], rest)
            }
        };
        let mut parsed = Vec::new();
        for a in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            let (k, v) = a.split_once('=').ok_or_else(|| {
                Error::invalid(format!("argument {a:?} in {s:?} is not key=value"))
            })?;
            parsed.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        Ok(Term {
            name: name.trim().to_ascii_lowercase().replace(['-', '_'], ""),
            args: parsed,
        })
    }

    fn allow(&self, keys: &[&str]) -> Result<()> {
        match self.args.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
            Some((k, _)) => Err(Error::invalid(format!(
                "{} does not take argument {k:?}",
                self.name
            ))),
            None => Ok(()),
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.args
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::invalid(format!(
                    "{}: {key} must be a positive integer, got {v:?}",
                    self.name
                ))),
            },
        }
    }
}

fn parse_range(r: &str) -> Result<(usize, usize)> {
    let bad = || Error::invalid(format!("n-gram range {r:?} should look like 1..6"));
    let (a, b) = r.split_once("..").ok_or_else(bad)?;
    let (a, b): (usize, usize) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Which model a cell trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Classical(ClassifierKind),
    Recurrent(CellKind),
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Classical(k) => k.label(),
            ModelKind::Recurrent(k) => k.label(),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        match k.as_str() {
            "bilstm" | "lstm" => Ok(ModelKind::Recurrent(CellKind::Lstm)),
            "bigru" | "gru" => Ok(ModelKind::Recurrent(CellKind::Gru)),
            _ => k.parse().map(ModelKind::Classical).map_err(|_| {
                Error::invalid(format!(
                    "unknown classifier {s:?} (lr, dt, rf, nb, majority, bilstm, bigru)"
                ))
            }),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Every tunable knob of a run. Defaults are the module defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub lr: LrConfig,
    pub dt: DtConfig,
    pub rf: RfConfig,
    pub nb: NbVariant,
    pub rnn: RnnConfig,
    pub doc2vec: EmbeddingConfig,
    pub doc2vec_infer_steps: usize,
    /// Fit the document model on train and test text together (leaks test text).
    pub doc2vec_transductive: bool,
    pub word2vec: EmbeddingConfig,
    pub rank_by: RankBy,
    pub average: MetricAverage,
    pub sentiment_on_clean: bool,
    pub keep_hashtag_text: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            lr: LrConfig::default(),
            dt: DtConfig::default(),
            rf: RfConfig::default(),
            nb: NbVariant::Auto,
            rnn: RnnConfig::new(CellKind::Gru),
            doc2vec: EmbeddingConfig::doc2vec(),
            doc2vec_infer_steps: 50,
            doc2vec_transductive: false,
            word2vec: EmbeddingConfig::word2vec(),
            rank_by: RankBy::TotalFrequency,
            average: MetricAverage::Binary,
            sentiment_on_clean: false,
            keep_hashtag_text: false,
        }
    }
}

fn parse_val<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {v:?} for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("bad boolean {v:?} for {key}"))),
    }
}

impl Settings {
    pub const KEYS: &'static [&'static str] = &[
        "lr.learning_rate",
        "lr.epochs",
        "lr.l2",
        "lr.threshold",
        "dt.max_depth",
        "dt.min_samples_split",
        "dt.min_impurity_decrease",
        "rf.n_trees",
        "rf.max_features",
        "rf.bootstrap",
        "nb.variant",
        "rnn.hidden",
        "rnn.max_len",
        "rnn.batch_size",
        "rnn.lr",
        "rnn.momentum",
        "rnn.epochs",
        "rnn.clip",
        "rnn.embed_dim",
        "doc2vec.epochs",
        "doc2vec.lr",
        "doc2vec.window",
        "doc2vec.negatives",
        "doc2vec.min_count",
        "doc2vec.infer_steps",
        "doc2vec.transductive",
        "word2vec.epochs",
        "word2vec.lr",
        "word2vec.window",
        "word2vec.negatives",
        "word2vec.min_count",
        "features.rank_by",
        "metrics.average",
        "sentiment.on_clean",
        "clean.keep_hashtag_text",
    ];

    /// Set one knob from its dotted key (see [`Settings::KEYS`]).
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let k = key.trim();
        match k {
            "lr.learning_rate" => self.lr.learning_rate = parse_val(k, v)?,
            "lr.epochs" => self.lr.epochs = parse_val(k, v)?,
            "lr.l2" => self.lr.l2 = parse_val(k, v)?,
            "lr.threshold" => self.lr.threshold = parse_val(k, v)?,
            "dt.max_depth" => {
                self.dt.max_depth = match v.trim() {
                    "none" | "unlimited" => None,
                    x => Some(parse_val(k, x)?),
                };
                self.rf.tree.max_depth = self.dt.max_depth;
            }
            "dt.min_samples_split" => {
                self.dt.min_samples_split = parse_val(k, v)?;
                self.rf.tree.min_samples_split = self.dt.min_samples_split;
            }
            "dt.min_impurity_decrease" => {
                self.dt.min_impurity_decrease = parse_val(k, v)?;
                self.rf.tree.min_impurity_decrease = self.dt.min_impurity_decrease;
            }
            "rf.n_trees" => self.rf.n_trees = parse_val(k, v)?,
            "rf.max_features" => {
                self.rf.max_features = match v.trim() {
                    "sqrt" => MaxFeatures::Sqrt,
                    "all" => MaxFeatures::All,
                    x => MaxFeatures::Count(parse_val(k, x)?),
                }
            }
            "rf.bootstrap" => self.rf.bootstrap = parse_bool(k, v)?,
            "nb.variant" => {
                self.nb = match v.trim() {
                    "auto" => NbVariant::Auto,
                    "gaussian" => NbVariant::Gaussian,
                    "multinomial" => NbVariant::Multinomial,
                    _ => {
                        return Err(Error::invalid(format!(
                            "bad value {v:?} for {k} (auto, gaussian, multinomial)"
                        )))
                    }
                }
            }
            "rnn.hidden" => self.rnn.hidden = parse_val(k, v)?,
            "rnn.max_len" => self.rnn.max_len = parse_val(k, v)?,
            "rnn.batch_size" => self.rnn.batch_size = parse_val(k, v)?,
            "rnn.lr" => self.rnn.lr = parse_val(k, v)?,
            "rnn.momentum" => self.rnn.momentum = parse_val(k, v)?,
            "rnn.epochs" => self.rnn.epochs = parse_val(k, v)?,
            "rnn.clip" => self.rnn.clip = parse_val(k, v)?,
            "rnn.embed_dim" => self.rnn.embed_dim = parse_val(k, v)?,
            "doc2vec.epochs" => self.doc2vec.epochs = parse_val(k, v)?,
            "doc2vec.lr" => self.doc2vec.lr_start = parse_val(k, v)?,
            "doc2vec.window" => self.doc2vec.window = parse_val(k, v)?,
            "doc2vec.negatives" => self.doc2vec.negatives = parse_val(k, v)?,
            "doc2vec.min_count" => self.doc2vec.min_count = parse_val(k, v)?,
            "doc2vec.infer_steps" => self.doc2vec_infer_steps = parse_val(k, v)?,
            "doc2vec.transductive" => self.doc2vec_transductive = parse_bool(k, v)?,
            "word2vec.epochs" => self.word2vec.epochs = parse_val(k, v)?,
            "word2vec.lr" => self.word2vec.lr_start = parse_val(k, v)?,
            "word2vec.window" => self.word2vec.window = parse_val(k, v)?,
            "word2vec.negatives" => self.word2vec.negatives = parse_val(k, v)?,
            "word2vec.min_count" => self.word2vec.min_count = parse_val(k, v)?,
            "features.rank_by" => {
                self.rank_by = match v.trim() {
                    "total" | "total_frequency" => RankBy::TotalFrequency,
                    "doc" | "document_frequency" => RankBy::DocumentFrequency,
                    _ => {
                        return Err(Error::invalid(format!(
                            "bad value {v:?} for {k} (total, doc)"
                        )))
                    }
                }
            }
            "metrics.average" => {
                self.average = match v.trim() {
                    "binary" => MetricAverage::Binary,
                    "macro" => MetricAverage::Macro,
                    _ => {
                        return Err(Error::invalid(format!(
                            "bad value {v:?} for {k} (binary, macro)"
                        )))
                    }
                }
            }
            "sentiment.on_clean" => self.sentiment_on_clean = parse_bool(k, v)?,
            "clean.keep_hashtag_text" => self.keep_hashtag_text = parse_bool(k, v)?,
            _ => return Err(Error::invalid(format!("unknown setting {k:?}"))),
        }
        Ok(())
    }

    /// Classifier hyperparameters for a classical cell, seeded where relevant.
    pub fn classifier_spec(&self, kind: ClassifierKind, seed: u64) -> ClassifierSpec {
        match kind {
            ClassifierKind::Lr => ClassifierSpec::Lr(LrConfig { seed, ..self.lr }),
            ClassifierKind::Dt => ClassifierSpec::Dt(self.dt),
            ClassifierKind::Rf => ClassifierSpec::Rf(RfConfig { seed, ..self.rf }),
            ClassifierKind::Nb => ClassifierSpec::Nb(self.nb),
            ClassifierKind::Majority => ClassifierSpec::Majority,
        }
    }
}

/// One cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Table identifier within a preset ("1" … "7"); free-form.
    pub table: String,
    pub title: String,
    pub recipe: Recipe,
    pub model: ModelKind,
    pub ratio: f64,
    pub seed: u64,
    pub settings: Settings,
}

impl ExperimentSpec {
    pub fn new(recipe: Recipe, model: ModelKind, seed: u64) -> Self {
        ExperimentSpec {
            table: "1".into(),
            title: recipe.label(),
            recipe,
            model,
            ratio: 0.7,
            seed,
            settings: Settings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::invalid(format!(
                "split ratio {} outside (0, 1)",
                self.ratio
            )));
        }
        match (&self.recipe, self.model) {
            (Recipe::Features(_), ModelKind::Recurrent(k)) => Err(Error::invalid(format!(
                "{k} needs a word-vector recipe (glove or word2vec), not {}",
                self.recipe.label()
            ))),
            (Recipe::Sequence(_), ModelKind::Classical(k)) => Err(Error::invalid(format!(
                "{k} needs a feature recipe, not {}",
                self.recipe.label()
            ))),
            _ => Ok(()),
        }?;
        let files: Vec<&PathBuf> = match &self.recipe {
            Recipe::Features(s) => s
                .iter()
                .filter_map(|f| match f {
                    FeatureSource::Sent2vec { file: Some(p), .. } => Some(p),
                    _ => None,
                })
                .collect(),
            Recipe::Sequence(WordVectors::Glove { file: Some(p), .. }) => vec![p],
            Recipe::Sequence(_) => vec![],
        };
        match files.into_iter().find(|p| !p.is_file()) {
            Some(p) => Err(Error::invalid(format!(
                "embedding file {} not found",
                p.display()
            ))),
            None => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form of the spec.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
