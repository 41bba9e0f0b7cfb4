//! Run configuration: defaults, then flags, then an optional config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hatebench::corpus::{
    binarize_labels, load_csv, nfc, read_split, split, CsvSchema, DatasetSplit, Label,
    LabelMapping, LabeledDocument,
};
use hatebench::evalharness::Settings;
use hatebench::synthetic;
use serde::Serialize;

use crate::args::{CorpusArgs, ExperimentArgs};

/// Where documents come from.
#[derive(Debug, Clone, Serialize)]
pub enum Source {
    Bundled,
    Files(Vec<PathBuf>),
    SplitDir(PathBuf),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub source: Source,
    pub text_col: String,
    pub label_col: String,
    pub id_col: Option<String>,
    pub label_map: Option<String>,
    pub dedupe: bool,
    pub ratio: f64,
    pub seed: u64,
    pub recipe: Option<String>,
    pub clf: Option<String>,
    pub preset: Option<String>,
    pub jobs: usize,
    #[serde(skip)]
    pub settings: Settings,
    /// `key=value` settings in the order they were applied.
    pub overrides: Vec<(String, String)>,
}

/// Loaded documents plus the input files they came from.
pub struct Corpus {
    pub docs: Vec<LabeledDocument>,
    pub split: Option<DatasetSplit>,
    pub inputs: Vec<crate::output::InputRecord>,
    pub duplicates_removed: usize,
}

impl RunConfig {
    pub fn from_args(c: &CorpusArgs, e: &ExperimentArgs) -> Result<Self> {
        let source = match (&c.split_dir, c.corpus.is_empty()) {
            (Some(_), false) => bail!("--split-dir and --corpus are mutually exclusive"),
            (Some(d), true) => Source::SplitDir(d.clone()),
            (None, true) => Source::Bundled,
            (None, false) => Source::Files(c.corpus.clone()),
        };
        let mut cfg = RunConfig {
            source,
            text_col: c.text_col.clone(),
            label_col: c.label_col.clone(),
            id_col: c.id_col.clone(),
            label_map: c.label_map.clone(),
            dedupe: !c.no_dedupe,
            ratio: e.ratio,
            seed: e.seed,
            recipe: None,
            clf: None,
            preset: None,
            jobs: e.jobs,
            settings: Settings::default(),
            overrides: Vec::new(),
        };
        for kv in &e.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.apply(k.trim(), v.trim(), "--set")?;
        }
        Ok(cfg)
    }

    /// Apply a config file on top of the flags.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key = value", path.display(), i + 1))?;
            self.apply(k.trim(), v.trim(), &format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str, origin: &str) -> Result<()> {
        let num = |what: &str| format!("{origin}: bad {what} {value:?}");
        match key {
            "seed" => self.seed = value.parse().with_context(|| num("seed"))?,
            "ratio" => self.ratio = value.parse().with_context(|| num("ratio"))?,
            "jobs" => self.jobs = value.parse().with_context(|| num("job count"))?,
            "recipe" => self.recipe = Some(value.to_string()),
            "clf" | "classifier" => self.clf = Some(value.to_string()),
            "preset" => self.preset = Some(value.to_string()),
            "corpus" => {
                let paths = value.split(',').map(|p| PathBuf::from(p.trim())).collect();
                self.source = Source::Files(paths);
            }
            "split_dir" => self.source = Source::SplitDir(PathBuf::from(value)),
            "text_col" => self.text_col = value.to_string(),
            "label_col" => self.label_col = value.to_string(),
            "id_col" => self.id_col = Some(value.to_string()),
            "label_map" => self.label_map = Some(value.to_string()),
            "dedupe" => {
                self.dedupe = match value {
                    "true" | "on" | "yes" | "1" => true,
                    "false" | "off" | "no" | "0" => false,
                    _ => bail!("{}", num("boolean")),
                }
            }
            _ => {
                self.settings
                    .set(key, value)
                    .with_context(|| format!("{origin}: {key}"))?;
                self.overrides.push((key.to_string(), value.to_string()));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> CsvSchema {
        let s = CsvSchema::new(&self.text_col, &self.label_col);
        match &self.id_col {
            Some(id) => s.with_id(id),
            None => s,
        }
    }

    pub fn mapping(&self) -> Result<LabelMapping> {
        match &self.label_map {
            Some(m) => Ok(LabelMapping::parse(m)?),
            None => Ok(default_mapping()),
        }
    }

    pub fn load(&self) -> Result<Corpus> {
        match &self.source {
            Source::Bundled => Ok(Corpus {
                docs: synthetic::bundled_toy_corpus(),
                split: None,
                inputs: vec![crate::output::InputRecord::bundled(
                    "toy_corpus.csv",
                    synthetic::BUNDLED_TOY_CSV.as_bytes(),
                )],
                duplicates_removed: 0,
            }),
            Source::SplitDir(dir) => {
                let split = read_split(dir)
                    .with_context(|| format!("cannot load split from {}", dir.display()))?;
                let inputs = ["train.csv", "test.csv"]
                    .iter()
                    .map(|f| crate::output::InputRecord::file(&dir.join(f)))
                    .collect::<Result<_>>()?;
                Ok(Corpus {
                    docs: split.train.iter().chain(&split.test).cloned().collect(),
                    split: Some(split),
                    inputs,
                    duplicates_removed: 0,
                })
            }
            Source::Files(paths) => {
                if paths.len() > 2 {
                    bail!("at most two corpora can be merged, got {}", paths.len());
                }
                let schema = self.schema();
                let mapping = self.mapping()?;
                let mut parts = Vec::new();
                let mut inputs = Vec::new();
                for p in paths {
                    let loaded = load_csv(p, &schema)
                        .with_context(|| format!("loading corpus {}", p.display()))?;
                    if !loaded.skipped.is_empty() {
                        eprintln!(
                            "{}: skipped {} malformed rows",
                            p.display(),
                            loaded.skipped.len()
                        );
                    }
                    parts.push(
                        binarize_labels(&loaded.records, &mapping)
                            .with_context(|| format!("labels in {}", p.display()))?,
                    );
                    inputs.push(crate::output::InputRecord::file(p)?);
                }
                let (docs, removed) = if parts.len() == 2 {
                    let m = hatebench::corpus::merge_corpora(&parts[0], &parts[1], self.dedupe);
                    (m.docs, m.duplicates_removed)
                } else {
                    let docs = parts.pop().unwrap_or_default();
                    if self.dedupe {
                        dedupe(docs)
                    } else {
                        (docs, 0)
                    }
                };
                Ok(Corpus {
                    docs,
                    split: None,
                    inputs,
                    duplicates_removed: removed,
                })
            }
        }
    }
}

/// Both the `hate`/`nonhate` spelling and hate/offensive/neither (names or 0/1/2).
pub fn default_mapping() -> LabelMapping {
    LabelMapping::hate_offensive_neither().insert("nonhate", Label::NonHate)
}

fn dedupe(docs: Vec<LabeledDocument>) -> (Vec<LabeledDocument>, usize) {
    let mut seen = std::collections::HashSet::new();
    let n = docs.len();
    let kept: Vec<_> = docs
        .into_iter()
        .filter(|d| seen.insert(nfc(&d.text)))
        .collect();
    let removed = n - kept.len();
    (kept, removed)
}

impl Corpus {
    /// The persisted split, or a fresh seeded one.
    pub fn split(&self, ratio: f64, seed: u64) -> Result<DatasetSplit> {
        match &self.split {
            Some(s) => Ok(s.clone()),
            None => Ok(split(&self.docs, ratio, seed)?),
        }
    }
}
