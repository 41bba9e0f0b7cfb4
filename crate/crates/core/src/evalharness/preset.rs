//! Plain-text experiment presets.
//!
//! ```text
//! # comment
//! ratio = 0.7              # global keys: ratio, seed, any Settings key
//! rf.n_trees = 50
//!
//! [table 1]
//! title = Bag of words and sentiment
//! features = bow(n=1..6, max=1000) + sentiment
//! classifiers = lr, dt, rf, nb
//! ```
//!
//! A section may repeat `features =`; cells are expanded recipe by recipe,
//! then in classifier order.

use std::path::Path;

use super::recipe::{ExperimentSpec, ModelKind, Recipe, Settings};
use crate::{Error, Result};

pub const PAPER_MATRIX: &str = include_str!("../../presets/paper_matrix.preset");

#[derive(Debug, Clone, PartialEq)]
pub struct TableDef {
    pub id: String,
    pub title: String,
    pub recipes: Vec<Recipe>,
    pub models: Vec<ModelKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub ratio: f64,
    pub seed: Option<u64>,
    pub settings: Settings,
    pub tables: Vec<TableDef>,
}

impl Preset {
    /// A bundled preset by name.
    pub fn bundled(name: &str) -> Result<Preset> {
        match name {
            "paper_matrix" => Preset::parse(PAPER_MATRIX, "paper_matrix"),
            _ => Err(Error::invalid(format!(
                "no bundled preset named {name:?} (available: paper_matrix)"
            ))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Preset> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Preset::parse(&text, &path.display().to_string())
    }

    /// `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Preset> {
        let mut preset = Preset {
            ratio: 0.7,
            seed: None,
            settings: Settings::default(),
            tables: Vec::new(),
        };
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let head = head
                    .strip_suffix(']')
                    .ok_or_else(|| err(ln, format!("unterminated section header {line:?}")))?;
                let id = head
                    .trim()
                    .strip_prefix("table")
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| {
                        err(
                            ln,
                            format!("section header should be [table <id>], got {line:?}"),
                        )
                    })?;
                if preset.tables.iter().any(|t| t.id == id) {
                    return Err(err(ln, format!("table {id} defined twice")));
                }
                preset.tables.push(TableDef {
                    id: id.to_string(),
                    title: format!("Table {id}"),
                    recipes: Vec::new(),
                    models: Vec::new(),
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(ln, format!("expected key = value, got {line:?}")))?;
            match preset.tables.last_mut() {
                None => match key {
                    "ratio" => {
                        preset.ratio = value
                            .parse()
                            .ok()
                            .filter(|r: &f64| *r > 0.0 && *r < 1.0)
                            .ok_or_else(|| {
                                err(ln, format!("ratio must be in (0, 1), got {value:?}"))
                            })?
                    }
                    "seed" => {
                        preset.seed = Some(
                            value
                                .parse()
                                .map_err(|_| err(ln, format!("bad seed {value:?}")))?,
                        )
                    }
                    _ => preset
                        .settings
                        .set(key, value)
                        .map_err(|e| err(ln, e.to_string()))?,
                },
                Some(t) => match key {
                    "title" => t.title = value.to_string(),
                    "features" => t
                        .recipes
                        .push(Recipe::parse(value).map_err(|e| err(ln, e.to_string()))?),
                    "classifiers" => {
                        for m in value.split(',').map(str::trim).filter(|m| !m.is_empty()) {
                            t.models
                                .push(m.parse().map_err(|e: Error| err(ln, e.to_string()))?);
                        }
                    }
                    _ => {
                        return Err(err(
                            ln,
                            format!("unknown table key {key:?} (title, features, classifiers)"),
                        ))
                    }
                },
            }
        }
        if preset.tables.is_empty() {
            return Err(err(0, "preset defines no tables".into()));
        }
        for t in &preset.tables {
            if t.recipes.is_empty() || t.models.is_empty() {
                return Err(err(
                    0,
                    format!("table {} needs features and classifiers", t.id),
                ));
            }
        }
        Ok(preset)
    }

    /// One spec per cell, in report order. Validation errors are left to the
    /// runner so a bad cell becomes an ERROR row.
    pub fn expand(&self, seed: u64) -> Vec<ExperimentSpec> {
        let seed = self.seed.unwrap_or(seed);
        let mut out = Vec::new();
        for t in &self.tables {
            for r in &t.recipes {
                for &m in &t.models {
                    out.push(ExperimentSpec {
                        table: t.id.clone(),
                        title: t.title.clone(),
                        recipe: r.clone(),
                        model: m,
                        ratio: self.ratio,
                        seed,
                        settings: self.settings.clone(),
                    });
                }
            }
        }
        out
    }
}
