//! Output files, provenance records and the input manifest.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hatebench::evalharness::report::render_metrics;
use hatebench::evalharness::{CellOutcome, ConfusionCounts, MetricAverage};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl InputRecord {
    pub fn file(path: &Path) -> Result<Self> {
        let data =
            std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(InputRecord {
            path: path.display().to_string(),
            bytes: data.len(),
            sha256: sha256_hex(&data),
        })
    }

    pub fn bundled(name: &str, data: &[u8]) -> Self {
        InputRecord {
            path: format!("bundled:{name}"),
            bytes: data.len(),
            sha256: sha256_hex(data),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// Collects written files so the manifest can list them.
pub struct OutDir {
    pub root: PathBuf,
    written: Vec<OutputRecord>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, data).with_context(|| format!("cannot write {}", p.display()))?;
        self.note(name)
    }

    /// Record a file some other writer produced.
    pub fn note(&mut self, name: &str) -> Result<()> {
        let p = self.path(name);
        let data =
            std::fs::read(&p).with_context(|| format!("cannot read back {}", p.display()))?;
        self.written.retain(|o| o.file != name);
        self.written.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(&data),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Write `manifest.json` last, listing inputs, arguments and every output.
    pub fn finish(
        mut self,
        command: &str,
        arguments: serde_json::Value,
        inputs: &[InputRecord],
    ) -> Result<()> {
        let manifest = serde_json::json!({
            "tool": "hatebench",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "arguments": arguments,
            "inputs": inputs,
            "outputs": self.written,
        });
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        let p = self.path("manifest.json");
        std::fs::write(&p, s).with_context(|| format!("cannot write {}", p.display()))?;
        self.written.clear();
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub table: String,
    pub title: String,
    pub classifier: String,
    pub features: String,
    pub recipe: String,
    pub spec_hash: String,
    pub seed: u64,
    pub ratio: f64,
    pub average: MetricAverage,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    pub widths: Vec<hatebench::evalharness::runner::BlockWidth>,
    pub train_rows: Option<usize>,
    pub test_rows: Option<usize>,
    pub fit_phase_test_accesses: Option<usize>,
    pub transductive: bool,
    pub confusion: Option<ConfusionCounts>,
    /// Accuracy, precision, recall, F1 as reported.
    pub metrics: Option<[String; 4]>,
}

pub fn provenance(o: &CellOutcome) -> Provenance {
    let r = o.result.as_ref().ok();
    Provenance {
        table: o.spec.table.clone(),
        title: o.spec.title.clone(),
        classifier: o.spec.model.label().into(),
        features: o.spec.recipe.label(),
        recipe: o.spec.recipe.to_string(),
        spec_hash: o.spec.hash(),
        seed: o.spec.seed,
        ratio: o.spec.ratio,
        average: o.spec.settings.average,
        status: if r.is_some() { "ok" } else { "error" },
        error: o.result.as_ref().err().cloned(),
        width: r.and_then(|r| r.width),
        widths: r.map(|r| r.widths.clone()).unwrap_or_default(),
        train_rows: r.map(|r| r.train_rows),
        test_rows: r.map(|r| r.test_rows),
        fit_phase_test_accesses: r.map(|r| r.hygiene.fit_phase_test_accesses),
        transductive: r.is_some_and(|r| r.hygiene.leak_permitted),
        confusion: r.map(|r| r.confusion),
        metrics: r.map(|r| render_metrics(&r.metrics)),
    }
}
