use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::metrics::{format4, MetricAverage, MetricsReport};
use super::runner::CellOutcome;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 6] = [
    "Classifier",
    "Features",
    "Accuracy",
    "Precision",
    "Recall",
    "F1",
];
pub const ERROR_CELL: &str = "ERROR";

/// One report row. Values are already rendered to four decimals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultRow {
    /// Table id and title; not part of the CSV form.
    pub table: String,
    pub title: String,
    pub classifier: String,
    pub features: String,
    /// Accuracy, precision, recall, F1; `None` for a failed cell.
    pub values: Option<[String; 4]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultTable {
    pub average: MetricAverage,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub fn render_metrics(m: &MetricsReport) -> [String; 4] {
    [
        format4(m.accuracy),
        format4(m.precision),
        format4(m.recall),
        format4(m.f1),
    ]
}

impl ResultTable {
    pub fn from_outcomes(outcomes: &[CellOutcome]) -> ResultTable {
        ResultTable {
            average: outcomes
                .first()
                .map(|o| o.spec.settings.average)
                .unwrap_or_default(),
            rows: outcomes
                .iter()
                .map(|o| ResultRow {
                    table: o.spec.table.clone(),
                    title: o.spec.title.clone(),
                    classifier: o.spec.model.label().to_string(),
                    features: o.spec.recipe.label(),
                    values: o.result.as_ref().ok().map(|r| render_metrics(&r.metrics)),
                })
                .collect(),
        }
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.values.is_none()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            let err = || std::array::from_fn::<String, 4, _>(|_| ERROR_CELL.to_string());
            let v = r.values.clone().unwrap_or_else(err);
            w.write_record([&r.classifier, &r.features, &v[0], &v[1], &v[2], &v[3]])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Parse the CSV form. Table ids and titles are not stored there and come back empty.
    pub fn from_csv(text: &str, average: MetricAverage) -> Result<ResultTable> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != CSV_HEADER {
            return Err(Error::invalid(format!(
                "unexpected report header {header:?}"
            )));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let v: Vec<String> = rec.iter().skip(2).map(String::from).collect();
            let values = if v.iter().all(|x| x == ERROR_CELL) {
                None
            } else {
                for x in &v {
                    if x.parse::<f64>().is_err() {
                        return Err(Error::invalid(format!("bad metric value {x:?}")));
                    }
                }
                Some([v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone()])
            };
            rows.push(ResultRow {
                table: String::new(),
                title: String::new(),
                classifier: rec[0].to_string(),
                features: rec[1].to_string(),
                values,
            });
        }
        Ok(ResultTable { average, rows })
    }

    /// One pipe table per table id, in first-appearance order. Sections whose
    /// rows differ in features get a features column ("Embeddings Used" for
    /// recurrent rows).
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Results\n\n");
        let _ = writeln!(
            out,
            "Metrics: {}. Values rounded half-up to 4 decimals; ERROR marks a failed cell.\n",
            self.average.describe()
        );
        let mut order: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.table.as_str()) {
                order.push(&r.table);
            }
        }
        for id in order {
            let rows: Vec<&ResultRow> = self.rows.iter().filter(|r| r.table == id).collect();
            let title = &rows[0].title;
            match (id.is_empty(), title.is_empty()) {
                (true, _) => out.push_str("## Results\n\n"),
                (false, true) => {
                    let _ = writeln!(out, "## Table {id}\n");
                }
                (false, false) => {
                    let _ = writeln!(out, "## Table {id}: {title}\n");
                }
            }
            let mixed = rows.iter().any(|r| r.features != rows[0].features);
            if !mixed {
                let _ = writeln!(out, "Features: {}\n", rows[0].features);
            }
            let feature_col = if rows.iter().all(|r| r.classifier.starts_with("Bi-")) {
                "Embeddings Used"
            } else {
                "Features"
            };
            let mut head = vec!["Classifier"];
            if mixed {
                head.push(feature_col);
            }
            head.extend(["Accuracy", "Precision", "Recall", "F1 Score"]);
            let _ = writeln!(out, "| {} |", head.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(head.len()));
            for r in rows {
                let mut cells = vec![r.classifier.as_str()];
                if mixed {
                    cells.push(&r.features);
                }
                match &r.values {
                    Some(v) => cells.extend(v.iter().map(String::as_str)),
                    None => cells.extend([ERROR_CELL; 4]),
                }
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Markdown => self.to_markdown(),
        }
    }
}

pub fn emit_report(
    table: &ResultTable,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::invalid("refusing to write an empty report"));
    }
    let path = path.as_ref();
    std::fs::write(path, table.render(format)).map_err(|e| Error::io(path, e))
}
