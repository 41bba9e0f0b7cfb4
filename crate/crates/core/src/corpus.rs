//! Labeled corpora: CSV ingestion, binary label mapping, merging and splitting.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::rng;
use crate::{Error, Result};

/// One data row as it appears in a source CSV, before label mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label_raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Hate,
    NonHate,
}

impl Label {
    pub fn is_hate(self) -> bool {
        self == Label::Hate
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hate => "hate",
            Label::NonHate => "nonhate",
        }
    }

    /// 1.0 for Hate, 0.0 for NonHate.
    pub fn target(self) -> f64 {
        if self.is_hate() {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hate" => Ok(Label::Hate),
            "nonhate" => Ok(Label::NonHate),
            other => Err(Error::UnmappedLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDocument {
    pub id: String,
    pub text: String,
    pub label: Label,
}

impl LabeledDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        LabeledDocument {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

/// Which CSV columns hold the id (optional), text and label.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub id: Option<String>,
    pub text: String,
    pub label: String,
}

impl CsvSchema {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Self {
        CsvSchema {
            id: None,
            text: text.into(),
            label: label.into(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }
}

/// A malformed row that was skipped during loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub records: Vec<RawRecord>,
    pub skipped: Vec<SkippedRow>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Reader-based variant of [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<LoadedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let text_col = find(&schema.text)?;
    let label_col = find(&schema.label)?;
    let id_col = schema.id.as_deref().map(find).transpose()?;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        match rec {
            Ok(rec) => {
                let id = match id_col {
                    Some(c) => rec[c].to_string(),
                    None => row.to_string(),
                };
                if id.is_empty() {
                    skipped.push(SkippedRow {
                        row: row + 1,
                        reason: "empty id".into(),
                    });
                    continue;
                }
                records.push(RawRecord {
                    id,
                    text: rec[text_col].to_string(),
                    label_raw: rec[label_col].to_string(),
                });
            }
            Err(e) => skipped.push(SkippedRow {
                row: row + 1,
                reason: e.to_string(),
            }),
        }
    }
    Ok(LoadedCsv { records, skipped })
}

/// Source label value → binary class.
#[derive(Debug, Clone, Default)]
pub struct LabelMapping {
    table: HashMap<String, Label>,
}

impl LabelMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(mut self, raw: impl Into<String>, label: Label) -> Self {
        self.table.insert(raw.into(), label);
        self
    }

    /// Three-way hate/offensive/neither collapsed to binary: only `hate` is
    /// positive. Both the names and the numeric class codes (0 = hate,
    /// 1 = offensive, 2 = neither) are accepted.
    pub fn hate_offensive_neither() -> Self {
        Self::new()
            .insert("hate", Label::Hate)
            .insert("offensive", Label::NonHate)
            .insert("neither", Label::NonHate)
            .insert("0", Label::Hate)
            .insert("1", Label::NonHate)
            .insert("2", Label::NonHate)
    }

    /// The artifact's own `hate`/`nonhate` spelling.
    pub fn canonical() -> Self {
        Self::new()
            .insert("hate", Label::Hate)
            .insert("nonhate", Label::NonHate)
    }

    /// Parse `raw=hate,raw2=nonhate,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut m = Self::new();
        for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (raw, lab) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("label mapping entry {pair:?} lacks '='")))?;
            m = m.insert(raw.trim(), lab.trim().parse()?);
        }
        Ok(m)
    }

    pub fn get(&self, raw: &str) -> Option<Label> {
        self.table.get(raw).copied()
    }
}

pub fn binarize_labels(
    records: &[RawRecord],
    mapping: &LabelMapping,
) -> Result<Vec<LabeledDocument>> {
    records
        .iter()
        .map(|r| {
            let label = mapping
                .get(&r.label_raw)
                .ok_or_else(|| Error::UnmappedLabel(r.label_raw.clone()))?;
            Ok(LabeledDocument::new(r.id.clone(), r.text.clone(), label))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub docs: Vec<LabeledDocument>,
    pub duplicates_removed: usize,
}

/// Namespace prefixes applied to the ids of the two merged sources.
pub const MERGE_PREFIXES: [&str; 2] = ["a:", "b:"];

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Concatenate two corpora, prefixing ids with their source. With `dedupe`,
/// only the first document of each NFC-identical text survives.
pub fn merge_corpora(a: &[LabeledDocument], b: &[LabeledDocument], dedupe: bool) -> MergeOutcome {
    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(a.len() + b.len());
    let mut duplicates_removed = 0;
    for (prefix, source) in MERGE_PREFIXES.iter().zip([a, b]) {
        for d in source {
            if dedupe && !seen.insert(nfc(&d.text)) {
                duplicates_removed += 1;
                continue;
            }
            docs.push(LabeledDocument::new(
                format!("{prefix}{}", d.id),
                d.text.clone(),
                d.label,
            ));
        }
    }
    MergeOutcome {
        docs,
        duplicates_removed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitOptions {
    /// Split each class separately so both sides keep the class balance.
    pub stratified: bool,
}

/// Seeded shuffle (ChaCha8 stream `seed`, Fisher-Yates), then the first
/// `floor(ratio * N)` documents go to train and the rest to test.
pub fn split(docs: &[LabeledDocument], ratio: f64, seed: u64) -> Result<DatasetSplit> {
    split_with(docs, ratio, seed, SplitOptions::default())
}

pub fn split_with(
    docs: &[LabeledDocument],
    ratio: f64,
    seed: u64,
    opts: SplitOptions,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    if docs.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 documents to split, got {}",
            docs.len()
        )));
    }
    let mut rng = rng::seeded(seed);
    let (train_idx, test_idx) = if opts.stratified {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [Label::Hate, Label::NonHate] {
            let mut idx: Vec<usize> = (0..docs.len())
                .filter(|&i| docs[i].label == class)
                .collect();
            idx.shuffle(&mut rng);
            let n_train = (ratio * idx.len() as f64).floor() as usize;
            train.extend_from_slice(&idx[..n_train]);
            test.extend_from_slice(&idx[n_train..]);
        }
        (train, test)
    } else {
        let mut idx: Vec<usize> = (0..docs.len()).collect();
        idx.shuffle(&mut rng);
        let n_train = (ratio * docs.len() as f64).floor() as usize;
        let test = idx.split_off(n_train);
        (idx, test)
    };
    Ok(DatasetSplit {
        train: train_idx.iter().map(|&i| docs[i].clone()).collect(),
        test: test_idx.iter().map(|&i| docs[i].clone()).collect(),
        ratio,
        seed,
    })
}

/// Write documents as `id,text,label` with `label ∈ {hate, nonhate}`.
pub fn write_labeled_csv(path: impl AsRef<Path>, docs: &[LabeledDocument]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["id", "text", "label"])?;
    for d in docs {
        w.write_record([d.id.as_str(), d.text.as_str(), d.label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a file produced by [`write_labeled_csv`]. Malformed rows are errors here.
pub fn read_labeled_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledDocument>> {
    let loaded = load_csv(&path, &CsvSchema::new("text", "label").with_id("id"))?;
    if let Some(bad) = loaded.skipped.first() {
        return Err(Error::Parse {
            path: path.as_ref().display().to_string(),
            line: bad.row + 1,
            message: bad.reason.clone(),
        });
    }
    binarize_labels(&loaded.records, &LabelMapping::canonical())
}

pub fn write_split(dir: impl AsRef<Path>, split: &DatasetSplit) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_labeled_csv(dir.join("train.csv"), &split.train)?;
    write_labeled_csv(dir.join("test.csv"), &split.test)
}

/// Load `train.csv`/`test.csv` from a split directory. Ratio and seed are not
/// persisted; ratio is recomputed from the sizes and seed is reported as 0.
pub fn read_split(dir: impl AsRef<Path>) -> Result<DatasetSplit> {
    let dir = dir.as_ref();
    let train = read_labeled_csv(dir.join("train.csv"))?;
    let test = read_labeled_csv(dir.join("test.csv"))?;
    let n = (train.len() + test.len()).max(1);
    Ok(DatasetSplit {
        ratio: train.len() as f64 / n as f64,
        seed: 0,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(n: usize) -> Vec<LabeledDocument> {
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 {
                    Label::Hate
                } else {
                    Label::NonHate
                };
                LabeledDocument::new(i.to_string(), format!("text {i}"), label)
            })
            .collect()
    }

    #[test]
    fn load_without_id_column_uses_row_index() {
        let data = "tweet,class\nhello,0\nworld,1\nagain,2\n";
        let out = read_csv(data.as_bytes(), &CsvSchema::new("tweet", "class")).unwrap();
        let ids: Vec<_> = out.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["0", "1", "2"]);
        assert_eq!(out.records[1].text, "world");
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn header_only_is_empty() {
        let out = read_csv(
            "tweet,class\n".as_bytes(),
            &CsvSchema::new("tweet", "class"),
        )
        .unwrap();
        assert!(out.records.is_empty());
    }

    #[test]
    fn missing_column_is_reported() {
        let err = read_csv("a,b\n1,2\n".as_bytes(), &CsvSchema::new("tweet", "b")).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "tweet"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv("/nonexistent/x.csv", &CsvSchema::new("t", "l")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn malformed_row_is_skipped_with_row_number() {
        let data = "text,label\nok,hate\nbad,row,extra\nfine,nonhate\n";
        let out = read_csv(data.as_bytes(), &CsvSchema::new("text", "label")).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].row, 2);
    }

    #[test]
    fn quoted_commas_survive_like_a_plain_field_split_of_the_quoted_value() {
        // Reference: RFC-4180 says a quoted field is taken verbatim minus the quotes.
        let raw_field = "\"one, two, \"\"three\"\"\"";
        let expected = raw_field[1..raw_field.len() - 1].replace("\"\"", "\"");
        let data = format!("text,label\n{raw_field},hate\n");
        let out = read_csv(data.as_bytes(), &CsvSchema::new("text", "label")).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].text, expected);
        assert_eq!(out.records[0].text, "one, two, \"three\"");
    }

    #[test]
    fn binarize_with_three_way_mapping() {
        let recs: Vec<RawRecord> = ["hate", "offensive", "neither"]
            .iter()
            .enumerate()
            .map(|(i, l)| RawRecord {
                id: i.to_string(),
                text: String::new(),
                label_raw: l.to_string(),
            })
            .collect();
        let out = binarize_labels(&recs, &LabelMapping::hate_offensive_neither()).unwrap();
        let labels: Vec<_> = out.iter().map(|d| d.label).collect();
        assert_eq!(labels, [Label::Hate, Label::NonHate, Label::NonHate]);
    }

    #[test]
    fn binarize_all_hate_and_unmapped() {
        let rec = |l: &str| RawRecord {
            id: "x".into(),
            text: "t".into(),
            label_raw: l.into(),
        };
        let m = LabelMapping::hate_offensive_neither();
        let out = binarize_labels(&[rec("hate"), rec("hate")], &m).unwrap();
        assert!(out.iter().all(|d| d.label == Label::Hate));
        let err = binarize_labels(&[rec("spam")], &m).unwrap_err();
        assert!(err.to_string().contains("spam"));
    }

    #[test]
    fn parse_mapping() {
        let m = LabelMapping::parse("0=hate, 1=nonhate,2=nonhate").unwrap();
        assert_eq!(m.get("0"), Some(Label::Hate));
        assert_eq!(m.get("2"), Some(Label::NonHate));
        assert!(LabelMapping::parse("0=maybe").is_err());
    }

    #[test]
    fn merge_concatenates_and_namespaces() {
        let out = merge_corpora(&docs(2), &docs(3), false);
        assert_eq!(out.docs.len(), 5);
        assert_eq!(out.docs[0].id, "a:0");
        assert_eq!(out.docs[2].id, "b:0");
        assert_eq!(out.duplicates_removed, 0);
    }

    #[test]
    fn merge_dedupes_across_sources() {
        let a = vec![LabeledDocument::new("1", "same text", Label::Hate)];
        let b = vec![
            LabeledDocument::new("9", "same text", Label::Hate),
            LabeledDocument::new("8", "other", Label::NonHate),
        ];
        let out = merge_corpora(&a, &b, true);
        assert_eq!(out.docs.len(), 2);
        assert_eq!(out.duplicates_removed, 1);
        assert_eq!(out.docs[0].id, "a:1");
    }

    #[test]
    fn merge_dedupe_uses_nfc() {
        let composed = LabeledDocument::new("1", "caf\u{e9}", Label::Hate);
        let decomposed = LabeledDocument::new("2", "cafe\u{301}", Label::Hate);
        let out = merge_corpora(&[composed], &[decomposed], true);
        assert_eq!(out.docs.len(), 1);
    }

    #[test]
    fn merge_distinct_is_noop() {
        let out = merge_corpora(&docs(3), &[], true);
        assert_eq!(out.docs.len(), 3);
        assert_eq!(out.duplicates_removed, 0);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = docs(10);
        let s = split(&d, 0.7, 42).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (7, 3));
        assert_eq!(s, split(&d, 0.7, 42).unwrap());
    }

    #[test]
    fn split_seeds_change_membership() {
        let d = docs(10);
        let a = split(&d, 0.7, 1).unwrap();
        let b = split(&d, 0.7, 2).unwrap();
        assert_eq!(a.train.len(), b.train.len());
        let ids = |s: &DatasetSplit| s.train.iter().map(|d| d.id.clone()).collect::<HashSet<_>>();
        assert_ne!(ids(&a), ids(&b));
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(split(&docs(10), 0.0, 1).is_err());
        assert!(split(&docs(10), 1.0, 1).is_err());
        assert!(split(&docs(1), 0.5, 1).is_err());
    }

    #[test]
    fn stratified_split_keeps_balance() {
        let d = docs(20);
        let s = split_with(&d, 0.7, 3, SplitOptions { stratified: true }).unwrap();
        let hate = s.train.iter().filter(|d| d.label.is_hate()).count();
        assert_eq!(hate, 7);
        assert_eq!(s.train.len(), 14);
    }

    #[test]
    fn split_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = docs(6);
        d[0].text = "has, comma and \"quotes\"".into();
        let s = split(&d, 0.5, 9).unwrap();
        write_split(dir.path(), &s).unwrap();
        let back = read_split(dir.path()).unwrap();
        assert_eq!(back.train, s.train);
        assert_eq!(back.test, s.test);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..60, ratio in 0.05f64..0.95, seed in any::<u64>()) {
            let d = docs(n);
            let s = split(&d, ratio, seed).unwrap();
            prop_assert_eq!(s.train.len(), (ratio * n as f64).floor() as usize);
            let mut ids: Vec<String> = s.train.iter().chain(&s.test).map(|d| d.id.clone()).collect();
            ids.sort();
            let mut expected: Vec<String> = d.iter().map(|d| d.id.clone()).collect();
            expected.sort();
            prop_assert_eq!(ids, expected);
        }

        #[test]
        fn binarize_preserves_count_and_order(labels in proptest::collection::vec(0u8..3, 0..40)) {
            let recs: Vec<RawRecord> = labels.iter().enumerate().map(|(i, l)| RawRecord {
                id: i.to_string(), text: String::new(), label_raw: l.to_string(),
            }).collect();
            let out = binarize_labels(&recs, &LabelMapping::hate_offensive_neither()).unwrap();
            prop_assert_eq!(out.len(), recs.len());
            for (o, r) in out.iter().zip(&recs) {
                prop_assert_eq!(&o.id, &r.id);
                prop_assert_eq!(o.label == Label::Hate, r.label_raw == "0");
            }
        }

        #[test]
        fn dedupe_merge_is_idempotent(texts in proptest::collection::vec("[ab ]{0,4}", 0..20)) {
            let d: Vec<LabeledDocument> = texts.iter().enumerate()
                .map(|(i, t)| LabeledDocument::new(i.to_string(), t.clone(), Label::Hate)).collect();
            let once = merge_corpora(&d, &[], true);
            let twice = merge_corpora(&once.docs, &[], true);
            prop_assert_eq!(twice.duplicates_removed, 0);
            let texts = |v: &[LabeledDocument]| v.iter().map(|d| (d.text.clone(), d.label)).collect::<Vec<_>>();
            prop_assert_eq!(texts(&once.docs), texts(&twice.docs));
        }
    }
}
