//! Frequency and sentiment features.
//!
//! Vocabularies are fitted on training sequences only and are immutable once
//! built; transforming further documents never changes them.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::matrix::DenseMatrix;
use crate::textprep::TokenSequence;
use crate::{Error, Result};

const BUNDLED_LEXICON: &str = include_str!("../data/sentiment_lexicon.tsv");

/// All contiguous n-grams for every n in `[n_min, n_max]`, space-joined, with
/// multiplicity. Ordered by n, then by start position.
pub fn extract_ngrams(tokens: &[String], n_min: usize, n_max: usize) -> Vec<String> {
    assert!(
        n_min >= 1 && n_min <= n_max,
        "invalid n-gram range {n_min}..={n_max}"
    );
    let mut out = Vec::new();
    for n in n_min..=n_max {
        if tokens.len() < n {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

fn ngram_counts(tokens: &[String], n_min: usize, n_max: usize) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for g in extract_ngrams(tokens, n_min, n_max) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// How candidate n-grams are ranked when the vocabulary is capped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankBy {
    /// Sum of multiplicities over the corpus; ties → higher doc_freq, then lexicographic.
    #[default]
    TotalFrequency,
    /// Document frequency; ties → higher total frequency, then lexicographic.
    DocumentFrequency,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramVocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_min: usize,
    n_max: usize,
    max_features: usize,
    corpus_size: usize,
}

impl NgramVocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn index_of(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn n_range(&self) -> (usize, usize) {
        (self.n_min, self.n_max)
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn column_labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| format!("ngram:{e}")).collect()
    }

    /// TSV `ngram<TAB>index<TAB>doc_freq` preceded by a
    /// `#vocab<TAB>n_min=..<TAB>n_max=..<TAB>N=..<TAB>max_features=..` header.
    pub fn to_tsv(&self) -> String {
        let mut s = format!(
            "#vocab\tn_min={}\tn_max={}\tN={}\tmax_features={}\n",
            self.n_min, self.n_max, self.corpus_size, self.max_features
        );
        for (i, (e, df)) in self.entries.iter().zip(&self.doc_freq).enumerate() {
            let _ = writeln!(s, "{e}\t{i}\t{df}");
        }
        s
    }

    pub fn from_tsv(s: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: "vocabulary".into(),
            line,
            message,
        };
        let mut lines = s.lines();
        let header = lines
            .next()
            .ok_or_else(|| perr(1, "empty vocabulary file".into()))?;
        let mut fields: HashMap<&str, usize> = HashMap::new();
        let mut parts = header.split('\t');
        if parts.next() != Some("#vocab") {
            return Err(perr(1, "missing #vocab header".into()));
        }
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| perr(1, format!("bad header field {p:?}")))?;
            let v = v
                .parse()
                .map_err(|_| perr(1, format!("bad header value {p:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| perr(1, format!("header lacks {k}")))
        };
        let (n_min, n_max, corpus_size, max_features) = (
            get("n_min")?,
            get("n_max")?,
            get("N")?,
            get("max_features")?,
        );
        let mut entries = Vec::new();
        let mut doc_freq = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(perr(i + 2, "expected 3 tab-separated columns".into()));
            }
            let idx: usize = cols[1]
                .parse()
                .map_err(|_| perr(i + 2, "bad index".into()))?;
            if idx != entries.len() {
                return Err(perr(i + 2, format!("index {idx} out of order")));
            }
            entries.push(cols[0].to_string());
            doc_freq.push(
                cols[2]
                    .parse()
                    .map_err(|_| perr(i + 2, "bad doc_freq".into()))?,
            );
        }
        let index = entries
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        Ok(NgramVocabulary {
            entries,
            index,
            doc_freq,
            n_min,
            n_max,
            max_features,
            corpus_size,
        })
    }
}

pub fn fit_vocabulary(
    corpus: &[TokenSequence],
    n_min: usize,
    n_max: usize,
    max_features: usize,
) -> Result<NgramVocabulary> {
    fit_vocabulary_ranked(corpus, n_min, n_max, max_features, RankBy::TotalFrequency)
}

pub fn fit_vocabulary_ranked(
    corpus: &[TokenSequence],
    n_min: usize,
    n_max: usize,
    max_features: usize,
    rank_by: RankBy,
) -> Result<NgramVocabulary> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot fit a vocabulary on an empty corpus"));
    }
    if n_min < 1 || n_min > n_max {
        return Err(Error::invalid(format!(
            "invalid n-gram range {n_min}..={n_max}"
        )));
    }
    // ngram -> (total frequency, document frequency)
    let mut stats: HashMap<String, (usize, usize)> = HashMap::new();
    for doc in corpus {
        for (g, c) in ngram_counts(&doc.tokens, n_min, n_max) {
            let e = stats.entry(g).or_insert((0, 0));
            e.0 += c;
            e.1 += 1;
        }
    }
    let mut ranked: Vec<(String, usize, usize)> =
        stats.into_iter().map(|(g, (tf, df))| (g, tf, df)).collect();
    ranked.sort_unstable_by(|a, b| {
        let key = |x: &(String, usize, usize)| match rank_by {
            RankBy::TotalFrequency => (x.1, x.2),
            RankBy::DocumentFrequency => (x.2, x.1),
        };
        key(b).cmp(&key(a)).then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(max_features);
    let entries: Vec<String> = ranked.iter().map(|r| r.0.clone()).collect();
    let doc_freq = ranked.iter().map(|r| r.2).collect();
    let index = entries
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, e)| (e, i))
        .collect();
    Ok(NgramVocabulary {
        entries,
        index,
        doc_freq,
        n_min,
        n_max,
        max_features,
        corpus_size: corpus.len(),
    })
}

/// Raw n-gram counts over the vocabulary columns.
pub fn bow_transform(tokens: &[String], vocab: &NgramVocabulary) -> Vec<f64> {
    let mut row = vec![0.0; vocab.len()];
    if vocab.is_empty() {
        return row;
    }
    for g in extract_ngrams(tokens, vocab.n_min, vocab.n_max) {
        if let Some(j) = vocab.index_of(&g) {
            row[j] += 1.0;
        }
    }
    row
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdfWeights {
    pub weights: Vec<f64>,
}

/// Smoothed inverse document frequency: `ln((1 + N) / (1 + df)) + 1`.
pub fn compute_idf(vocab: &NgramVocabulary) -> IdfWeights {
    let n = vocab.corpus_size as f64;
    IdfWeights {
        weights: vocab
            .doc_freq
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect(),
    }
}

/// `count · idf` per column, then L2 row normalization (zero rows stay zero).
pub fn tfidf_transform(tokens: &[String], vocab: &NgramVocabulary, idf: &IdfWeights) -> Vec<f64> {
    assert_eq!(
        idf.weights.len(),
        vocab.len(),
        "idf weights do not match vocabulary"
    );
    let mut row = bow_transform(tokens, vocab);
    for (v, w) in row.iter_mut().zip(&idf.weights) {
        *v *= w;
    }
    l2_normalize(&mut row);
    row
}

pub(crate) fn l2_normalize(row: &mut [f64]) {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentimentLexicon {
    polarity: HashMap<String, f64>,
}

impl SentimentLexicon {
    /// TSV `word<TAB>polarity`, `#` comment lines. Polarities outside [-1, 1] are rejected.
    pub fn parse(contents: &str) -> Result<Self> {
        let mut polarity = HashMap::new();
        for (i, line) in contents.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: String| Error::Parse {
                path: "lexicon".into(),
                line: i + 1,
                message,
            };
            let (w, p) = line
                .split_once('\t')
                .ok_or_else(|| perr("expected word<TAB>polarity".into()))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| perr(format!("bad polarity {p:?}")))?;
            if !(-1.0..=1.0).contains(&p) {
                return Err(perr(format!("polarity {p} outside [-1, 1]")));
            }
            polarity.insert(w.trim().to_string(), p);
        }
        Ok(SentimentLexicon { polarity })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&s)
    }

    /// Bundled English lexicon (2,891 words, derived from the MIT-licensed
    /// VADER lexicon: mean rating / 4, entries with |rating| ≥ 1.8).
    pub fn english() -> &'static SentimentLexicon {
        static LEX: LazyLock<SentimentLexicon> = LazyLock::new(|| {
            SentimentLexicon::parse(BUNDLED_LEXICON).expect("bundled lexicon is valid")
        });
        &LEX
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        SentimentLexicon {
            polarity: pairs
                .into_iter()
                .map(|(w, p)| (w.into(), p.clamp(-1.0, 1.0)))
                .collect(),
        }
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.polarity.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.polarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polarity.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negators {
    words: HashSet<String>,
    /// Treat any token ending in `n't` as a negator too.
    contractions: bool,
}

impl Default for Negators {
    fn default() -> Self {
        Negators {
            words: ["not", "no", "never", "nor", "cannot", "neither", "without"]
                .into_iter()
                .map(String::from)
                .collect(),
            contractions: true,
        }
    }
}

impl Negators {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Negators {
            words: words.into_iter().map(Into::into).collect(),
            contractions: false,
        }
    }

    pub fn none() -> Self {
        Self::from_words(Vec::<String>::new())
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w) || (self.contractions && (w.ends_with("n't") || w.ends_with("n’t")))
    }
}

/// Mean polarity over lexicon hits; a hit directly after a negator is sign-flipped.
pub fn sentiment_score(tokens: &[String], lexicon: &SentimentLexicon, negators: &Negators) -> f64 {
    let mut sum = 0.0;
    let mut hits = 0usize;
    for (i, t) in tokens.iter().enumerate() {
        if let Some(p) = lexicon.get(t) {
            let negated = i > 0 && negators.contains(&tokens[i - 1]);
            sum += if negated { -p } else { p };
            hits += 1;
        }
    }
    if hits == 0 {
        0.0
    } else {
        (sum / hits as f64).clamp(-1.0, 1.0)
    }
}

/// Rows keyed by document id, columns tagged with their provenance
/// (`ngram:…`, `sentiment`, `doc2vec:k`, `sent2vec:k`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: DenseMatrix,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, columns: Vec<String>, values: DenseMatrix) -> Result<Self> {
        if ids.len() != values.rows() {
            return Err(Error::DimensionMismatch {
                expected: values.rows(),
                actual: ids.len(),
            });
        }
        if columns.len() != values.cols() {
            return Err(Error::DimensionMismatch {
                expected: values.cols(),
                actual: columns.len(),
            });
        }
        Ok(FeatureMatrix {
            ids,
            columns,
            values,
        })
    }

    pub fn from_rows(ids: Vec<String>, columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let values = if rows.is_empty() {
            DenseMatrix::zeros(0, columns.len())
        } else {
            DenseMatrix::from_rows(rows)?
        };
        Self::new(ids, columns, values)
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Columns whose label starts with `prefix`, in order.
    pub fn select_prefix(&self, prefix: &str) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.columns.len())
            .filter(|&j| self.columns[j].starts_with(prefix))
            .collect();
        let rows: Vec<Vec<f64>> = self
            .values
            .iter_rows()
            .map(|r| idx.iter().map(|&j| r[j]).collect())
            .collect();
        let columns = idx.iter().map(|&j| self.columns[j].clone()).collect();
        let values =
            DenseMatrix::from_vec(self.len(), idx.len(), rows.concat()).expect("consistent shape");
        FeatureMatrix {
            ids: self.ids.clone(),
            columns,
            values,
        }
    }

    /// CSV with header `id[,label],<column labels>`.
    pub fn write_csv(&self, path: impl AsRef<Path>, labels: Option<&[Label]>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = vec!["id".to_string()];
        if labels.is_some() {
            header.push("label".into());
        }
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            if let Some(l) = labels {
                rec.push(l[i].as_str().to_string());
            }
            rec.extend(self.values.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<(FeatureMatrix, Option<Vec<Label>>)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers()?.clone();
        if header.get(0) != Some("id") {
            return Err(Error::MissingColumn("id".into()));
        }
        let has_label = header.get(1) == Some("label");
        let first = if has_label { 2 } else { 1 };
        let columns: Vec<String> = header.iter().skip(first).map(String::from).collect();
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            if has_label {
                labels.push(rec[1].parse()?);
            }
            for v in rec.iter().skip(first) {
                data.push(v.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("bad number {v:?}"),
                })?);
            }
        }
        let values = DenseMatrix::from_vec(ids.len(), columns.len(), data)?;
        Ok((
            FeatureMatrix {
                ids,
                columns,
                values,
            },
            has_label.then_some(labels),
        ))
    }
}

/// Horizontal concatenation; all parts must list the same ids in the same order.
pub fn concat_features(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = parts
        .first()
        .ok_or_else(|| Error::invalid("concat_features needs at least one part"))?;
    for p in &parts[1..] {
        if p.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                actual: p.len(),
            });
        }
        if let Some(i) = (0..p.len()).find(|&i| p.ids[i] != first.ids[i]) {
            return Err(Error::invalid(format!(
                "row {i}: document order mismatch ({:?} vs {:?})",
                first.ids[i], p.ids[i]
            )));
        }
    }
    let columns: Vec<String> = parts
        .iter()
        .flat_map(|p| p.columns.iter().cloned())
        .collect();
    let mut seen = HashSet::new();
    if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
        return Err(Error::invalid(format!("duplicate column label {dup:?}")));
    }
    let mats: Vec<&DenseMatrix> = parts.iter().map(|p| &p.values).collect();
    Ok(FeatureMatrix {
        ids: first.ids.clone(),
        columns,
        values: DenseMatrix::hconcat(&mats)?,
    })
}

/// Read a file as lines, used by the small TSV loaders in this crate.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))
}

pub fn write_vocabulary(path: impl AsRef<Path>, vocab: &NgramVocabulary) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(vocab.to_tsv().as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_vocabulary(path: impl AsRef<Path>) -> Result<NgramVocabulary> {
    let lines = read_lines(path.as_ref())?;
    NgramVocabulary::from_tsv(&lines.join("\n"))
}
