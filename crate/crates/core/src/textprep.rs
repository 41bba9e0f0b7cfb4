//! Document cleaning: pattern stripping, tokenization, stopword removal and
//! lemmatization, applied in that order by [`Cleaner::clean`].
//!
//! All stages NFC-normalize first and are pure functions of their input.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{nfc, LabeledDocument};
use crate::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const BUNDLED_LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.tsv");

/// `@handle` (optionally preceded by opening punctuation).
pub const MENTION_PATTERN: &str = r"^[\p{Ps}\p{Pi}'\x22]*@";
/// `#tag`; the capture is the tag text.
pub const HASHTAG_PATTERN: &str = r"^[\p{Ps}\p{Pi}'\x22]*#(\w[\w'-]*)";
/// `http://…`, `https://…`, `www.…`.
pub const URL_PATTERN: &str = r"(?i)^[\p{Ps}\p{Pi}'\x22]*(?:https?://|www\.)";
/// A whitespace token that is only a digit run (separators `. , : /` allowed
/// between runs), once surrounding punctuation is ignored.
pub const NUMBER_PATTERN: &str = r"^\d+(?:[.,:/]\d+)*$";

static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(MENTION_PATTERN).unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(HASHTAG_PATTERN).unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(URL_PATTERN).unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(NUMBER_PATTERN).unwrap());

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CleanOptions {
    /// Keep the text of a hashtag (`#tag` → `tag`) instead of dropping it.
    pub keep_hashtag_text: bool,
}

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation() || "‘’‚‛“”„‟…–—«»‹›¡¿·•".contains(c)
}

pub fn strip_patterns(text: &str) -> String {
    strip_patterns_with(text, CleanOptions::default())
}

/// Remove mentions, hashtags, URLs and standalone numbers, collapsing
/// whitespace to single spaces.
pub fn strip_patterns_with(text: &str, opts: CleanOptions) -> String {
    let text = nfc(text);
    let mut kept: Vec<&str> = Vec::new();
    for tok in text.split_whitespace() {
        if MENTION.is_match(tok) || URL.is_match(tok) {
            continue;
        }
        if let Some(caps) = HASHTAG.captures(tok) {
            if opts.keep_hashtag_text {
                kept.push(caps.get(1).unwrap().as_str());
            }
            continue;
        }
        let core = tok.trim_matches(is_edge_punct);
        if NUMBER.is_match(core) {
            continue;
        }
        kept.push(tok);
    }
    kept.join(" ")
}

/// Lowercase, split on whitespace, trim edge punctuation, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    nfc(text)
        .split_whitespace()
        .map(|t| t.trim_matches(is_edge_punct).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// One word per line; `#` starts a comment line; blank lines ignored.
    pub fn parse(contents: &str) -> Result<Self> {
        let mut words = HashSet::new();
        for (i, line) in contents.lines().enumerate() {
            let w = line.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            if w.chars().any(char::is_uppercase) || w.chars().any(char::is_whitespace) {
                return Err(Error::Parse {
                    path: "stopwords".into(),
                    line: i + 1,
                    message: format!("stopword {w:?} must be a single lowercase word"),
                });
            }
            words.insert(w.to_string());
        }
        Ok(StopwordList { words })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&s)
    }

    /// The bundled English list (179 function words).
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stopword list is valid")
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StopwordList {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stopwords(tokens: &[String], stoplist: &StopwordList) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stoplist.contains(t))
        .cloned()
        .collect()
}

fn is_vowel_at(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => true,
        b'y' => i > 0 && !is_vowel_at(w, i - 1),
        _ => false,
    }
}

/// Number of vowel→consonant transitions in an ASCII stem.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let v = is_vowel_at(w, i);
        if prev_vowel && !v {
            m += 1;
        }
        prev_vowel = v;
    }
    m
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| is_vowel_at(w, i))
}

fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && !is_vowel_at(w, n - 3)
        && is_vowel_at(w, n - 2)
        && !is_vowel_at(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

/// Restore a plausible base form after `-ed`/`-ing` removal.
fn repair_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    let last = b[n - 1];
    let consonant_at = |i: usize| !is_vowel_at(b, i);
    if n >= 3 && stem.ends_with("at") && consonant_at(n - 3) {
        return format!("{stem}e");
    }
    if stem.ends_with("bl") || stem.ends_with("iz") || stem.ends_with("nc") || stem.ends_with("rc")
    {
        return format!("{stem}e");
    }
    if matches!(last, b'v' | b'u') {
        return format!("{stem}e");
    }
    if n >= 3 && matches!(last, b's' | b'z') && is_vowel_at(b, n - 2) && is_vowel_at(b, n - 3) {
        return format!("{stem}e");
    }
    if n >= 2 && last == b[n - 2] && !is_vowel_at(b, n - 1) && !matches!(last, b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    if measure(b) == 1 && ends_cvc(b) {
        return format!("{stem}e");
    }
    stem.to_string()
}

/// Exception table plus ordered suffix rules.
#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::parse_exceptions(BUNDLED_LEMMA_EXCEPTIONS).expect("bundled lemma table is valid")
    }
}

impl Lemmatizer {
    /// TSV `inflected<TAB>lemma`, `#` comment lines.
    pub fn parse_exceptions(contents: &str) -> Result<Self> {
        let mut exceptions = HashMap::new();
        for (i, line) in contents.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (inflected, lemma) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: "lemma exceptions".into(),
                line: i + 1,
                message: "expected inflected<TAB>lemma".into(),
            })?;
            exceptions.insert(inflected.trim().to_string(), lemma.trim().to_string());
        }
        Ok(Lemmatizer { exceptions })
    }

    pub fn load_exceptions(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_exceptions(&s)
    }

    pub fn lemmatize_word(&self, word: &str) -> String {
        if let Some(l) = self.exceptions.get(word) {
            return l.clone();
        }
        // Suffix rules are defined over ASCII letters only.
        if word.len() <= 3 || !word.bytes().all(|c| c.is_ascii_lowercase() || c == b'\'') {
            return word.to_string();
        }
        let out = self.apply_rules(word);
        if out.is_empty() {
            word.to_string()
        } else {
            out
        }
    }

    fn apply_rules(&self, w: &str) -> String {
        if let Some(stem) = w.strip_suffix("'s") {
            return stem.to_string();
        }
        if w.ends_with("sses") {
            return w[..w.len() - 2].to_string();
        }
        if let Some(stem) = w.strip_suffix("ies") {
            return if w.len() > 4 {
                format!("{stem}y")
            } else {
                w.to_string()
            };
        }
        for suffix in ["ches", "shes", "xes", "zzes"] {
            if w.ends_with(suffix) {
                return w[..w.len() - 2].to_string();
            }
        }
        if let Some(stem) = w.strip_suffix('s') {
            if ["ss", "us", "is", "'s"].iter().any(|s| w.ends_with(s)) {
                return w.to_string();
            }
            return stem.to_string();
        }
        if w.ends_with("eed") {
            return w.to_string();
        }
        if let Some(stem) = w.strip_suffix("ied") {
            return if stem.len() >= 2 {
                format!("{stem}y")
            } else {
                w.to_string()
            };
        }
        for suffix in ["ed", "ing"] {
            if let Some(stem) = w.strip_suffix(suffix) {
                if stem.len() >= 2 && has_vowel(stem.as_bytes()) {
                    return repair_stem(stem);
                }
                return w.to_string();
            }
        }
        w.to_string()
    }

    pub fn lemmatize(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.lemmatize_word(t)).collect()
    }
}

/// Lemmatize with the bundled exception table.
pub fn lemmatize(tokens: &[String]) -> Vec<String> {
    static DEFAULT: LazyLock<Lemmatizer> = LazyLock::new(Lemmatizer::default);
    DEFAULT.lemmatize(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanedDoc {
    pub sequence: TokenSequence,
    /// Set when cleaning removed every token.
    pub empty_after_clean: bool,
}

/// The full cleaning pipeline with its resources loaded once.
#[derive(Debug, Clone)]
pub struct Cleaner {
    pub stoplist: StopwordList,
    pub lemmatizer: Lemmatizer,
    pub options: CleanOptions,
}

impl Default for Cleaner {
    fn default() -> Self {
        Cleaner::new(StopwordList::english())
    }
}

impl Cleaner {
    pub fn new(stoplist: StopwordList) -> Self {
        Cleaner {
            stoplist,
            lemmatizer: Lemmatizer::default(),
            options: CleanOptions::default(),
        }
    }

    pub fn with_options(mut self, options: CleanOptions) -> Self {
        self.options = options;
        self
    }

    pub fn clean_text(&self, text: &str) -> Vec<String> {
        let stripped = strip_patterns_with(text, self.options);
        let tokens = tokenize(&stripped);
        let tokens = remove_stopwords(&tokens, &self.stoplist);
        self.lemmatizer.lemmatize(&tokens)
    }

    pub fn clean(&self, doc: &LabeledDocument) -> CleanedDoc {
        let tokens = self.clean_text(&doc.text);
        CleanedDoc {
            empty_after_clean: tokens.is_empty(),
            sequence: TokenSequence {
                doc_id: doc.id.clone(),
                tokens,
            },
        }
    }

    /// Pattern stripping and tokenization only; stopwords and inflections kept.
    pub fn light_tokens(&self, text: &str) -> Vec<String> {
        tokenize(&strip_patterns_with(text, self.options))
    }
}

pub fn clean_pipeline(doc: &LabeledDocument, stoplist: &StopwordList) -> CleanedDoc {
    Cleaner::new(stoplist.clone()).clean(doc)
}
