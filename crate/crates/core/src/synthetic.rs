//! Seeded generator for the bundled toy corpus.
//!
//! Documents look like short social-media posts (mentions, hashtags, links,
//! numbers, stopwords, inflected words). Each class draws one to three
//! keywords from its own vocabulary, occasionally one from the other class,
//! and a small share of documents carry no keyword at all, so the classes are
//! separable by keyword counts but not perfectly. Group names are invented.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{binarize_labels, read_csv, CsvSchema, Label, LabelMapping, LabeledDocument};
use crate::rng;
use crate::textprep::Cleaner;

pub const HATE_WORDS: &[&str] = &[
    "vermin",
    "filthy",
    "scum",
    "parasites",
    "worthless",
    "disgusting",
    "invaders",
    "hate",
    "despise",
    "deport",
    "banished",
    "rats",
    "plague",
    "inferior",
    "savages",
    "pathetic",
    "criminals",
    "trash",
    "leeches",
    "hating",
    "infested",
    "animals",
    "stinking",
    "degenerate",
];

pub const NONHATE_WORDS: &[&str] = &[
    "weekend",
    "coffee",
    "game",
    "music",
    "lovely",
    "friends",
    "sunset",
    "recipe",
    "concert",
    "garden",
    "movie",
    "birthday",
    "happy",
    "great",
    "thanks",
    "congrats",
    "playing",
    "cooking",
    "vacation",
    "puppy",
    "beautiful",
    "dancing",
    "laughing",
    "festival",
];

pub const GROUPS: &[&str] = &[
    "zorbans",
    "kelvanites",
    "moravi",
    "tessari",
    "quorlish",
    "vendari",
];

pub const FILLER: &[&str] = &[
    "today",
    "people",
    "really",
    "think",
    "going",
    "time",
    "just",
    "said",
    "watched",
    "city",
    "news",
    "street",
    "talking",
    "saw",
    "morning",
    "new",
    "posted",
    "week",
    "everyone",
    "again",
    "neighbors",
    "town",
    "school",
    "working",
    "bus",
    "night",
    "another",
    "whole",
    "honestly",
    "seriously",
    "look",
    "tonight",
    "guys",
    "thing",
    "years",
    "place",
    "road",
    "team",
    "called",
    "reading",
];

const STOP: &[&str] = &[
    "the", "and", "are", "is", "so", "they", "we", "of", "to", "all", "these", "those", "with",
    "my", "at", "in", "were", "this", "that", "not", "for", "our",
];

const TAGS: &[&str] = &[
    "mondays", "truth", "wakeup", "life", "news", "fun", "vibes", "speakout",
];

/// Every word the generator can emit, for building stand-in word-vector tables.
pub fn lexicon_words() -> Vec<&'static str> {
    let mut v: Vec<&str> = [HATE_WORDS, NONHATE_WORDS, GROUPS, FILLER, STOP]
        .concat()
        .into_iter()
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Debug, Clone, Copy)]
pub struct ToyCorpusConfig {
    pub n_docs: usize,
    pub hate_rate: f64,
    /// Probability of adding one keyword of the opposite class.
    pub cross_noise: f64,
    /// Share of documents with no class keyword.
    pub ambiguous_rate: f64,
    pub seed: u64,
}

impl Default for ToyCorpusConfig {
    fn default() -> Self {
        ToyCorpusConfig {
            n_docs: 2000,
            hate_rate: 0.4,
            cross_noise: 0.08,
            ambiguous_rate: 0.02,
            seed: 2024,
        }
    }
}

fn pick<'a>(r: &mut impl Rng, words: &[&'a str]) -> &'a str {
    words[r.gen_range(0..words.len())]
}

/// Documents with unique raw text and unique cleaned token sequences.
/// Ids are `t0000`, `t0001`, ...
pub fn toy_corpus(cfg: &ToyCorpusConfig) -> Vec<LabeledDocument> {
    let mut r = rng::seeded(cfg.seed);
    let cleaner = Cleaner::default();
    let mut seen_clean = HashSet::new();
    let mut docs = Vec::with_capacity(cfg.n_docs);
    while docs.len() < cfg.n_docs {
        let label = if r.gen_bool(cfg.hate_rate) {
            Label::Hate
        } else {
            Label::NonHate
        };
        let text = post(&mut r, label, cfg);
        let tokens = cleaner.clean_text(&text);
        if tokens.is_empty() || !seen_clean.insert(tokens) {
            continue;
        }
        docs.push(LabeledDocument::new(
            format!("t{:04}", docs.len()),
            text,
            label,
        ));
    }
    docs
}

fn post(r: &mut impl Rng, label: Label, cfg: &ToyCorpusConfig) -> String {
    let (own, other) = match label {
        Label::Hate => (HATE_WORDS, NONHATE_WORDS),
        Label::NonHate => (NONHATE_WORDS, HATE_WORDS),
    };
    let mut content: Vec<&str> = Vec::new();
    if !r.gen_bool(cfg.ambiguous_rate) {
        let k = match r.gen_range(0..10) {
            0 | 1 => 1,
            2..=6 => 2,
            _ => 3,
        };
        content.extend((0..k).map(|_| pick(r, own)));
        if r.gen_bool(cfg.cross_noise) {
            content.push(pick(r, other));
        }
    }
    if r.gen_bool(0.6) {
        content.push(pick(r, GROUPS));
    }
    let fillers = r.gen_range(2..=5);
    content.extend((0..fillers).map(|_| pick(r, FILLER)));
    content.shuffle(r);

    let mut words: Vec<String> = Vec::new();
    if r.gen_bool(0.5) {
        words.push(format!("@user{}", r.gen_range(1..500)));
    }
    for w in content {
        if r.gen_bool(0.35) {
            words.push(pick(r, STOP).to_string());
        }
        words.push(w.to_string());
    }
    if r.gen_bool(0.2) {
        let at = r.gen_range(0..=words.len());
        words.insert(at, r.gen_range(1..2030).to_string());
    }
    if let Some(first) = words.iter_mut().find(|w| !w.starts_with('@')) {
        if r.gen_bool(0.5) {
            let mut c = first.chars();
            if let Some(h) = c.next() {
                *first = h.to_uppercase().chain(c).collect();
            }
        }
    }
    let mut text = words.join(" ");
    text.push_str(["", ".", "!", "!!", "?", "..."][r.gen_range(0..6)]);
    if r.gen_bool(0.3) {
        text.push_str(&format!(" #{}", pick(r, TAGS)));
    }
    if r.gen_bool(0.2) {
        text.push_str(&format!(" https://t.co/{:x}", r.gen::<u32>()));
    }
    text
}

/// The default toy corpus as shipped in `data/toy_corpus.csv` (`id,text,label`).
pub const BUNDLED_TOY_CSV: &str = include_str!("../data/toy_corpus.csv");

/// Parse [`BUNDLED_TOY_CSV`].
pub fn bundled_toy_corpus() -> Vec<LabeledDocument> {
    let schema = CsvSchema::new("text", "label").with_id("id");
    let loaded = read_csv(BUNDLED_TOY_CSV.as_bytes(), &schema).expect("bundled corpus parses");
    binarize_labels(&loaded.records, &LabelMapping::canonical())
        .expect("bundled labels are canonical")
}

/// Keyword-count baseline: Hate iff the document has more hate keywords than
/// non-hate keywords (after cleaning).
pub fn keyword_baseline(tokens: &[String]) -> Label {
    let cleaner = Cleaner::default();
    let lemmas = |ws: &[&str]| -> HashSet<String> {
        ws.iter().flat_map(|w| cleaner.clean_text(w)).collect()
    };
    let hate = lemmas(HATE_WORDS);
    let nonhate = lemmas(NONHATE_WORDS);
    let score: i64 = tokens
        .iter()
        .map(|t| hate.contains(t) as i64 - nonhate.contains(t) as i64)
        .sum();
    if score > 0 {
        Label::Hate
    } else {
        Label::NonHate
    }
}
