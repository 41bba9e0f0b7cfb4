use std::collections::HashMap;

use hatebench::features::{
    bow_transform, compute_idf, concat_features, extract_ngrams, fit_vocabulary, sentiment_score,
    tfidf_transform, FeatureMatrix, Negators, SentimentLexicon,
};
use hatebench::textprep::TokenSequence;
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!(
        "{}/tests/fixtures/{name}",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap()
}

fn seqs(docs: &[&str]) -> Vec<TokenSequence> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| TokenSequence {
            doc_id: format!("d{i}"),
            tokens: d.split_whitespace().map(String::from).collect(),
        })
        .collect()
}

#[test]
fn bow_fixture_matches_hand_counts() {
    let text = fixture("bow_docs.txt");
    let docs: Vec<&str> = text.lines().collect();
    let corpus = seqs(&docs);
    let vocab = fit_vocabulary(&corpus, 1, 1, 100).unwrap();
    assert_eq!(vocab.len(), 9);
    let expected: [&[(&str, f64)]; 5] = [
        &[
            ("the", 2.0),
            ("cat", 1.0),
            ("sat", 1.0),
            ("on", 1.0),
            ("mat", 1.0),
        ],
        &[("the", 1.0), ("dog", 1.0), ("sat", 1.0)],
        &[("a", 2.0), ("cat", 1.0), ("and", 1.0), ("dog", 1.0)],
        &[("mat", 3.0)],
        &[("dog", 2.0), ("eat", 1.0)],
    ];
    for (doc, want) in corpus.iter().zip(expected) {
        let row = bow_transform(&doc.tokens, &vocab);
        let mut oracle = vec![0.0; vocab.len()];
        for (w, c) in want {
            oracle[vocab.index_of(w).unwrap()] = *c;
        }
        assert_eq!(row, oracle, "{}", doc.doc_id);
    }
    // Total frequency, then document frequency, then entry.
    assert_eq!(&vocab.entries()[..4], &["dog", "mat", "the", "cat"]);
}

#[test]
fn bow_fixture_matches_brute_force_with_bigrams() {
    let text = fixture("bow_docs.txt");
    let docs: Vec<&str> = text.lines().collect();
    let corpus = seqs(&docs);
    let vocab = fit_vocabulary(&corpus, 1, 2, 1000).unwrap();
    for doc in &corpus {
        let t = &doc.tokens;
        let mut counts: HashMap<String, f64> = HashMap::new();
        for w in t {
            *counts.entry(w.clone()).or_default() += 1.0;
        }
        for pair in t.windows(2) {
            *counts
                .entry(format!("{} {}", pair[0], pair[1]))
                .or_default() += 1.0;
        }
        let row = bow_transform(t, &vocab);
        for (j, entry) in vocab.entries().iter().enumerate() {
            assert_eq!(
                row[j],
                counts.get(entry).copied().unwrap_or(0.0),
                "{} / {entry}",
                doc.doc_id
            );
        }
        assert_eq!(row.iter().sum::<f64>(), counts.values().sum::<f64>());
    }
}

#[test]
fn max_features_keeps_most_frequent() {
    let corpus = seqs(&["a b c", "a b d", "a e"]);
    let vocab = fit_vocabulary(&corpus, 1, 1, 3).unwrap();
    assert_eq!(vocab.entries(), &["a", "b", "c"]);
    assert_eq!(vocab.doc_freq(), &[3, 2, 1]);
}

#[test]
fn idf_example() {
    let corpus = seqs(&["x y", "x", "z"]);
    let vocab = fit_vocabulary(&corpus, 1, 1, 10).unwrap();
    let idf = compute_idf(&vocab);
    let x = vocab.index_of("x").unwrap();
    assert!((idf.weights[x] - ((4.0f64 / 3.0).ln() + 1.0)).abs() < 1e-15);
    assert!((idf.weights[x] - 1.287682).abs() < 1e-6);
}

#[test]
fn tfidf_fixture_matches_oracle() {
    let docs = ["cat sat", "cat ran", "dog ran"];
    let corpus = seqs(&docs);
    let vocab = fit_vocabulary(&corpus, 1, 1, 1000).unwrap();
    let idf = compute_idf(&vocab);
    let n = docs.len() as f64;
    for doc in &corpus {
        let row = tfidf_transform(&doc.tokens, &vocab, &idf);
        let mut oracle = Vec::new();
        for entry in vocab.entries() {
            let count = doc.tokens.iter().filter(|t| *t == entry).count() as f64;
            let df = docs
                .iter()
                .filter(|d| d.split(' ').any(|t| t == entry))
                .count() as f64;
            oracle.push(count * (((1.0 + n) / (1.0 + df)).ln() + 1.0));
        }
        let norm = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (got, want) in row.iter().zip(&oracle) {
            assert!(
                (got - want / norm).abs() < 1e-12,
                "{}: {got} vs {}",
                doc.doc_id,
                want / norm
            );
        }
    }
}

#[test]
fn sentiment_fixture_matches_hand_scores() {
    let lexicon = SentimentLexicon::parse(&fixture("sentiment_lexicon.tsv")).unwrap();
    let negators = Negators::default();
    let text = fixture("sentiment_phrases.tsv");
    let mut n = 0;
    for line in text.lines().skip(1) {
        let (phrase, score) = line.split_once('\t').unwrap();
        let want: f64 = score.parse().unwrap();
        let toks: Vec<String> = phrase.split_whitespace().map(String::from).collect();
        let got = sentiment_score(&toks, &lexicon, &negators);
        assert!((got - want).abs() < 1e-12, "{phrase:?}: {got} vs {want}");
        n += 1;
    }
    assert_eq!(n, 30);
}

#[test]
fn single_negator_flip() {
    let lexicon = SentimentLexicon::from_pairs([("good", 1.0)]);
    let toks = vec!["not".to_string(), "good".to_string()];
    assert_eq!(
        sentiment_score(&toks, &lexicon, &Negators::from_words(["not"])),
        -1.0
    );
    assert_eq!(sentiment_score(&toks, &lexicon, &Negators::none()), 1.0);
}

fn block(prefix: &str, width: usize, rows: usize) -> FeatureMatrix {
    let ids = (0..rows).map(|i| format!("r{i}")).collect();
    let cols = (0..width).map(|k| format!("{prefix}{k}")).collect();
    let data: Vec<Vec<f64>> = (0..rows).map(|i| vec![i as f64; width]).collect();
    FeatureMatrix::from_rows(ids, cols, &data).unwrap()
}

#[test]
fn concatenated_widths() {
    let tfidf = block("tfidf:", 1000, 3);
    let d2v = block("d2v:", 500, 3);
    let bow = block("bow:", 1000, 3);
    let s2v = block("s2v:", 1024, 3);
    let sent = block("sentiment", 1, 3);
    assert_eq!(
        concat_features(&[&tfidf, &d2v, &sent]).unwrap().width(),
        1501
    );
    assert_eq!(concat_features(&[&bow, &sent]).unwrap().width(), 1001);
    assert_eq!(concat_features(&[&s2v, &sent]).unwrap().width(), 1025);
}

fn token_docs() -> impl Strategy<Value = Vec<Vec<String>>> {
    proptest::collection::vec(proptest::collection::vec("[a-e]", 0..8), 1..8)
}

proptest! {
    #[test]
    fn tfidf_rows_are_unit_or_zero(docs in token_docs(), n_max in 1usize..4, max in 1usize..20) {
        let corpus: Vec<TokenSequence> = docs
            .iter()
            .enumerate()
            .map(|(i, t)| TokenSequence { doc_id: i.to_string(), tokens: t.clone() })
            .collect();
        let vocab = fit_vocabulary(&corpus, 1, n_max, max).unwrap();
        prop_assert!(vocab.len() <= max);
        let idf = compute_idf(&vocab);
        for d in &corpus {
            let row = tfidf_transform(&d.tokens, &vocab, &idf);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| *v >= 0.0));
            let bow = bow_transform(&d.tokens, &vocab);
            let in_vocab = extract_ngrams(&d.tokens, 1, n_max).iter().filter(|g| vocab.index_of(g).is_some()).count();
            prop_assert_eq!(bow.iter().sum::<f64>(), in_vocab as f64);
        }
    }

    #[test]
    fn sentiment_is_bounded(words in proptest::collection::vec("(good|bad|not|great|awful|x)", 0..12)) {
        let lexicon = SentimentLexicon::parse(&fixture("sentiment_lexicon.tsv")).unwrap();
        let s = sentiment_score(&words, &lexicon, &Negators::default());
        prop_assert!((-1.0..=1.0).contains(&s));
    }
}
