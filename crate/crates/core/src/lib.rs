//! Text-classification benchmarking toolkit.
//!
//! The crate covers the full path from labeled CSV corpora to result tables:
//!
//! - [`corpus`]: CSV loading, label binarization, corpus merging, seeded splits.
//! - [`textprep`]: pattern stripping, tokenization, stopword removal, lemmatization.
//! - [`features`]: n-gram vocabularies, bag-of-words, TF-IDF, lexicon sentiment.
//! - [`embeddings`]: skip-gram word vectors, PV-DM document vectors, GloVe and
//!   sentence-embedding file ingestion.
//! - [`classifiers`]: logistic regression, CART, random forest, naive Bayes.
//! - [`neural`]: bidirectional GRU/LSTM sequence classifiers trained with BPTT.
//! - [`evalharness`]: metrics, experiment recipes, the table matrix runner and
//!   the train/test leakage audit.

pub mod classifiers;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod evalharness;
pub mod features;
pub mod matrix;
pub mod neural;
pub mod rng;
pub mod synthetic;
pub mod textprep;

pub use error::{Error, Result};
