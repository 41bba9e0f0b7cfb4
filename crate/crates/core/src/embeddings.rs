//! Distributed representations.
//!
//! - skip-gram word vectors with negative sampling ([`train_word2vec`]),
//! - PV-DM paragraph vectors with frozen-word inference ([`train_doc2vec`],
//!   [`DocEmbeddingModel::infer`]),
//! - loaders for GloVe-style word-vector text files and externally produced
//!   sentence-embedding files.
//!
//! Trainers are single-threaded and bit-deterministic for a given seed. Word
//! input vectors and paragraph vectors start uniform in `[-0.5/dim, 0.5/dim)`,
//! output (context) vectors start at zero, and the learning rate decays
//! linearly from `lr_start` to `lr_end` over all training positions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::read_lines;
use crate::rng::{self, StreamRng};
use crate::textprep::TokenSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingSource {
    Trained,
    GloveFile,
    Other,
}

/// Token → dense vector of a fixed width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    pub source: EmbeddingSource,
}

impl EmbeddingTable {
    pub fn new(dim: usize, source: EmbeddingSource) -> Self {
        EmbeddingTable {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            source,
        }
    }

    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.index.contains_key(token) {
            return Err(Error::DuplicateId(token.to_string()));
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load a word-vector text file: optional `V D` header, then `token v1 … vD`.
pub fn load_glove(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut table: Option<EmbeddingTable> = None;
    let mut declared_rows = None;
    for (i, line) in lines.iter().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            declared_rows = Some(fields[0].parse::<usize>().unwrap());
            let d: usize = fields[1].parse().unwrap();
            table = Some(EmbeddingTable::new(d, EmbeddingSource::GloveFile));
            continue;
        }
        if fields.len() < 2 {
            return Err(parse_err(
                path,
                lineno,
                "expected a token followed by floats",
            ));
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| parse_err(path, lineno, format!("bad float: {e}")))?;
        let t = table
            .get_or_insert_with(|| EmbeddingTable::new(values.len(), EmbeddingSource::GloveFile));
        if values.len() != t.dim {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {} values, found {}", t.dim, values.len()),
            ));
        }
        t.insert(fields[0], &values)
            .map_err(|e| parse_err(path, lineno, e.to_string()))?;
    }
    let table = table.ok_or_else(|| parse_err(path, 1, "no vectors in file"))?;
    if let Some(n) = declared_rows {
        if n != table.len() {
            return Err(parse_err(
                path,
                1,
                format!("header declares {n} rows, found {}", table.len()),
            ));
        }
    }
    if let Some(d) = expected_dim {
        if d != table.dim {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: table.dim,
            });
        }
    }
    Ok(table)
}

/// Shortest decimal that reproduces `v` rounded to 6 significant digits.
fn fmt6(v: f64) -> String {
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn write_glove(path: impl AsRef<Path>, table: &EmbeddingTable, header: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    if header {
        let _ = writeln!(out, "{} {}", table.len(), table.dim);
    }
    for tok in &table.tokens {
        out.push_str(tok);
        for v in table.get(tok).unwrap() {
            out.push(' ');
            out.push_str(&fmt6(*v));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Seeded stand-in for a pretrained word-vector file: each token's vector is
/// drawn from its own stream keyed by the token text, so the table does not
/// depend on token order.
pub fn fake_pretrained_table(tokens: &[String], dim: usize, seed: u64) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(dim, EmbeddingSource::Other);
    let mut v = vec![0.0; dim];
    for tok in tokens {
        if t.get(tok).is_some() {
            continue;
        }
        let mut r = rng::substream(seed, rng::hash_str(tok));
        rng::fill_uniform(&mut r, &mut v, 1.0);
        t.insert(tok, &v).unwrap();
    }
    t
}

/// Cosine similarity; 0.0 when either vector has zero norm.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)` computed without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Word list with counts, sorted by count (desc) then token.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    pub words: Vec<String>,
    pub counts: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build(corpus: &[TokenSequence], min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in corpus {
            for t in &doc.tokens {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut pairs: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words: Vec<String> = pairs.iter().map(|p| p.0.to_string()).collect();
        let index = words
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, w)| (w, i))
            .collect();
        Vocab {
            counts: pairs.iter().map(|p| p.1).collect(),
            words,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, w: &str) -> Option<usize> {
        self.index.get(w).copied()
    }

    fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id(t)).collect()
    }
}

/// Sampler over `count^0.75`.
#[derive(Debug, Clone)]
struct NoiseSampler {
    cumulative: Vec<f64>,
}

impl NoiseSampler {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseSampler { cumulative }
    }

    fn sample(&self, rng: &mut StreamRng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }

    /// `k` noise ids, skipping draws equal to `positive`.
    fn negatives(&self, rng: &mut StreamRng, k: usize, positive: usize, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..k {
            let n = self.sample(rng);
            if n != positive {
                out.push(n);
            }
        }
    }
}

/// Negative-sampling loss for a single prediction with input representation
/// `hidden`, positive output vector `positive` and noise output vectors
/// `negatives`:
///
/// `L = -ln σ(positive·hidden) - Σ ln σ(-negative·hidden)`
///
/// Gradients are written (overwritten) into the provided buffers; `grad_negatives`
/// is laid out row-major with one row per negative.
pub fn negative_sampling_loss(
    hidden: &[f64],
    positive: &[f64],
    negatives: &[&[f64]],
    grad_hidden: &mut [f64],
    grad_positive: &mut [f64],
    grad_negatives: &mut [f64],
) -> f64 {
    let dim = hidden.len();
    grad_hidden.fill(0.0);
    let s = dot(positive, hidden);
    let mut loss = neg_log_sigmoid(s);
    let g = sigmoid(s) - 1.0;
    axpy(g, positive, grad_hidden);
    for (o, h) in grad_positive.iter_mut().zip(hidden) {
        *o = g * h;
    }
    for (k, neg) in negatives.iter().enumerate() {
        let s = dot(neg, hidden);
        loss += neg_log_sigmoid(-s);
        let g = sigmoid(s);
        axpy(g, neg, grad_hidden);
        for (o, h) in grad_negatives[k * dim..(k + 1) * dim]
            .iter_mut()
            .zip(hidden)
        {
            *o = g * h;
        }
    }
    loss
}

/// Hyperparameters shared by the skip-gram and PV-DM trainers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl EmbeddingConfig {
    pub fn word2vec() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 20,
            lr_start: 0.025,
            lr_end: 1e-4,
            min_count: 2,
            seed: 1,
        }
    }

    /// The paragraph vector only receives `1/(1 + context)` of the hidden
    /// gradient under the mean and only sees its own document's positions, so
    /// it gets a higher learning rate and more epochs.
    pub fn doc2vec() -> Self {
        EmbeddingConfig {
            dim: 500,
            epochs: 40,
            lr_start: 0.1,
            ..Self::word2vec()
        }
    }

    fn lr_at(&self, done: usize, total: usize) -> f64 {
        if total == 0 {
            return self.lr_start;
        }
        let p = done as f64 / total as f64;
        (self.lr_start - (self.lr_start - self.lr_end) * p).max(self.lr_end)
    }
}

const STREAM_WORD_INIT: u64 = 0;
const STREAM_DOC_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;

fn init_matrix(rows: usize, dim: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut v = vec![0.0; rows * dim];
    let mut r = rng::substream(seed, stream);
    rng::fill_uniform(&mut r, &mut v, 0.5 / dim as f64);
    v
}

/// The seeded initialization of the input word vectors of a skip-gram model.
pub fn initial_word_vectors(vocab_len: usize, cfg: &EmbeddingConfig) -> Vec<f64> {
    init_matrix(vocab_len, cfg.dim, cfg.seed, STREAM_WORD_INIT)
}

/// Skip-gram with negative sampling. Returns the input (center-word) vectors.
pub fn train_word2vec(corpus: &[TokenSequence], cfg: &EmbeddingConfig) -> Result<EmbeddingTable> {
    if corpus.is_empty() {
        return Err(Error::invalid(
            "cannot train word vectors on an empty corpus",
        ));
    }
    if cfg.dim == 0 {
        return Err(Error::invalid("embedding dim must be at least 1"));
    }
    let vocab = Vocab::build(corpus, cfg.min_count);
    if vocab.len() < 2 {
        return Err(Error::invalid(format!(
            "vocabulary has {} word(s) at min_count {}; need at least 2",
            vocab.len(),
            cfg.min_count
        )));
    }
    let dim = cfg.dim;
    let mut input = initial_word_vectors(vocab.len(), cfg);
    let mut output = vec![0.0; vocab.len() * dim];
    let sentences: Vec<Vec<usize>> = corpus.iter().map(|d| vocab.encode(&d.tokens)).collect();
    let per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let total = per_epoch * cfg.epochs;
    let noise = NoiseSampler::new(&vocab.counts);
    let mut rng = rng::substream(cfg.seed, STREAM_TRAIN);

    let mut negs = Vec::with_capacity(cfg.negatives);
    let mut hidden = vec![0.0; dim];
    let mut pos = vec![0.0; dim];
    let mut neg_rows = vec![0.0; cfg.negatives * dim];
    let mut g_hidden = vec![0.0; dim];
    let mut g_pos = vec![0.0; dim];
    let mut g_negs = vec![0.0; cfg.negatives * dim];
    let mut done = 0usize;
    for _ in 0..cfg.epochs {
        for sent in &sentences {
            for (t, &center) in sent.iter().enumerate() {
                let lr = cfg.lr_at(done, total);
                done += 1;
                let lo = t.saturating_sub(cfg.window);
                let hi = (t + cfg.window + 1).min(sent.len());
                for (c, &context) in sent.iter().enumerate().take(hi).skip(lo) {
                    if c == t {
                        continue;
                    }
                    noise.negatives(&mut rng, cfg.negatives, context, &mut negs);
                    hidden.copy_from_slice(&input[center * dim..(center + 1) * dim]);
                    pos.copy_from_slice(&output[context * dim..(context + 1) * dim]);
                    for (k, &n) in negs.iter().enumerate() {
                        neg_rows[k * dim..(k + 1) * dim]
                            .copy_from_slice(&output[n * dim..(n + 1) * dim]);
                    }
                    let neg_refs: Vec<&[f64]> = (0..negs.len())
                        .map(|k| &neg_rows[k * dim..(k + 1) * dim])
                        .collect();
                    negative_sampling_loss(
                        &hidden,
                        &pos,
                        &neg_refs,
                        &mut g_hidden,
                        &mut g_pos,
                        &mut g_negs,
                    );
                    axpy(-lr, &g_pos, &mut output[context * dim..(context + 1) * dim]);
                    for (k, &n) in negs.iter().enumerate() {
                        axpy(
                            -lr,
                            &g_negs[k * dim..(k + 1) * dim],
                            &mut output[n * dim..(n + 1) * dim],
                        );
                    }
                    axpy(-lr, &g_hidden, &mut input[center * dim..(center + 1) * dim]);
                }
            }
        }
    }
    let mut table = EmbeddingTable::new(dim, EmbeddingSource::Trained);
    for (i, w) in vocab.words.iter().enumerate() {
        table.insert(w, &input[i * dim..(i + 1) * dim])?;
    }
    Ok(table)
}

/// PV-DM loss for one position: the hidden representation is the mean of the
/// paragraph vector and the context word vectors. Returns the loss; the
/// gradient w.r.t. the paragraph vector and each context word vector is the
/// same (`grad_hidden / m`), written into `grad_doc`.
#[allow(clippy::too_many_arguments)]
pub fn pvdm_loss(
    doc: &[f64],
    context: &[&[f64]],
    target: &[f64],
    negatives: &[&[f64]],
    grad_doc: &mut [f64],
    grad_target: &mut [f64],
    grad_negatives: &mut [f64],
    hidden_buf: &mut [f64],
) -> f64 {
    let m = (1 + context.len()) as f64;
    hidden_buf.copy_from_slice(doc);
    for c in context {
        axpy(1.0, c, hidden_buf);
    }
    for h in hidden_buf.iter_mut() {
        *h /= m;
    }
    let loss = negative_sampling_loss(
        hidden_buf,
        target,
        negatives,
        grad_doc,
        grad_target,
        grad_negatives,
    );
    for g in grad_doc.iter_mut() {
        *g /= m;
    }
    loss
}

/// PV-DM paragraph-vector model.
#[derive(Debug, Clone)]
pub struct DocEmbeddingModel {
    pub config: EmbeddingConfig,
    pub vocab: Vocab,
    pub word_in: Vec<f64>,
    pub word_out: Vec<f64>,
    doc_ids: Vec<String>,
    doc_index: HashMap<String, usize>,
    doc_vectors: Vec<f64>,
    epochs_run: usize,
    noise: NoiseSampler,
}

/// Result of inferring a vector for an unseen document.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredVector {
    pub vector: Vec<f64>,
    /// No token of the document is in the model vocabulary; the vector is zero.
    pub empty: bool,
}

/// The seeded initialization of the paragraph vectors of a PV-DM model.
pub fn initial_doc_vectors(n_docs: usize, cfg: &EmbeddingConfig) -> Vec<f64> {
    init_matrix(n_docs, cfg.dim, cfg.seed, STREAM_DOC_INIT)
}

struct PvdmScratch {
    negs: Vec<usize>,
    ctx_ids: Vec<usize>,
    ctx_rows: Vec<f64>,
    target: Vec<f64>,
    neg_rows: Vec<f64>,
    g_doc: Vec<f64>,
    g_target: Vec<f64>,
    g_negs: Vec<f64>,
    hidden: Vec<f64>,
}

impl PvdmScratch {
    fn new(dim: usize, window: usize, k: usize) -> Self {
        PvdmScratch {
            negs: Vec::with_capacity(k),
            ctx_ids: Vec::with_capacity(2 * window),
            ctx_rows: vec![0.0; 2 * window * dim],
            target: vec![0.0; dim],
            neg_rows: vec![0.0; k * dim],
            g_doc: vec![0.0; dim],
            g_target: vec![0.0; dim],
            g_negs: vec![0.0; k * dim],
            hidden: vec![0.0; dim],
        }
    }
}

impl DocEmbeddingModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_vector(&self, id: &str) -> Option<&[f64]> {
        let d = self.config.dim;
        self.doc_index
            .get(id)
            .map(|&i| &self.doc_vectors[i * d..(i + 1) * d])
    }

    pub fn doc_vectors(&self) -> &[f64] {
        &self.doc_vectors
    }

    /// Gradients of the PV-DM loss at position `t` of `sent`, left in `s`.
    fn position_gradients(
        &self,
        doc: &[f64],
        sent: &[usize],
        t: usize,
        rng: &mut StreamRng,
        s: &mut PvdmScratch,
    ) {
        let dim = self.config.dim;
        let w = self.config.window;
        let target = sent[t];
        s.ctx_ids.clear();
        let lo = t.saturating_sub(w);
        let hi = (t + w + 1).min(sent.len());
        for (c, &id) in sent.iter().enumerate().take(hi).skip(lo) {
            if c != t {
                s.ctx_ids.push(id);
            }
        }
        for (k, &id) in s.ctx_ids.iter().enumerate() {
            s.ctx_rows[k * dim..(k + 1) * dim]
                .copy_from_slice(&self.word_in[id * dim..(id + 1) * dim]);
        }
        self.noise
            .negatives(rng, self.config.negatives, target, &mut s.negs);
        s.target
            .copy_from_slice(&self.word_out[target * dim..(target + 1) * dim]);
        for (k, &n) in s.negs.iter().enumerate() {
            s.neg_rows[k * dim..(k + 1) * dim]
                .copy_from_slice(&self.word_out[n * dim..(n + 1) * dim]);
        }
        let ctx: Vec<&[f64]> = (0..s.ctx_ids.len())
            .map(|k| &s.ctx_rows[k * dim..(k + 1) * dim])
            .collect();
        let negs: Vec<&[f64]> = (0..s.negs.len())
            .map(|k| &s.neg_rows[k * dim..(k + 1) * dim])
            .collect();
        pvdm_loss(
            doc,
            &ctx,
            &s.target,
            &negs,
            &mut s.g_doc,
            &mut s.g_target,
            &mut s.g_negs,
            &mut s.hidden,
        );
    }

    fn apply_word_updates(&mut self, target: usize, lr: f64, s: &PvdmScratch) {
        let dim = self.config.dim;
        axpy(
            -lr,
            &s.g_target,
            &mut self.word_out[target * dim..(target + 1) * dim],
        );
        for (k, &n) in s.negs.iter().enumerate() {
            axpy(
                -lr,
                &s.g_negs[k * dim..(k + 1) * dim],
                &mut self.word_out[n * dim..(n + 1) * dim],
            );
        }
        for &id in &s.ctx_ids {
            axpy(-lr, &s.g_doc, &mut self.word_in[id * dim..(id + 1) * dim]);
        }
    }

    /// Optimize a fresh paragraph vector for `tokens` with the word matrices
    /// frozen. One step is one SGD pass over every in-vocabulary position; the
    /// learning rate decays linearly across the steps.
    pub fn infer(&self, tokens: &[String], steps: usize, seed: u64) -> Result<InferredVector> {
        if self.epochs_run == 0 {
            return Err(Error::invalid("doc2vec model has not been trained"));
        }
        let dim = self.config.dim;
        let sent = self.vocab.encode(tokens);
        if sent.is_empty() {
            return Ok(InferredVector {
                vector: vec![0.0; dim],
                empty: true,
            });
        }
        let mut doc = init_matrix(1, dim, seed, STREAM_DOC_INIT);
        let mut rng = rng::substream(seed, STREAM_TRAIN);
        let mut scratch = PvdmScratch::new(dim, self.config.window, self.config.negatives);
        let total = steps * sent.len();
        let mut done = 0;
        for _ in 0..steps {
            for t in 0..sent.len() {
                let lr = self.config.lr_at(done, total);
                done += 1;
                self.position_gradients(&doc, &sent, t, &mut rng, &mut scratch);
                axpy(-lr, &scratch.g_doc, &mut doc);
            }
        }
        Ok(InferredVector {
            vector: doc,
            empty: false,
        })
    }
}

/// PV-DM training over `corpus`; each sequence's `doc_id` names its paragraph vector.
pub fn train_doc2vec(corpus: &[TokenSequence], cfg: &EmbeddingConfig) -> Result<DocEmbeddingModel> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot train doc2vec on an empty corpus"));
    }
    if cfg.dim == 0 {
        return Err(Error::invalid("embedding dim must be at least 1"));
    }
    let vocab = Vocab::build(corpus, cfg.min_count);
    if vocab.is_empty() {
        return Err(Error::invalid(format!(
            "no token reaches min_count {}",
            cfg.min_count
        )));
    }
    let dim = cfg.dim;
    let mut doc_index = HashMap::new();
    for (i, d) in corpus.iter().enumerate() {
        if doc_index.insert(d.doc_id.clone(), i).is_some() {
            return Err(Error::DuplicateId(d.doc_id.clone()));
        }
    }
    let mut model = DocEmbeddingModel {
        config: *cfg,
        word_in: init_matrix(vocab.len(), dim, cfg.seed, STREAM_WORD_INIT),
        word_out: vec![0.0; vocab.len() * dim],
        noise: NoiseSampler::new(&vocab.counts),
        vocab,
        doc_ids: corpus.iter().map(|d| d.doc_id.clone()).collect(),
        doc_index,
        doc_vectors: initial_doc_vectors(corpus.len(), cfg),
        epochs_run: cfg.epochs,
    };
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| model.vocab.encode(&d.tokens))
        .collect();
    let total = sentences.iter().map(Vec::len).sum::<usize>() * cfg.epochs;
    let mut rng = rng::substream(cfg.seed, STREAM_TRAIN);
    let mut scratch = PvdmScratch::new(dim, cfg.window, cfg.negatives);
    let mut doc = vec![0.0; dim];
    let mut done = 0;
    for _ in 0..cfg.epochs {
        for (i, sent) in sentences.iter().enumerate() {
            doc.copy_from_slice(&model.doc_vectors[i * dim..(i + 1) * dim]);
            for t in 0..sent.len() {
                let lr = cfg.lr_at(done, total);
                done += 1;
                model.position_gradients(&doc, sent, t, &mut rng, &mut scratch);
                model.apply_word_updates(sent[t], lr, &scratch);
                axpy(-lr, &scratch.g_doc, &mut doc);
            }
            model.doc_vectors[i * dim..(i + 1) * dim].copy_from_slice(&doc);
        }
    }
    Ok(model)
}

/// Externally computed sentence embeddings keyed by document id.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbeddingSet {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl SentenceEmbeddingSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Result<&[f64]> {
        let i = *self
            .index
            .get(id)
            .ok_or_else(|| Error::MissingId(id.to_string()))?;
        Ok(&self.vectors[i * self.dim..(i + 1) * self.dim])
    }
}

/// File layout: first line `N D`, then `doc_id v1 … vD` per row.
pub fn load_sentence_embeddings(path: impl AsRef<Path>) -> Result<SentenceEmbeddingSet> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let hdr: Vec<&str> = header.split_whitespace().collect();
    let (n, dim) = match hdr.as_slice() {
        [n, d] => (
            n.parse::<usize>()
                .map_err(|_| parse_err(path, 1, "bad row count"))?,
            d.parse::<usize>()
                .map_err(|_| parse_err(path, 1, "bad dimension"))?,
        ),
        _ => return Err(parse_err(path, 1, "header must be `N D`")),
    };
    let mut set = SentenceEmbeddingSet {
        dim,
        ids: Vec::with_capacity(n),
        index: HashMap::with_capacity(n),
        vectors: Vec::with_capacity(n * dim),
    };
    for (i, line) in lines.iter().enumerate().skip(1) {
        let lineno = i + 1;
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let Some(id) = fields.next() else { continue };
        let start = set.vectors.len();
        for f in fields {
            let v = f
                .parse::<f64>()
                .map_err(|_| parse_err(path, lineno, format!("bad float {f:?}")))?;
            set.vectors.push(v);
        }
        let got = set.vectors.len() - start;
        if got != dim {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {dim} values, found {got}"),
            ));
        }
        if set.index.insert(id.to_string(), set.ids.len()).is_some() {
            return Err(Error::DuplicateId(id.to_string()));
        }
        set.ids.push(id.to_string());
    }
    if set.ids.len() != n {
        return Err(parse_err(
            path,
            1,
            format!("header declares {n} rows, found {}", set.ids.len()),
        ));
    }
    Ok(set)
}

pub fn write_sentence_embeddings(
    path: impl AsRef<Path>,
    ids: &[String],
    dim: usize,
    vectors: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    if vectors.len() != ids.len() * dim {
        return Err(Error::DimensionMismatch {
            expected: ids.len() * dim,
            actual: vectors.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", ids.len(), dim).map_err(io)?;
    for (i, id) in ids.iter().enumerate() {
        w.write_all(id.as_bytes()).map_err(io)?;
        for v in &vectors[i * dim..(i + 1) * dim] {
            write!(w, " {}", fmt6(*v)).map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Seeded pseudo-random unit vectors in the sentence-embedding file format,
/// for running sentence-embedding recipes without an external encoder.
pub fn write_fake_sentence_embeddings(
    path: impl AsRef<Path>,
    ids: &[String],
    dim: usize,
    seed: u64,
) -> Result<()> {
    let mut vectors = vec![0.0; ids.len() * dim];
    for (i, id) in ids.iter().enumerate() {
        let row = &mut vectors[i * dim..(i + 1) * dim];
        let mut r = rng::substream(seed, rng::hash_str(id));
        rng::fill_uniform(&mut r, row, 1.0);
        crate::features::l2_normalize(row);
    }
    write_sentence_embeddings(path, ids, dim, &vectors)
}
