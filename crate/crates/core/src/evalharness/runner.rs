use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{confusion, ConfusionCounts, MetricsReport};
use super::recipe::{ExperimentSpec, FeatureSource, ModelKind, Recipe, Settings, WordVectors};
use crate::classifiers::{Classifier, TrainedClassifier};
use crate::corpus::{split, DatasetSplit, Label, LabeledDocument};
use crate::embeddings::{
    fake_pretrained_table, load_glove, load_sentence_embeddings, train_doc2vec, train_word2vec,
    write_fake_sentence_embeddings, EmbeddingTable,
};
use crate::features::{
    bow_transform, compute_idf, concat_features, fit_vocabulary_ranked, sentiment_score,
    tfidf_transform, FeatureMatrix, Negators, SentimentLexicon,
};
use crate::matrix::DenseMatrix;
use crate::neural::{bptt_train, RnnConfig, RnnModel, TokenIndex};
use crate::rng;
use crate::synthetic;
use crate::textprep::{CleanOptions, Cleaner, TokenSequence};
use crate::{Error, Result};

/// Counts test-document reads, separately for reads made while a fit phase is open.
#[derive(Debug, Default)]
pub struct HygieneMonitor {
    fit_depth: AtomicUsize,
    fit_accesses: AtomicUsize,
    accesses: AtomicUsize,
}

/// Marks a fit phase for as long as it lives.
pub struct FitScope<'a>(&'a HygieneMonitor);

impl Drop for FitScope<'_> {
    fn drop(&mut self) {
        self.0.fit_depth.fetch_sub(1, Ordering::SeqCst);
    }
}

impl HygieneMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fit_scope(&self) -> FitScope<'_> {
        self.fit_depth.fetch_add(1, Ordering::SeqCst);
        FitScope(self)
    }

    pub fn record(&self, n: usize) {
        self.accesses.fetch_add(n, Ordering::SeqCst);
        if self.fit_depth.load(Ordering::SeqCst) > 0 {
            self.fit_accesses.fetch_add(n, Ordering::SeqCst);
        }
    }

    /// Test documents read while a fit phase was open.
    pub fn fit_accesses(&self) -> usize {
        self.fit_accesses.load(Ordering::SeqCst)
    }

    pub fn accesses(&self) -> usize {
        self.accesses.load(Ordering::SeqCst)
    }
}

/// A document after cleaning, with both token views.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDoc {
    pub id: String,
    pub label: Label,
    /// Full cleaning pipeline.
    pub tokens: Vec<String>,
    /// Pattern stripping and tokenization only.
    pub light: Vec<String>,
}

/// Read-only view of the test side; every read is reported to the monitor.
pub struct TestPartition<'a> {
    docs: &'a [PreparedDoc],
    monitor: &'a HygieneMonitor,
}

impl<'a> TestPartition<'a> {
    pub fn docs(&self) -> &'a [PreparedDoc] {
        self.monitor.record(self.docs.len());
        self.docs
    }

    pub fn labels(&self) -> Vec<Label> {
        self.docs().iter().map(|d| d.label).collect()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// A split with both sides cleaned once, shared by every cell that uses it.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    split: DatasetSplit,
    options: CleanOptions,
    train: Vec<PreparedDoc>,
    test: Vec<PreparedDoc>,
}

fn prepare(docs: &[LabeledDocument], cleaner: &Cleaner) -> Vec<PreparedDoc> {
    docs.par_iter()
        .map(|d| PreparedDoc {
            id: d.id.clone(),
            label: d.label,
            tokens: cleaner.clean_text(&d.text),
            light: cleaner.light_tokens(&d.text),
        })
        .collect()
}

impl ExperimentContext {
    pub fn new(
        docs: &[LabeledDocument],
        ratio: f64,
        seed: u64,
        options: CleanOptions,
    ) -> Result<Self> {
        Self::from_split(split(docs, ratio, seed)?, options)
    }

    pub fn from_split(split: DatasetSplit, options: CleanOptions) -> Result<Self> {
        if split.train.is_empty() || split.test.is_empty() {
            return Err(Error::invalid("both sides of the split must be non-empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for d in split.train.iter().chain(&split.test) {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        let cleaner = Cleaner::default().with_options(options);
        Ok(ExperimentContext {
            train: prepare(&split.train, &cleaner),
            test: prepare(&split.test, &cleaner),
            split,
            options,
        })
    }

    pub fn split(&self) -> &DatasetSplit {
        &self.split
    }

    pub fn options(&self) -> CleanOptions {
        self.options
    }

    pub fn train(&self) -> &[PreparedDoc] {
        &self.train
    }

    pub fn train_labels(&self) -> Vec<Label> {
        self.train.iter().map(|d| d.label).collect()
    }

    pub fn train_sequences(&self) -> Vec<TokenSequence> {
        self.train
            .iter()
            .map(|d| TokenSequence {
                doc_id: d.id.clone(),
                tokens: d.tokens.clone(),
            })
            .collect()
    }

    pub fn test<'a>(&'a self, monitor: &'a HygieneMonitor) -> TestPartition<'a> {
        TestPartition {
            docs: &self.test,
            monitor,
        }
    }
}

/// Train and test columns of one feature source.
#[derive(Debug, Clone)]
pub struct FeatureBlock {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    /// Test reads during the block's fit phase.
    pub fit_accesses: usize,
    /// Set for the transductive document model, whose fit reads test text by request.
    pub leak_permitted: bool,
}

fn doc_rows(
    docs: &[PreparedDoc],
    f: impl Fn(&PreparedDoc) -> Result<Vec<f64>> + Sync + Send,
) -> Result<Vec<Vec<f64>>> {
    docs.par_iter().map(f).collect()
}

fn block_from_rows(
    ctx: &ExperimentContext,
    test_docs: &[PreparedDoc],
    columns: Vec<String>,
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let ids = |d: &[PreparedDoc]| d.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
    let fm = |ids: Vec<String>, rows: Vec<Vec<f64>>| -> Result<FeatureMatrix> {
        let n = rows.len();
        FeatureMatrix::new(
            ids,
            columns.clone(),
            DenseMatrix::from_vec(n, columns.len(), rows.concat())?,
        )
    };
    Ok((fm(ids(&ctx.train), train)?, fm(ids(test_docs), test)?))
}

fn numbered(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|k| format!("{prefix}:{k}")).collect()
}

/// Fit one feature source on the train side and transform both sides.
pub fn build_block(
    ctx: &ExperimentContext,
    source: &FeatureSource,
    settings: &Settings,
    seed: u64,
    work_dir: Option<&std::path::Path>,
) -> Result<FeatureBlock> {
    let monitor = HygieneMonitor::new();
    let test = ctx.test(&monitor);
    let mut leak_permitted = false;
    let (train_m, test_m) = match source {
        FeatureSource::Bow {
            n_min,
            n_max,
            max_features,
        }
        | FeatureSource::Tfidf {
            n_min,
            n_max,
            max_features,
        } => {
            let is_bow = matches!(source, FeatureSource::Bow { .. });
            let (vocab, idf) = {
                let _fit = monitor.fit_scope();
                let vocab = fit_vocabulary_ranked(
                    &ctx.train_sequences(),
                    *n_min,
                    *n_max,
                    *max_features,
                    settings.rank_by,
                )?;
                let idf = compute_idf(&vocab);
                (vocab, idf)
            };
            let row = |d: &PreparedDoc| {
                Ok(if is_bow {
                    bow_transform(&d.tokens, &vocab)
                } else {
                    tfidf_transform(&d.tokens, &vocab, &idf)
                })
            };
            let prefix = if is_bow { "bow" } else { "tfidf" };
            let columns = vocab
                .entries()
                .iter()
                .map(|g| format!("{prefix}:{g}"))
                .collect();
            let test_docs = test.docs();
            block_from_rows(
                ctx,
                test_docs,
                columns,
                doc_rows(&ctx.train, row)?,
                doc_rows(test_docs, row)?,
            )?
        }
        FeatureSource::Sentiment => {
            let lex = SentimentLexicon::english();
            let neg = Negators::default();
            let on_clean = settings.sentiment_on_clean;
            let row = |d: &PreparedDoc| {
                Ok(vec![sentiment_score(
                    if on_clean { &d.tokens } else { &d.light },
                    lex,
                    &neg,
                )])
            };
            let test_docs = test.docs();
            block_from_rows(
                ctx,
                test_docs,
                vec!["sentiment".into()],
                doc_rows(&ctx.train, row)?,
                doc_rows(test_docs, row)?,
            )?
        }
        FeatureSource::Doc2vec { dim } => {
            let cfg = crate::embeddings::EmbeddingConfig {
                dim: *dim,
                seed,
                ..settings.doc2vec
            };
            let transductive = settings.doc2vec_transductive;
            leak_permitted = transductive;
            let model = {
                let _fit = monitor.fit_scope();
                let mut corpus = ctx.train_sequences();
                if transductive {
                    corpus.extend(test.docs().iter().map(|d| TokenSequence {
                        doc_id: d.id.clone(),
                        tokens: d.tokens.clone(),
                    }));
                }
                train_doc2vec(&corpus, &cfg)?
            };
            let stored = |d: &PreparedDoc| {
                model
                    .doc_vector(&d.id)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::MissingId(d.id.clone()))
            };
            let test_docs = test.docs();
            let test_rows = if transductive {
                doc_rows(test_docs, stored)?
            } else {
                let steps = settings.doc2vec_infer_steps;
                doc_rows(test_docs, |d| {
                    Ok(model
                        .infer(&d.tokens, steps, seed ^ rng::hash_str(&d.id))?
                        .vector)
                })?
            };
            block_from_rows(
                ctx,
                test_docs,
                numbered("d2v", *dim),
                doc_rows(&ctx.train, stored)?,
                test_rows,
            )?
        }
        FeatureSource::Sent2vec { file, dim } => {
            let test_docs = test.docs();
            let set = match file {
                Some(p) => load_sentence_embeddings(p)?,
                None => {
                    let ids: Vec<String> = ctx
                        .train
                        .iter()
                        .chain(test_docs)
                        .map(|d| d.id.clone())
                        .collect();
                    let name = format!(
                        "sentence-embeddings-{seed}-{dim}-{:016x}.txt",
                        rng::hash_str(&ids.concat())
                    );
                    let (dir, name) = match work_dir {
                        Some(d) => (d.to_path_buf(), name),
                        None => {
                            static NEXT: AtomicUsize = AtomicUsize::new(0);
                            let n = NEXT.fetch_add(1, Ordering::SeqCst);
                            (
                                std::env::temp_dir(),
                                format!("{}-{n}-{name}", std::process::id()),
                            )
                        }
                    };
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    let path = dir.join(name);
                    write_fake_sentence_embeddings(&path, &ids, *dim, seed)?;
                    let loaded = load_sentence_embeddings(&path);
                    if work_dir.is_none() {
                        let _ = std::fs::remove_file(&path);
                    }
                    loaded?
                }
            };
            if set.dim() != *dim {
                return Err(Error::DimensionMismatch {
                    expected: *dim,
                    actual: set.dim(),
                });
            }
            let row = |d: &PreparedDoc| Ok(set.get(&d.id)?.to_vec());
            block_from_rows(
                ctx,
                test_docs,
                numbered("s2v", *dim),
                doc_rows(&ctx.train, row)?,
                doc_rows(test_docs, row)?,
            )?
        }
    };
    Ok(FeatureBlock {
        train: train_m,
        test: test_m,
        fit_accesses: monitor.fit_accesses(),
        leak_permitted,
    })
}

/// Word vectors for a recurrent cell.
#[derive(Debug, Clone)]
pub struct WordTable {
    pub table: EmbeddingTable,
    pub fit_accesses: usize,
}

pub fn build_word_table(
    ctx: &ExperimentContext,
    vectors: &WordVectors,
    settings: &Settings,
    seed: u64,
) -> Result<WordTable> {
    let monitor = HygieneMonitor::new();
    let table = match vectors {
        WordVectors::Glove { file: Some(p), dim } => load_glove(p, Some(*dim))?,
        WordVectors::Glove { file: None, dim } => {
            let cleaner = Cleaner::default().with_options(ctx.options);
            let words: Vec<String> = synthetic::lexicon_words()
                .iter()
                .flat_map(|w| cleaner.clean_text(w))
                .collect();
            fake_pretrained_table(&words, *dim, seed)
        }
        WordVectors::Word2vec { dim } => {
            let _fit = monitor.fit_scope();
            let cfg = crate::embeddings::EmbeddingConfig {
                dim: *dim,
                seed,
                ..settings.word2vec
            };
            train_word2vec(&ctx.train_sequences(), &cfg)?
        }
    };
    Ok(WordTable {
        table,
        fit_accesses: monitor.fit_accesses(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockWidth {
    pub source: String,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HygieneCounts {
    /// Test-document reads while any fit phase was open.
    pub fit_phase_test_accesses: usize,
    /// Whether the spec asked for a transductive fit that reads test text.
    pub leak_permitted: bool,
}

/// Outcome of one successful cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub metrics: MetricsReport,
    pub confusion: ConfusionCounts,
    pub widths: Vec<BlockWidth>,
    /// Total feature columns; `None` for recurrent cells.
    pub width: Option<usize>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub hygiene: HygieneCounts,
}

/// A fitted model from [`fit_and_evaluate`].
#[derive(Debug, Clone)]
pub enum FittedModel {
    Classical(TrainedClassifier),
    Recurrent(Box<RnnModel>),
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub spec: ExperimentSpec,
    pub result: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone, Default)]
pub struct MatrixOptions {
    /// Worker threads; 0 uses one per core.
    pub jobs: usize,
    /// Where generated sentence-embedding files are kept; a temp file otherwise.
    pub work_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ArtifactKey {
    Block(usize, FeatureSource, String),
    Words(usize, WordVectors, String),
}

enum Artifact {
    Block(FeatureBlock),
    Words(WordTable),
}

type Built = std::result::Result<Arc<Artifact>, String>;

fn artifact_params(s: &Settings, seed: u64) -> String {
    serde_json::json!({
        "seed": seed,
        "rank_by": s.rank_by,
        "sentiment_on_clean": s.sentiment_on_clean,
        "doc2vec": s.doc2vec,
        "doc2vec_infer_steps": s.doc2vec_infer_steps,
        "doc2vec_transductive": s.doc2vec_transductive,
        "word2vec": s.word2vec,
    })
    .to_string()
}

fn artifact_keys(ctx: usize, spec: &ExperimentSpec) -> Vec<ArtifactKey> {
    let params = artifact_params(&spec.settings, spec.seed);
    match &spec.recipe {
        Recipe::Features(srcs) => srcs
            .iter()
            .map(|s| ArtifactKey::Block(ctx, s.clone(), params.clone()))
            .collect(),
        Recipe::Sequence(v) => vec![ArtifactKey::Words(ctx, v.clone(), params)],
    }
}

fn build_artifact(
    contexts: &[ExperimentContext],
    key: &ArtifactKey,
    spec: &ExperimentSpec,
    opts: &MatrixOptions,
) -> Built {
    match key {
        ArtifactKey::Block(c, src, _) => build_block(
            &contexts[*c],
            src,
            &spec.settings,
            spec.seed,
            opts.work_dir.as_deref(),
        )
        .map(|b| Arc::new(Artifact::Block(b))),
        ArtifactKey::Words(c, v, _) => {
            build_word_table(&contexts[*c], v, &spec.settings, spec.seed)
                .map(|w| Arc::new(Artifact::Words(w)))
        }
    }
    .map_err(|e| e.to_string())
}

fn check_hygiene(h: HygieneCounts) -> Result<()> {
    if h.fit_phase_test_accesses > 0 && !h.leak_permitted {
        return Err(Error::invalid(format!(
            "hygiene violation: {} test-document reads during fit",
            h.fit_phase_test_accesses
        )));
    }
    Ok(())
}

fn score(
    spec: &ExperimentSpec,
    pred: &[Label],
    truth: &[Label],
) -> Result<(ConfusionCounts, MetricsReport)> {
    let c = confusion(pred, truth)?;
    Ok((c, spec.settings.average.score(&c)?))
}

fn run_cell(
    ctx: &ExperimentContext,
    spec: &ExperimentSpec,
    artifacts: &[Arc<Artifact>],
) -> Result<(CellResult, FittedModel)> {
    let monitor = HygieneMonitor::new();
    let test = ctx.test(&monitor);
    match spec.model {
        ModelKind::Classical(kind) => {
            let blocks: Vec<&FeatureBlock> = artifacts
                .iter()
                .map(|a| match a.as_ref() {
                    Artifact::Block(b) => b,
                    Artifact::Words(_) => unreachable!("feature recipes only reference blocks"),
                })
                .collect();
            let Recipe::Features(srcs) = &spec.recipe else {
                unreachable!()
            };
            let train = concat_features(&blocks.iter().map(|b| &b.train).collect::<Vec<_>>())?;
            let test_x = concat_features(&blocks.iter().map(|b| &b.test).collect::<Vec<_>>())?;
            let model = {
                let _fit = monitor.fit_scope();
                spec.settings
                    .classifier_spec(kind, spec.seed)
                    .fit(&train.values, &ctx.train_labels())?
            };
            let pred = model.predict(&test_x.values)?;
            let hygiene = HygieneCounts {
                fit_phase_test_accesses: monitor.fit_accesses()
                    + blocks.iter().map(|b| b.fit_accesses).sum::<usize>(),
                leak_permitted: blocks.iter().any(|b| b.leak_permitted),
            };
            check_hygiene(hygiene)?;
            let (confusion, metrics) = score(spec, &pred, &test.labels())?;
            let result = CellResult {
                metrics,
                confusion,
                widths: srcs
                    .iter()
                    .zip(&blocks)
                    .map(|(s, b)| BlockWidth {
                        source: s.label().into(),
                        width: b.train.width(),
                    })
                    .collect(),
                width: Some(train.width()),
                train_rows: train.len(),
                test_rows: test_x.len(),
                hygiene,
            };
            Ok((result, FittedModel::Classical(model)))
        }
        ModelKind::Recurrent(kind) => {
            let Artifact::Words(words) = artifacts[0].as_ref() else {
                unreachable!("sequence recipes reference one word table")
            };
            let cfg = RnnConfig {
                kind,
                seed: spec.seed,
                embed_dim: words.table.dim(),
                ..spec.settings.rnn
            };
            let train_tokens: Vec<&[String]> =
                ctx.train.iter().map(|d| d.tokens.as_slice()).collect();
            let model = {
                let _fit = monitor.fit_scope();
                let index = TokenIndex::build(&ctx.train_sequences(), 1);
                let init = RnnModel::new(index, Some(&words.table), &cfg)?;
                let batch = init.encode(&train_tokens, &ctx.train_labels())?;
                bptt_train(&init, &batch)?.model
            };
            let test_docs = test.docs();
            let truth: Vec<Label> = test_docs.iter().map(|d| d.label).collect();
            let test_tokens: Vec<&[String]> =
                test_docs.iter().map(|d| d.tokens.as_slice()).collect();
            let pred = model.predict(&model.encode(&test_tokens, &truth)?)?;
            let hygiene = HygieneCounts {
                fit_phase_test_accesses: monitor.fit_accesses() + words.fit_accesses,
                leak_permitted: false,
            };
            check_hygiene(hygiene)?;
            let (confusion, metrics) = score(spec, &pred, &truth)?;
            let result = CellResult {
                metrics,
                confusion,
                widths: vec![BlockWidth {
                    source: spec.recipe.label(),
                    width: words.table.dim(),
                }],
                width: None,
                train_rows: ctx.train.len(),
                test_rows: test_docs.len(),
                hygiene,
            };
            Ok((result, FittedModel::Recurrent(Box::new(model))))
        }
    }
}

fn context_key(spec: &ExperimentSpec) -> (u64, u64, CleanOptions) {
    (
        spec.ratio.to_bits(),
        spec.seed,
        CleanOptions {
            keep_hashtag_text: spec.settings.keep_hashtag_text,
        },
    )
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Run cells over contexts; `assign[i]` names the context of cell `i`, or the
/// error that prevented building it.
fn run_cells(
    contexts: &[ExperimentContext],
    specs: &[ExperimentSpec],
    assign: &[std::result::Result<usize, String>],
    opts: &MatrixOptions,
) -> Vec<CellOutcome> {
    let mut keys: Vec<(ArtifactKey, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut cell_keys: Vec<Vec<ArtifactKey>> = Vec::with_capacity(specs.len());
    for (i, (spec, a)) in specs.iter().zip(assign).enumerate() {
        let ks = match a {
            Ok(c) if spec.validate().is_ok() => artifact_keys(*c, spec),
            _ => Vec::new(),
        };
        for k in &ks {
            if seen.insert(k.clone()) {
                keys.push((k.clone(), i));
            }
        }
        cell_keys.push(ks);
    }
    let built: HashMap<ArtifactKey, Built> = keys
        .par_iter()
        .map(|(k, i)| (k.clone(), build_artifact(contexts, k, &specs[*i], opts)))
        .collect();
    specs
        .par_iter()
        .zip(assign)
        .zip(&cell_keys)
        .map(|((spec, a), ks)| {
            let result = (|| {
                let c = a.clone()?;
                spec.validate().map_err(|e| e.to_string())?;
                let arts = ks
                    .iter()
                    .map(|k| built[k].clone())
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                run_cell(&contexts[c], spec, &arts)
                    .map(|r| r.0)
                    .map_err(|e| e.to_string())
            })();
            CellOutcome {
                spec: spec.clone(),
                result,
            }
        })
        .collect()
}

/// Run every spec over `docs`, splitting per spec ratio and seed. Per-cell
/// failures become error outcomes; results come back in spec order.
pub fn run_matrix(
    docs: &[LabeledDocument],
    specs: &[ExperimentSpec],
    opts: &MatrixOptions,
) -> Result<Vec<CellOutcome>> {
    if specs.is_empty() {
        return Err(Error::invalid("the matrix has no cells"));
    }
    pool(opts.jobs)?.install(|| {
        let mut keys = Vec::new();
        for s in specs {
            let k = context_key(s);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let built: Vec<std::result::Result<ExperimentContext, String>> = keys
            .par_iter()
            .map(|&(ratio, seed, o)| {
                ExperimentContext::new(docs, f64::from_bits(ratio), seed, o)
                    .map_err(|e| e.to_string())
            })
            .collect();
        let mut contexts = Vec::new();
        let mut slot = Vec::new();
        for b in built {
            slot.push(match b {
                Ok(c) => {
                    contexts.push(c);
                    Ok(contexts.len() - 1)
                }
                Err(e) => Err(e),
            });
        }
        let assign: Vec<_> = specs
            .iter()
            .map(|s| slot[keys.iter().position(|k| *k == context_key(s)).unwrap()].clone())
            .collect();
        Ok(run_cells(&contexts, specs, &assign, opts))
    })
}

/// Run every spec on a fixed split. Spec ratios are ignored; a spec whose
/// cleaning options differ from the context's is an error cell.
pub fn run_matrix_in(
    ctx: &ExperimentContext,
    specs: &[ExperimentSpec],
    opts: &MatrixOptions,
) -> Result<Vec<CellOutcome>> {
    if specs.is_empty() {
        return Err(Error::invalid("the matrix has no cells"));
    }
    let assign: Vec<_> = specs
        .iter()
        .map(|s| {
            if s.settings.keep_hashtag_text == ctx.options.keep_hashtag_text {
                Ok(0)
            } else {
                Err("cleaning options differ from the prepared split".to_string())
            }
        })
        .collect();
    pool(opts.jobs)?.install(|| Ok(run_cells(std::slice::from_ref(ctx), specs, &assign, opts)))
}

/// One experiment end to end: split, fit on train, score on test.
pub fn run_experiment(docs: &[LabeledDocument], spec: &ExperimentSpec) -> Result<CellResult> {
    spec.validate()?;
    let ctx = ExperimentContext::new(docs, spec.ratio, spec.seed, context_key(spec).2)?;
    Ok(fit_and_evaluate(&ctx, spec, &MatrixOptions::default())?.0)
}

/// Fit one spec on a prepared split and keep the fitted model.
pub fn fit_and_evaluate(
    ctx: &ExperimentContext,
    spec: &ExperimentSpec,
    opts: &MatrixOptions,
) -> Result<(CellResult, FittedModel)> {
    spec.validate()?;
    let arts = artifact_keys(0, spec)
        .iter()
        .map(|k| build_artifact(std::slice::from_ref(ctx), k, spec, opts).map_err(Error::invalid))
        .collect::<Result<Vec<_>>>()?;
    run_cell(ctx, spec, &arts)
}

/// Feature matrices of a classical recipe for both sides of a split.
pub fn featurize(
    ctx: &ExperimentContext,
    recipe: &Recipe,
    settings: &Settings,
    seed: u64,
    opts: &MatrixOptions,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let Recipe::Features(srcs) = recipe else {
        return Err(Error::invalid(format!(
            "{} is a word-vector recipe; it has no feature matrix",
            recipe.label()
        )));
    };
    let blocks = srcs
        .iter()
        .map(|s| build_block(ctx, s, settings, seed, opts.work_dir.as_deref()))
        .collect::<Result<Vec<_>>>()?;
    if let Some(b) = blocks
        .iter()
        .find(|b| b.fit_accesses > 0 && !b.leak_permitted)
    {
        return Err(Error::invalid(format!(
            "hygiene violation: {} test-document reads during fit",
            b.fit_accesses
        )));
    }
    Ok((
        concat_features(&blocks.iter().map(|b| &b.train).collect::<Vec<_>>())?,
        concat_features(&blocks.iter().map(|b| &b.test).collect::<Vec<_>>())?,
    ))
}
