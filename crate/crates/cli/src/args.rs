use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

const RECIPE_HELP: &str = "\
Recipes join feature terms with '+':
  bow(n=1..6, max=1000)     n-gram counts
  tfidf(n=1..6, max=1000)   smoothed TF-IDF, L2-normalized rows
  sentiment                 lexicon polarity in [-1, 1]
  doc2vec(dim=500)          paragraph vectors (test rows inferred)
  sent2vec(file=F, dim=1024) sentence-embedding file; seeded stand-ins without file
Recurrent models take exactly one word-vector term instead:
  glove(file=F, dim=50)     pretrained text vectors; seeded stand-ins without file
  word2vec(dim=100)         skip-gram vectors trained on the train split

Classifiers: lr, dt, rf, nb, majority, bilstm, bigru

Settings (--set KEY=VALUE or config file lines):
  lr.learning_rate lr.epochs lr.l2 lr.threshold
  dt.max_depth dt.min_samples_split dt.min_impurity_decrease
  rf.n_trees rf.max_features rf.bootstrap  nb.variant
  rnn.hidden rnn.max_len rnn.batch_size rnn.lr rnn.momentum rnn.epochs rnn.clip rnn.embed_dim
  doc2vec.epochs doc2vec.lr doc2vec.window doc2vec.negatives doc2vec.min_count doc2vec.infer_steps doc2vec.transductive
  word2vec.epochs word2vec.lr word2vec.window word2vec.negatives word2vec.min_count
  features.rank_by metrics.average sentiment.on_clean clean.keep_hashtag_text

Precedence: config file > flags > defaults. A config file holds `key = value`
lines; besides the settings above it accepts seed, ratio, jobs, recipe, clf,
preset, corpus, split_dir, text_col, label_col, id_col, label_map, dedupe.

Exit codes: 0 success, 1 some cells failed, 2 configuration or input error.";

#[derive(Parser, Debug)]
#[command(name = "hatebench", version, about = "Reproducible text-classification benchmark runs", after_help = RECIPE_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clean a corpus into `id,tokens` rows (tokens space-joined).
    Clean(CleanArgs),
    /// Write train and test feature matrices for a recipe.
    Featurize(FeaturizeArgs),
    /// Fit one model on the train split and save it.
    Train(TrainArgs),
    /// Run one experiment: split, fit, score, report.
    Run(RunArgs),
    /// Run every cell of a preset and write the result tables.
    Matrix(MatrixArgs),
    /// Count cross-split duplicates and class balance.
    Audit(AuditArgs),
    /// Re-export a saved model as a self-describing JSON document.
    ExportModel(ExportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Corpus CSV; give it twice to merge two corpora. Defaults to the bundled toy corpus.
    #[arg(long, value_name = "CSV")]
    pub corpus: Vec<PathBuf>,
    /// Use a persisted split (train.csv, test.csv) instead of splitting a corpus.
    #[arg(long, value_name = "DIR")]
    pub split_dir: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    pub text_col: String,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    /// Id column; row numbers are used when absent.
    #[arg(long)]
    pub id_col: Option<String>,
    /// Label mapping such as `0=hate,1=nonhate,2=nonhate`.
    /// Default accepts hate/nonhate and hate/offensive/neither (or 0/1/2).
    #[arg(long)]
    pub label_map: Option<String>,
    /// Keep NFC-identical duplicate texts.
    #[arg(long)]
    pub no_dedupe: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Share of documents in the train split.
    #[arg(long, default_value_t = 0.7)]
    pub ratio: f64,
    /// Override a setting, e.g. `--set rf.n_trees=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Config file of `key = value` lines; wins over flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct CleanArgs {
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    #[arg(long, default_value = "text")]
    pub text_col: String,
    #[arg(long)]
    pub id_col: Option<String>,
    /// Keep hashtag words (drop only the '#').
    #[arg(long)]
    pub keep_hashtag_text: bool,
}

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long)]
    pub recipe: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long)]
    pub recipe: Option<String>,
    #[arg(long)]
    pub clf: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long)]
    pub recipe: Option<String>,
    #[arg(long)]
    pub clf: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Bundled preset name (paper_matrix) or a preset file.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Replace this share of test documents with copies of train documents first.
    #[arg(long, value_name = "FRACTION")]
    pub plant: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// A classifier model (JSON) or a recurrent checkpoint.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}
