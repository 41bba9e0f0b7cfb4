mod args;
mod config;
mod output;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use hatebench::classifiers::{Classifier, TrainedClassifier};
use hatebench::corpus::{load_csv, write_split, CsvSchema};
use hatebench::evalharness::report::render_metrics;
use hatebench::evalharness::{
    featurize, fit_and_evaluate, leakage_audit, plant_duplicates, run_matrix, run_matrix_in,
    CellOutcome, ExperimentContext, ExperimentSpec, FittedModel, MatrixOptions, ModelKind, Preset,
    Recipe, ReportFormat, ResultTable,
};
use hatebench::neural::{RnnModel, CHECKPOINT_MAGIC};
use hatebench::textprep::{CleanOptions, Cleaner};

use args::{Cli, Command};
use config::RunConfig;
use output::{provenance, sha256_hex, InputRecord, OutDir};

/// Failure before any cell ran: bad flags, unreadable inputs.
const EXIT_CONFIG: u8 = 2;
const EXIT_CELLS: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Clean(a) => cmd_clean(a),
        Command::Featurize(a) => {
            let mut cfg = RunConfig::from_args(&a.corpus, &a.exp)?;
            cfg.recipe = a.recipe.clone();
            finish_config(&mut cfg, a.exp.config.as_deref())?;
            cmd_featurize(&cfg, &a.out)
        }
        Command::Train(a) => {
            let mut cfg = RunConfig::from_args(&a.corpus, &a.exp)?;
            cfg.recipe = a.recipe.clone();
            cfg.clf = a.clf.clone();
            finish_config(&mut cfg, a.exp.config.as_deref())?;
            cmd_train(&cfg, &a.out)
        }
        Command::Run(a) => {
            let mut cfg = RunConfig::from_args(&a.corpus, &a.exp)?;
            cfg.recipe = a.recipe.clone();
            cfg.clf = a.clf.clone();
            finish_config(&mut cfg, a.exp.config.as_deref())?;
            cmd_run(&cfg, &a.out)
        }
        Command::Matrix(a) => {
            let mut cfg = RunConfig::from_args(&a.corpus, &a.exp)?;
            cfg.preset = a.preset.clone();
            finish_config(&mut cfg, a.exp.config.as_deref())?;
            cmd_matrix(&cfg, &a.out)
        }
        Command::Audit(a) => {
            let mut cfg = RunConfig::from_args(&a.corpus, &a.exp)?;
            finish_config(&mut cfg, a.exp.config.as_deref())?;
            cmd_audit(&cfg, a.plant, &a.out)
        }
        Command::ExportModel(a) => cmd_export(&a.model, &a.out),
    }
}

fn finish_config(cfg: &mut RunConfig, file: Option<&Path>) -> Result<()> {
    if let Some(f) = file {
        cfg.apply_file(f)?;
    }
    if !(cfg.ratio > 0.0 && cfg.ratio < 1.0) {
        bail!("--ratio must be in (0, 1), got {}", cfg.ratio);
    }
    Ok(())
}

fn arguments(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn clean_options(cfg: &RunConfig) -> CleanOptions {
    CleanOptions {
        keep_hashtag_text: cfg.settings.keep_hashtag_text,
    }
}

fn parse_recipe(cfg: &RunConfig) -> Result<Recipe> {
    let r = cfg
        .recipe
        .as_deref()
        .context("no recipe given (--recipe or `recipe =` in the config file)")?;
    Recipe::parse(r).with_context(|| {
        format!("invalid recipe {r:?}; see `hatebench --help` for the recipe grammar")
    })
}

fn parse_model(cfg: &RunConfig) -> Result<ModelKind> {
    let c = cfg
        .clf
        .as_deref()
        .context("no classifier given (--clf or `clf =` in the config file)")?;
    c.parse::<ModelKind>().map_err(anyhow::Error::from)
}

fn single_spec(cfg: &RunConfig) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(parse_recipe(cfg)?, parse_model(cfg)?, cfg.seed);
    spec.ratio = cfg.ratio;
    spec.settings = cfg.settings.clone();
    spec.validate()?;
    Ok(spec)
}

fn cmd_clean(a: args::CleanArgs) -> Result<u8> {
    let mut schema = CsvSchema::new(&a.text_col, &a.text_col);
    if let Some(id) = &a.id_col {
        schema = schema.with_id(id);
    }
    let loaded = load_csv(&a.input, &schema)?;
    let cleaner = Cleaner::default().with_options(CleanOptions {
        keep_hashtag_text: a.keep_hashtag_text,
    });
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["id", "tokens"])?;
    for r in &loaded.records {
        w.write_record([r.id.as_str(), &cleaner.clean_text(&r.text).join(" ")])?;
    }
    let data = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    std::fs::write(&a.out, data).with_context(|| format!("cannot write {}", a.out.display()))?;
    if !loaded.skipped.is_empty() {
        eprintln!(
            "{}: skipped {} malformed rows",
            a.input.display(),
            loaded.skipped.len()
        );
    }
    eprintln!(
        "cleaned {} documents -> {}",
        loaded.records.len(),
        a.out.display()
    );
    Ok(0)
}

fn context(cfg: &RunConfig) -> Result<(ExperimentContext, Vec<InputRecord>)> {
    let corpus = cfg.load()?;
    if corpus.duplicates_removed > 0 {
        eprintln!("removed {} duplicate texts", corpus.duplicates_removed);
    }
    let split = corpus.split(cfg.ratio, cfg.seed)?;
    Ok((
        ExperimentContext::from_split(split, clean_options(cfg))?,
        corpus.inputs,
    ))
}

fn cmd_featurize(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let recipe = parse_recipe(cfg)?;
    let (ctx, inputs) = context(cfg)?;
    let mut dir = OutDir::create(out)?;
    let opts = MatrixOptions {
        jobs: cfg.jobs,
        work_dir: Some(dir.path("work")),
    };
    let (train, test) = featurize(&ctx, &recipe, &cfg.settings, cfg.seed, &opts)?;
    let labels = |ids: &[String], docs: &[hatebench::corpus::LabeledDocument]| {
        let by_id: std::collections::HashMap<&str, _> =
            docs.iter().map(|d| (d.id.as_str(), d.label)).collect();
        ids.iter().map(|i| by_id[i.as_str()]).collect::<Vec<_>>()
    };
    train.write_csv(
        dir.path("train_features.csv"),
        Some(&labels(&train.ids, &ctx.split().train)),
    )?;
    dir.note("train_features.csv")?;
    test.write_csv(
        dir.path("test_features.csv"),
        Some(&labels(&test.ids, &ctx.split().test)),
    )?;
    dir.note("test_features.csv")?;
    eprintln!(
        "{} features: {} train rows, {} test rows",
        train.width(),
        train.len(),
        test.len()
    );
    dir.finish("featurize", arguments(cfg), &inputs)?;
    Ok(0)
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let spec = single_spec(cfg)?;
    let (ctx, inputs) = context(cfg)?;
    let mut dir = OutDir::create(out)?;
    let opts = MatrixOptions {
        jobs: cfg.jobs,
        work_dir: Some(dir.path("work")),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()?;
    let (result, model) = pool.install(|| fit_and_evaluate(&ctx, &spec, &opts))?;
    let file = match model {
        FittedModel::Classical(m) => {
            m.save(dir.path("model.json"))?;
            "model.json"
        }
        FittedModel::Recurrent(m) => {
            m.save(dir.path("model.rnn"))?;
            "model.rnn"
        }
    };
    dir.note(file)?;
    let outcome = CellOutcome {
        spec,
        result: Ok(result),
    };
    dir.write_json("provenance.json", &provenance(&outcome))?;
    let m = render_metrics(&outcome.result.as_ref().unwrap().metrics);
    eprintln!(
        "test accuracy {} precision {} recall {} F1 {}",
        m[0], m[1], m[2], m[3]
    );
    dir.finish("train", arguments(cfg), &inputs)?;
    Ok(0)
}

fn write_reports(dir: &mut OutDir, outcomes: &[CellOutcome]) -> Result<usize> {
    let table = ResultTable::from_outcomes(outcomes);
    dir.write("results.csv", table.render(ReportFormat::Csv).as_bytes())?;
    dir.write(
        "results.md",
        table.render(ReportFormat::Markdown).as_bytes(),
    )?;
    let prov: Vec<_> = outcomes.iter().map(provenance).collect();
    dir.write_json("provenance.json", &prov)?;
    for o in outcomes {
        if let Err(e) = &o.result {
            eprintln!(
                "cell {} / {} failed: {e}",
                o.spec.model,
                o.spec.recipe.label()
            );
        }
    }
    Ok(table.error_count())
}

fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let spec = single_spec(cfg)?;
    let (ctx, inputs) = context(cfg)?;
    let mut dir = OutDir::create(out)?;
    write_split(&dir.root, ctx.split())?;
    dir.note("train.csv")?;
    dir.note("test.csv")?;
    let opts = MatrixOptions {
        jobs: cfg.jobs,
        work_dir: Some(dir.path("work")),
    };
    let outcomes = run_matrix_in(&ctx, &[spec], &opts)?;
    let errors = write_reports(&mut dir, &outcomes)?;
    print!("{}", std::fs::read_to_string(dir.path("results.csv"))?);
    dir.finish("run", arguments(cfg), &inputs)?;
    Ok(if errors > 0 { EXIT_CELLS } else { 0 })
}

fn load_preset(name: &str) -> Result<(Preset, InputRecord)> {
    let p = Path::new(name);
    if p.is_file() {
        Ok((Preset::load(p)?, InputRecord::file(p)?))
    } else {
        let preset = Preset::bundled(name)?;
        Ok((
            preset,
            InputRecord::bundled(
                &format!("{name}.preset"),
                hatebench::evalharness::PAPER_MATRIX.as_bytes(),
            ),
        ))
    }
}

fn cmd_matrix(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let name = cfg
        .preset
        .as_deref()
        .context("no preset given (--preset or `preset =` in the config file)")?;
    let (mut preset, preset_input) = load_preset(name)?;
    // Flag and config settings apply on top of the preset's own.
    for (k, v) in &cfg.overrides {
        preset.settings.set(k, v)?;
    }
    let specs = preset.expand(cfg.seed);
    let corpus = cfg.load()?;
    let mut inputs = corpus.inputs.clone();
    inputs.push(preset_input);
    let mut dir = OutDir::create(out)?;
    let opts = MatrixOptions {
        jobs: cfg.jobs,
        work_dir: Some(dir.path("work")),
    };
    let started = Instant::now();
    let outcomes = match &corpus.split {
        Some(split) => {
            let ctx = ExperimentContext::from_split(split.clone(), clean_options_of(&preset))?;
            run_matrix_in(&ctx, &specs, &opts)?
        }
        None => run_matrix(&corpus.docs, &specs, &opts)?,
    };
    let errors = write_reports(&mut dir, &outcomes)?;
    eprintln!(
        "{} cells ({} failed) in {:.1}s -> {}",
        outcomes.len(),
        errors,
        started.elapsed().as_secs_f64(),
        dir.root.display()
    );
    let mut args = arguments(cfg);
    args["preset_seed"] = serde_json::json!(preset.seed);
    dir.finish("matrix", args, &inputs)?;
    Ok(if errors > 0 { EXIT_CELLS } else { 0 })
}

fn clean_options_of(p: &Preset) -> CleanOptions {
    CleanOptions {
        keep_hashtag_text: p.settings.keep_hashtag_text,
    }
}

fn cmd_audit(cfg: &RunConfig, plant: Option<f64>, out: &Path) -> Result<u8> {
    let corpus = cfg.load()?;
    let mut split = corpus.split(cfg.ratio, cfg.seed)?;
    let mut planted = None;
    if let Some(f) = plant {
        let (s, k) = plant_duplicates(&split, f, cfg.seed)?;
        split = s;
        planted = Some(k);
    }
    let cleaner = Cleaner::default().with_options(clean_options(cfg));
    let report = leakage_audit(&split, &cleaner);
    let mut dir = OutDir::create(out)?;
    if planted.is_some() {
        write_split(&dir.root, &split)?;
        dir.note("train.csv")?;
        dir.note("test.csv")?;
    }
    dir.write_json(
        "audit.json",
        &serde_json::json!({
            "planted": planted,
            "report": report,
        }),
    )?;
    println!(
        "exact duplicates: {}\nnear duplicates: {}\ntrain: {} hate / {} nonhate\ntest: {} hate / {} nonhate",
        report.exact_duplicates,
        report.near_duplicates,
        report.train.hate,
        report.train.nonhate,
        report.test.hate,
        report.test.nonhate
    );
    dir.finish("audit", arguments(cfg), &corpus.inputs)?;
    Ok(0)
}

fn cmd_export(model: &Path, out: &Path) -> Result<u8> {
    let bytes = std::fs::read(model).with_context(|| format!("cannot read {}", model.display()))?;
    let source = serde_json::json!({
        "path": model.display().to_string(),
        "sha256": sha256_hex(&bytes),
    });
    let doc = if bytes.starts_with(CHECKPOINT_MAGIC.as_bytes()) {
        let m = RnnModel::load(model)?;
        serde_json::json!({
            "format": "hatebench-export",
            "version": 1,
            "source": source,
            "kind": "recurrent",
            "cell": m.layout.kind.label(),
            "vocab": m.layout.vocab,
            "embed_dim": m.layout.embed_dim,
            "hidden": m.layout.hidden,
            "trainable_embeddings": m.trainable_embeddings,
            "config": m.config,
            "tokens": m.index.tokens(),
            "params": m.params,
        })
    } else {
        let text =
            String::from_utf8(bytes).context("model file is neither a checkpoint nor JSON")?;
        let m = TrainedClassifier::from_json(&text)?;
        serde_json::json!({
            "format": "hatebench-export",
            "version": 1,
            "source": source,
            "kind": "classical",
            "classifier": m.kind().label(),
            "width": m.width(),
            "model": m,
        })
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    std::fs::write(out, s).with_context(|| format!("cannot write {}", out.display()))?;
    eprintln!("exported {} -> {}", model.display(), out.display());
    Ok(0)
}
