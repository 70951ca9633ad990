mod artifacts;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lognnet::budget::{self, Algorithm};
use lognnet::data::{self, DataError, VectorViolation};
use lognnet::eval::{self, render_table};
use lognnet::model_io::{self, ModelFileError};
use lognnet::pipeline;
use lognnet::search;
use lognnet::{Architecture, MetricsReport, Model, Schema};
use serde::Serialize;

use artifacts::{jsonl, Artifacts};
use config::{Data, Protocol, RunArgs, RunConfig, Seeds};

#[derive(Parser)]
#[command(name = "lognnet", version, about = "Chaotic-map reservoir classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search (optional), train and evaluate; writes the model and reports.
    Train(RunArgs),
    /// Evaluate a saved model, or run the configured protocol without saving.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Saved model to test instead of training.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Classify feature vectors with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// One vector, values separated by commas or spaces.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "file")]
        values: Option<String>,
        /// One vector per line.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Schema sidecar for models trained on generic CSV data.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// RAM needed on the target for an N:P:H:M network.
    EstimateRam {
        arch: String,
        /// Available RAM in bytes.
        #[arg(long)]
        limit: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Binary model file to JSON.
    Export {
        model: PathBuf,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// JSON model to a binary model file.
    Import {
        json: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Feature vectors that failed validation, by 1-based input line.
#[derive(Debug)]
struct Rejected(Vec<(usize, Vec<VectorViolation>)>);

impl std::fmt::Display for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(line, vs)| {
                let vs: Vec<String> = vs.iter().map(ToString::to_string).collect();
                format!("line {line}: {}", vs.join("; "))
            })
            .collect();
        write!(f, "{} vector(s) rejected: {}", self.0.len(), parts.join(" | "))
    }
}

impl std::error::Error for Rejected {}

#[derive(Serialize)]
struct ErrorRecord {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<RejectedLine>,
}

#[derive(Serialize)]
struct RejectedLine {
    line: usize,
    violations: Vec<VectorViolation>,
}

fn error_record(e: &anyhow::Error) -> ErrorRecord {
    let mut kind = "error";
    let mut violations = Vec::new();
    for cause in e.chain() {
        if let Some(r) = cause.downcast_ref::<Rejected>() {
            kind = "invalid_vector";
            violations = r.0.iter().map(|(line, v)| RejectedLine { line: *line, violations: v.clone() }).collect();
            break;
        }
        if let Some(le) = cause.downcast_ref::<lognnet::Error>() {
            use lognnet::Error as E;
            kind = match le {
                E::Params(_) => "params",
                E::Infeasible { .. } => "infeasible",
                E::Shape { .. } => "shape",
                E::TrainingDiverged { .. } => "training_diverged",
                E::Config(_) => "config",
                E::Empty(_) => "empty",
                E::InvalidVector(v) => {
                    violations = vec![RejectedLine { line: 1, violations: v.clone() }];
                    "invalid_vector"
                }
                E::SchemaMismatch(_) => "schema_mismatch",
                E::Data(_) => "data",
                E::ModelFile(_) => "model_file",
                E::Io(_) => "io",
            };
            break;
        }
        if cause.downcast_ref::<ModelFileError>().is_some() {
            kind = "model_file";
            break;
        }
        if cause.downcast_ref::<DataError>().is_some() {
            kind = "data";
            break;
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            kind = "config";
            break;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            kind = "io";
            break;
        }
    }
    ErrorRecord { error: kind, message: format!("{e:#}"), violations }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(run) => cmd_train(&run),
        Command::Evaluate { run, model } => cmd_evaluate(&run, model.as_deref()),
        Command::Predict { model, values, file, schema, json } => {
            cmd_predict(&model, values.as_deref(), file.as_deref(), schema.as_deref(), json)
        }
        Command::EstimateRam { arch, limit, json } => cmd_estimate_ram(&arch, limit, json),
        Command::Export { model, out } => cmd_export(&model, out.as_deref()),
        Command::Import { json, out } => cmd_import(&json, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = error_record(&e);
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    split: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    fold: Option<usize>,
    model: &'a str,
    accuracy: f64,
    report: MetricsReport,
}

/// Outcome of running the configured protocol.
struct Run {
    /// Test report: holdout test split, or the k-fold mean with its folds.
    report: MetricsReport,
    schema: Schema,
    /// Final model: the holdout model, or one trained on all data after k-fold.
    trained: Option<search::Trained>,
}

fn run_protocol(cfg: &RunConfig, final_model: bool) -> Result<Run> {
    let data = cfg.load()?;
    if data.dropped() > 0 {
        eprintln!("dropped {} malformed row(s) while loading", data.dropped());
    }
    let exp = cfg.experiment();
    let schema = data.schema().clone();
    match cfg.eval {
        Protocol::Holdout => {
            let Data::Split { train, test, .. } = data else {
                bail!("holdout needs a test split: use covid data or set `data.test_path`");
            };
            let out = eval::holdout_evaluate(&train, &test, &exp)?;
            Ok(Run { report: out.report, schema, trained: Some(out.trained) })
        }
        Protocol::Kfold { k } => {
            let all = data.combined();
            let out = eval::kfold_evaluate(&all, k, &exp, cfg.seeds.training)?;
            let trained = if final_model { Some(search::train_experiment(&all, &exp)?) } else { None };
            Ok(Run { report: out.report, schema, trained })
        }
    }
}

fn report_table(cfg: &RunConfig, run: &Run) -> String {
    let name = cfg.map.model_name();
    let mut rows: Vec<(String, &MetricsReport)> = Vec::new();
    match cfg.eval {
        Protocol::Holdout => {
            if let Some(t) = &run.trained {
                rows.push((format!("{name} (train)"), &t.train_report));
            }
        }
        Protocol::Kfold { .. } => {
            for (i, f) in run.report.folds.iter().enumerate() {
                rows.push((format!("fold {}", i + 1), f));
            }
        }
    }
    rows.push((name.to_string(), &run.report));
    let mut out = render_table(&cfg.arch.to_string(), &run.schema.classes, &rows);
    for w in &run.report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

fn metrics_records(cfg: &RunConfig, run: &Run) -> Result<String> {
    let name = cfg.map.model_name();
    let mut records = Vec::new();
    let rec = |split, fold, r: &MetricsReport| MetricsRecord { split, fold, model: name, accuracy: r.accuracy, report: r.clone() };
    match cfg.eval {
        Protocol::Holdout => {
            if let Some(t) = &run.trained {
                records.push(rec("train", None, &t.train_report));
            }
            records.push(rec("test", None, &run.report));
        }
        Protocol::Kfold { .. } => {
            for (i, f) in run.report.folds.iter().enumerate() {
                records.push(rec("fold", Some(i + 1), f));
            }
            let mut mean = run.report.clone();
            mean.folds.clear();
            records.push(rec("mean", None, &mean));
        }
    }
    jsonl(&records)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    trained_unix: u64,
    accuracy: f64,
    map_params: Vec<f64>,
    artifacts: Vec<String>,
    seeds: Seeds,
    config: RunConfig,
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn cmd_train(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let mut run = run_protocol(&cfg, true)?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let trained = run.trained.as_mut().expect("final model requested");
    trained.model.meta.trained_unix = now;
    let trained = run.trained.as_ref().expect("final model requested");
    let model = &trained.model;

    let mut files = Artifacts::default();
    files.add("model.lgnn", model_io::encode(model)?);
    let table = report_table(&cfg, &run);
    files.add("metrics.txt", table.clone());
    files.add("metrics.jsonl", metrics_records(&cfg, &run)?);
    if let Some(s) = &trained.search {
        files.add("search_trace.jsonl", s.trace_jsonl());
    }
    files.add("ram.jsonl", jsonl(&[budget::estimate(cfg.arch)])?);

    let mut resolved = cfg.clone();
    resolved.data.path = absolute(&resolved.data.path);
    for p in [&mut resolved.data.test_path, &mut resolved.data.schema, &mut resolved.data.columns].into_iter().flatten() {
        *p = absolute(p);
    }
    let mut names = files.names();
    names.push("manifest.toml".into());
    let manifest = Manifest {
        command: "train",
        version: env!("CARGO_PKG_VERSION"),
        trained_unix: now,
        accuracy: run.report.accuracy,
        map_params: model.spec.params.clone(),
        artifacts: names,
        seeds: cfg.seeds,
        config: resolved,
    };
    files.add("manifest.toml", toml::to_string(&manifest).context("serializing manifest")?);
    files.commit(&cfg.output)?;

    print!("{table}");
    println!("map parameters: {:?}", model.spec.params);
    println!("artifacts written to {}", cfg.output.display());
    Ok(())
}

fn cmd_evaluate(args: &RunArgs, model_path: Option<&Path>) -> Result<()> {
    let (table, records, output) = match model_path {
        Some(path) => {
            let model = model_io::load(path).with_context(|| format!("loading {}", path.display()))?;
            let (data_cfg, output) = args.resolve_data()?;
            let test = data_cfg.load()?.test_set();
            let report = pipeline::test_model(&model, &test)?;
            let name = model.spec.kind.model_name();
            let table = render_table(&model.arch.to_string(), &test.schema.classes, &[(name.to_string(), &report)]);
            let rec = MetricsRecord { split: "test", fold: None, model: name, accuracy: report.accuracy, report };
            (table, jsonl(&[rec])?, output)
        }
        None => {
            let cfg = args.resolve()?;
            let run = run_protocol(&cfg, false)?;
            (report_table(&cfg, &run), metrics_records(&cfg, &run)?, Some(cfg.output.clone()))
        }
    };
    if let Some(dir) = output {
        let mut files = Artifacts::default();
        files.add("evaluation.jsonl", records);
        files.commit(&dir)?;
    }
    print!("{table}");
    Ok(())
}

fn split_tokens(line: &str) -> Vec<&str> {
    line.split([',', ';', '\t', ' ']).filter(|t| !t.is_empty()).collect()
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    line: usize,
    label: &'a str,
    class: usize,
    scores: &'a [f64],
}

fn cmd_predict(model_path: &Path, values: Option<&str>, file: Option<&Path>, schema: Option<&Path>, json: bool) -> Result<()> {
    let model = model_io::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let schema = match schema {
        Some(p) => Schema::from_toml_file(p)?,
        None => Schema::builtin(&model.meta.schema_id).with_context(|| {
            format!("model schema `{}` is not built in; pass --schema", model.meta.schema_id)
        })?,
    };
    let lines: Vec<(usize, String)> = match (values, file) {
        (Some(v), None) => vec![(1, v.to_string())],
        (None, Some(f)) => {
            let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
            text.lines().enumerate().map(|(i, l)| (i + 1, l.to_string())).collect()
        }
        _ => bail!("pass exactly one of --values or --file"),
    };
    let is_header = |tokens: &[&str]| {
        tokens.len() == schema.n_features()
            && tokens.iter().zip(&schema.features).all(|(t, f)| t.eq_ignore_ascii_case(&f.name))
    };
    let mut rejected = Vec::new();
    let mut out = String::new();
    for (line, text) in &lines {
        let tokens = split_tokens(text);
        if tokens.is_empty() || text.trim_start().starts_with('#') || (*line == 1 && is_header(&tokens)) {
            continue;
        }
        let v = match data::parse_vector(&schema, &tokens) {
            Ok(v) => v,
            Err(vs) => {
                rejected.push((*line, vs));
                continue;
            }
        };
        let v: Vec<Option<f64>> = v.into_iter().map(Some).collect();
        let p = pipeline::predict_patient(&model, &schema, &v)?;
        if json {
            let rec = PredictionLine { line: *line, label: &p.label, class: p.class, scores: &p.scores };
            out.push_str(&serde_json::to_string(&rec)?);
        } else {
            let scores: Vec<String> = p.scores.iter().map(|s| format!("{s:.6}")).collect();
            out.push_str(&format!("{}\t{}\t{}", p.label, p.class, scores.join(",")));
        }
        out.push('\n');
    }
    print!("{out}");
    if !rejected.is_empty() {
        return Err(Rejected(rejected).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct RamReport {
    breakdown: budget::RamBreakdown,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fits: Vec<budget::Fit>,
}

fn cmd_estimate_ram(arch: &str, limit: Option<u64>, json: bool) -> Result<()> {
    let arch: Architecture = arch.parse()?;
    let breakdown = budget::estimate(arch);
    let fits = match limit {
        Some(l) => vec![budget::fits(arch, l, Algorithm::Alg1)?, budget::fits(arch, l, Algorithm::Alg2)?],
        None => Vec::new(),
    };
    if json {
        println!("{}", serde_json::to_string(&RamReport { breakdown, fits })?);
        return Ok(());
    }
    println!("{}", budget::table_header());
    println!("{}", breakdown.table_row());
    println!();
    print!("{}", breakdown.listing());
    for f in &fits {
        let verdict = if f.fits { "yes" } else { "no" };
        println!("{:?} fits in {} B: {verdict} (headroom {} B)", f.algorithm, f.limit, f.headroom);
    }
    Ok(())
}

fn cmd_export(model_path: &Path, out: Option<&Path>) -> Result<()> {
    let model = model_io::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let text = serde_json::to_string_pretty(&model)? + "\n";
    match out {
        Some(p) => {
            let mut files = Artifacts::default();
            let name = p.file_name().context("output path has no file name")?.to_string_lossy().into_owned();
            files.add(&name, text);
            files.commit(p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_import(json: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(json).with_context(|| format!("reading {}", json.display()))?;
    let model: Model = serde_json::from_str(&text).context("parsing model JSON")?;
    model.check()?;
    model_io::save(&model, out)?;
    println!("model written to {}", out.display());
    Ok(())
}
