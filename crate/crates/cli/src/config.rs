//! Run configuration: a TOML file merged with command-line overrides.
//!
//! Every flag writes the config key of the same name, so a flag and a file
//! entry are interchangeable. Relative paths in a file are resolved against
//! the file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use lognnet::data::{self, CovidColumns, Schema};
use lognnet::reservoir::ScaleMode;
use lognnet::{Architecture, Dataset, Experiment, MapKind, MapParams, SwarmConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Ctg,
    Covid,
    /// Any delimited file described by a schema sidecar.
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub path: PathBuf,
    /// Separate test file for holdout on CTG or CSV data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
    /// Schema sidecar, required for `csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    /// Column mapping sidecar for `covid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Protocol {
    Holdout,
    Kfold {
        #[serde(default = "default_k")]
        k: usize,
    },
}

fn default_k() -> usize {
    5
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol::Holdout
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// Weight initialization, shuffling and fold assignment.
    pub training: u64,
    /// Particle swarm.
    pub search: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { training: TrainConfig::default().seed, search: SwarmConfig::default().seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub arch: Architecture,
    pub map: MapKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SwarmConfig>,
    #[serde(default)]
    pub scale: ScaleMode,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: Protocol,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("lognnet-out")
}

/// Flags shared by `train` and `evaluate`.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Run configuration (TOML). A manifest written by `train` also works.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "data-kind", value_enum)]
    pub data_kind: Option<DataKind>,
    /// Dataset file.
    #[arg(long = "data")]
    pub data_path: Option<PathBuf>,
    #[arg(long = "test-data")]
    pub test_path: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub columns: Option<PathBuf>,
    /// Architecture N:P:H:M.
    #[arg(long)]
    pub arch: Option<String>,
    /// Map kind: lognnet, logistic, sine, gauss, 2sided, plank, henon1, henon2.
    #[arg(long)]
    pub map: Option<String>,
    /// Fixed map parameters, comma separated. Disables search.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,
    /// Search the map parameters. Disables fixed parameters.
    #[arg(long)]
    pub search: bool,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "fitness-epochs")]
    pub fitness_epochs: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long)]
    pub scale: Option<String>,
    /// holdout or kfold.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "training-seed")]
    pub training_seed: Option<u64>,
    #[arg(long = "search-seed")]
    pub search_seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn set(table: &mut Table, path: &[&str], value: Value) {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut t = table;
    for p in parents {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        if !entry.is_table() {
            *entry = Value::Table(Table::new());
        }
        t = entry.as_table_mut().expect("table");
    }
    t.insert(last.to_string(), value);
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn resolve_paths(table: &mut Table, base: &Path) {
    let fix = |v: &mut Value| {
        if let Some(s) = v.as_str() {
            let p = Path::new(s);
            if p.is_relative() {
                *v = path_value(&base.join(p));
            }
        }
    };
    if let Some(Value::Table(d)) = table.get_mut("data") {
        for key in ["path", "test_path", "schema", "columns"] {
            if let Some(v) = d.get_mut(key) {
                fix(v);
            }
        }
    }
    if let Some(v) = table.get_mut("output") {
        fix(v);
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut table: Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    // A manifest keeps the resolved run configuration under `config`.
    if let Some(Value::Table(inner)) = table.remove("config") {
        table = inner;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    resolve_paths(&mut table, &base);
    Ok(table)
}

impl RunArgs {
    fn overrides(&self, t: &mut Table) {
        let s = |v: &str| Value::String(v.to_string());
        let int = |v: usize| Value::Integer(v as i64);
        if let Some(v) = self.data_kind {
            let name = match v {
                DataKind::Ctg => "ctg",
                DataKind::Covid => "covid",
                DataKind::Csv => "csv",
            };
            set(t, &["data", "kind"], s(name));
        }
        for (key, v) in [
            ("path", &self.data_path),
            ("test_path", &self.test_path),
            ("schema", &self.schema),
            ("columns", &self.columns),
        ] {
            if let Some(p) = v {
                set(t, &["data", key], path_value(p));
            }
        }
        if let Some(v) = &self.arch {
            set(t, &["arch"], s(v));
        }
        if let Some(v) = &self.map {
            set(t, &["map"], s(v));
        }
        if let Some(v) = &self.params {
            set(t, &["params"], Value::Array(v.iter().map(|&x| Value::Float(x)).collect()));
            t.remove("search");
        }
        let wants_search = self.search || self.particles.is_some() || self.iterations.is_some() || self.fitness_epochs.is_some();
        if wants_search {
            t.remove("params");
            if !t.contains_key("search") {
                set(t, &["search"], Value::Table(Table::new()));
            }
        }
        for (key, v) in [("particles", self.particles), ("iterations", self.iterations), ("fitness_epochs", self.fitness_epochs)] {
            if let Some(v) = v {
                set(t, &["search", key], int(v));
            }
        }
        if let Some(v) = self.epochs {
            set(t, &["train", "epochs"], int(v));
        }
        if let Some(v) = self.learning_rate {
            set(t, &["train", "learning_rate"], Value::Float(v));
        }
        if self.shuffle {
            set(t, &["train", "shuffle"], Value::Boolean(true));
        }
        if let Some(v) = &self.scale {
            set(t, &["scale"], s(v));
        }
        if let Some(v) = &self.protocol {
            set(t, &["eval", "protocol"], s(v));
        }
        if let Some(v) = self.k {
            set(t, &["eval", "k"], int(v));
            if self.protocol.is_none() {
                set(t, &["eval", "protocol"], s("kfold"));
            }
        }
        if let Some(v) = self.training_seed {
            set(t, &["seeds", "training"], Value::Integer(v as i64));
        }
        if let Some(v) = self.search_seed {
            set(t, &["seeds", "search"], Value::Integer(v as i64));
        }
        if let Some(p) = &self.output {
            set(t, &["output"], path_value(p));
        }
    }

    fn table(&self) -> Result<Table> {
        let mut table = match &self.config {
            Some(p) => read_table(p)?,
            None => Table::new(),
        };
        self.overrides(&mut table);
        Ok(table)
    }

    /// Reads the config file (if any), applies flags and validates.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg: RunConfig = Table::try_into(self.table()?).context("invalid run configuration")?;
        cfg.apply_seeds();
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// The two named seeds are the only source of randomness.
    fn apply_seeds(&mut self) {
        self.train.seed = self.seeds.training;
        if let Some(s) = &mut self.search {
            s.seed = self.seeds.search;
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.params, &self.search) {
            (Some(_), Some(_)) => bail!("set either `params` or `[search]`, not both"),
            (None, None) => bail!("set map `params` or enable `[search]`"),
            _ => {}
        }
        if self.data.kind == DataKind::Csv && self.data.schema.is_none() {
            bail!("`data.schema` is required for csv data");
        }
        if let Protocol::Kfold { k } = self.eval {
            if k < 2 {
                bail!("k-fold needs k >= 2, got {k}");
            }
        }
        Ok(())
    }

    pub fn experiment(&self) -> Experiment {
        let params = match (&self.params, &self.search) {
            (Some(p), _) => MapParams::Fixed(p.clone()),
            (None, Some(s)) => MapParams::Search(s.clone()),
            (None, None) => unreachable!("validated"),
        };
        Experiment { arch: self.arch, kind: self.map, params, train: self.train.clone(), scale: self.scale }
    }

    pub fn load(&self) -> Result<Data> {
        self.data.load()
    }
}

/// Only the data section and output directory, for commands that start from
/// a saved model.
#[derive(Deserialize)]
struct DataOnly {
    data: DataConfig,
    output: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve_data(&self) -> Result<(DataConfig, Option<PathBuf>)> {
        let mut table = self.table()?;
        table.retain(|k, _| k == "data" || k == "output");
        let d: DataOnly = Table::try_into(table).context("invalid data configuration")?;
        if d.data.kind == DataKind::Csv && d.data.schema.is_none() {
            bail!("`data.schema` is required for csv data");
        }
        Ok((d.data, d.output))
    }
}

impl DataConfig {
    /// Loads the dataset(s) described here.
    pub fn load(&self) -> Result<Data> {
        let d = self;
        let load_single = |path: &Path| -> Result<Loaded> {
            let loaded = match d.kind {
                DataKind::Ctg => data::load_ctg(path)?,
                DataKind::Csv => {
                    let schema = Schema::from_toml_file(d.schema.as_ref().expect("validated"))?;
                    data::load_csv(path, schema)?
                }
                DataKind::Covid => unreachable!(),
            };
            Ok(Loaded { dataset: loaded.dataset, dropped: loaded.report.dropped.len() })
        };
        match d.kind {
            DataKind::Covid => {
                let cols = match &d.columns {
                    Some(p) => CovidColumns::from_toml_file(p)?,
                    None => CovidColumns::default(),
                };
                let split = data::load_covid(&d.path, &cols)?;
                Ok(Data::Split { train: split.train, test: split.test, dropped: split.report.dropped.len() })
            }
            _ => {
                let main = load_single(&d.path)?;
                match &d.test_path {
                    Some(t) => {
                        let test = load_single(t)?;
                        Ok(Data::Split { train: main.dataset, test: test.dataset, dropped: main.dropped + test.dropped })
                    }
                    None => Ok(Data::Single { dataset: main.dataset, dropped: main.dropped }),
                }
            }
        }
    }
}

struct Loaded {
    dataset: Dataset,
    dropped: usize,
}

pub enum Data {
    Split { train: Dataset, test: Dataset, dropped: usize },
    Single { dataset: Dataset, dropped: usize },
}

impl Data {
    pub fn dropped(&self) -> usize {
        match self {
            Data::Split { dropped, .. } | Data::Single { dropped, .. } => *dropped,
        }
    }

    pub fn schema(&self) -> &Schema {
        match self {
            Data::Split { train, .. } => &train.schema,
            Data::Single { dataset, .. } => &dataset.schema,
        }
    }

    /// Everything in one dataset, for k-fold.
    pub fn combined(self) -> Dataset {
        match self {
            Data::Single { dataset, .. } => dataset,
            Data::Split { train, test, .. } => {
                let mut records = train.records;
                records.extend(test.records);
                Dataset::new(train.schema, records)
            }
        }
    }

    /// The split to test a saved model on: the test part if there is one.
    pub fn test_set(self) -> Dataset {
        match self {
            Data::Single { dataset, .. } => dataset,
            Data::Split { test, .. } => test,
        }
    }
}
