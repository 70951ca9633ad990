//! Dataset schemas, delimited-file loaders and feature-vector validation.
//!
//! Loaders never impute: a row with any missing or out-of-domain value is
//! dropped and recorded in the [`LoadReport`], so that
//! `loaded + dropped == source rows` always holds.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed delimited file: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid loader configuration: {0}")]
    Config(String),
    #[error("no usable records in {path} ({dropped} rows dropped)")]
    NoRecords { path: String, dropped: usize },
}

/// Value domain of one feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Real,
    Integer,
    /// `{0, 1}`
    Binary,
    /// `{-1, 0, 1}`
    Ternary,
}

impl Domain {
    pub fn contains(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Domain::Real => true,
                Domain::Integer => v.fract() == 0.0,
                Domain::Binary => v == 0.0 || v == 1.0,
                Domain::Ternary => v == -1.0 || v == 0.0 || v == 1.0,
            }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub domain: Domain,
}

/// Ordered feature list plus label vocabulary. Class `k` is `classes[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub features: Vec<Feature>,
    pub label: String,
    pub classes: Vec<String>,
}

const CTG_FEATURES: [(&str, Domain); 25] = [
    ("b", Domain::Integer),
    ("e", Domain::Integer),
    ("LBE", Domain::Integer),
    ("LB", Domain::Integer),
    ("AC", Domain::Real),
    ("FM", Domain::Real),
    ("UC", Domain::Real),
    ("ASTV", Domain::Integer),
    ("mSTV", Domain::Real),
    ("ALTV", Domain::Integer),
    ("mLTV", Domain::Real),
    ("DL", Domain::Real),
    ("DS", Domain::Real),
    ("DP", Domain::Real),
    ("DR", Domain::Real),
    ("Width", Domain::Integer),
    ("Min", Domain::Integer),
    ("Max", Domain::Integer),
    ("Nmax", Domain::Integer),
    ("Nzeros", Domain::Integer),
    ("Mode", Domain::Integer),
    ("Mean", Domain::Integer),
    ("Median", Domain::Integer),
    ("Variance", Domain::Integer),
    ("Tendency", Domain::Ternary),
];

/// Feature names of the COVID-19 screening schema, in model input order.
pub const COVID_FEATURES: [&str; 8] = [
    "sex",
    "age_60_and_above",
    "cough",
    "fever",
    "sore_throat",
    "shortness_of_breath",
    "head_ache",
    "contact_with_confirmed",
];

impl Schema {
    pub const CTG_ID: &'static str = "ctg-nsp-25";
    pub const COVID_ID: &'static str = "covid-il-8";

    /// Cardiotocography: 25 numeric features, classes N, S, P.
    pub fn ctg() -> Self {
        Schema {
            id: Self::CTG_ID.into(),
            features: CTG_FEATURES
                .iter()
                .map(|(n, d)| Feature { name: (*n).into(), domain: *d })
                .collect(),
            label: "NSP".into(),
            classes: vec!["N".into(), "S".into(), "P".into()],
        }
    }

    /// COVID-19 screening questionnaire: 8 binary answers, Negative/Positive.
    pub fn covid() -> Self {
        Schema {
            id: Self::COVID_ID.into(),
            features: COVID_FEATURES
                .iter()
                .map(|n| Feature { name: (*n).into(), domain: Domain::Binary })
                .collect(),
            label: "corona_result".into(),
            classes: vec!["Negative".into(), "Positive".into()],
        }
    }

    /// Built-in schema by id.
    pub fn builtin(id: &str) -> Option<Self> {
        match id {
            Self::CTG_ID => Some(Self::ctg()),
            Self::COVID_ID => Some(Self::covid()),
            _ => None,
        }
    }

    /// Reads a TOML schema sidecar.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let text = read_text(path.as_ref())?;
        let schema: Schema =
            toml::from_str(&text).map_err(|e| DataError::Schema(e.to_string()))?;
        schema.check()?;
        Ok(schema)
    }

    fn check(&self) -> Result<(), DataError> {
        if self.features.is_empty() {
            return Err(DataError::Schema("no features".into()));
        }
        if self.classes.is_empty() {
            return Err(DataError::Schema("no classes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.classes {
            if !seen.insert(c.to_ascii_lowercase()) {
                return Err(DataError::Schema(format!("duplicate class `{c}`")));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Label token to class index: class name first (case-insensitive), then
    /// a 0-based integer index.
    pub fn class_index(&self, token: &str) -> Option<usize> {
        let t = token.trim();
        self.classes
            .iter()
            .position(|c| c.eq_ignore_ascii_case(t))
            .or_else(|| t.parse::<usize>().ok().filter(|&k| k < self.classes.len()))
    }
}

/// One labelled example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: usize,
    /// 1-based data row in the source file, when known.
    pub row_id: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(schema: Schema, records: Vec<Record>) -> Self {
        Dataset { schema, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schema.n_classes()];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn summary(&self, dropped: usize) -> DatasetSummary {
        DatasetSummary {
            schema: self.schema.id.clone(),
            records: self.len(),
            dropped,
            classes: self
                .schema
                .classes
                .iter()
                .cloned()
                .zip(self.class_counts())
                .collect(),
        }
    }
}

/// Machine-readable dataset summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub schema: String,
    pub records: usize,
    pub dropped: usize,
    pub classes: Vec<(String, usize)>,
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} records", self.schema, self.records)?;
        for (name, n) in &self.classes {
            write!(f, ", {name}={n}")?;
        }
        write!(f, " ({} rows dropped)", self.dropped)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    /// 1-based data row (header excluded).
    pub row: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub source_rows: usize,
    pub loaded: usize,
    pub dropped: Vec<DroppedRow>,
}

impl LoadReport {
    fn drop_row(&mut self, row: u64, reason: impl Into<String>) {
        self.dropped.push(DroppedRow { row, reason: reason.into() });
    }
}

/// Type 2 dataset (no predefined split) with its load report.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    pub report: LoadReport,
}

fn read_text(path: &Path) -> Result<String, DataError> {
    let io = |source| DataError::Io { path: path.display().to_string(), source };
    let bytes = std::fs::read(path).map_err(io)?;
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    if gz {
        let mut s = String::new();
        GzDecoder::new(bytes.as_slice()).read_to_string(&mut s).map_err(io)?;
        Ok(s)
    } else {
        String::from_utf8(bytes).map_err(|e| io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
    }
}

/// Picks the most frequent of `,`, `;` and tab on the header line.
pub fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    [b',', b';', b'\t']
        .into_iter()
        .max_by_key(|d| header.bytes().filter(|b| b == d).count())
        .unwrap_or(b',')
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, DataError> {
        let text = read_text(path)?;
        let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(detect_delimiter(text))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().collect::<Result<Vec<_>, _>>()?;
        Ok(Table { header, rows })
    }

    /// Case-insensitive column lookup; reports every missing name at once.
    fn columns(&self, names: &[&str]) -> Result<Vec<usize>, DataError> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            match self.header.iter().position(|h| h.eq_ignore_ascii_case(n)) {
                Some(i) => out.push(i),
                None => missing.push((*n).to_string()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(DataError::MissingColumns(missing))
        }
    }
}

fn is_missing(token: &str) -> bool {
    let t = token.trim();
    t.is_empty()
        || ["none", "na", "nan", "null", "?"].iter().any(|m| t.eq_ignore_ascii_case(m))
}

/// Parses one delimited field. `Ok(None)` means missing.
fn parse_value(token: &str) -> Result<Option<f64>, String> {
    if is_missing(token) {
        return Ok(None);
    }
    token
        .trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| format!("unparseable value `{token}`"))
}

fn numeric_row(
    schema: &Schema,
    record: &csv::StringRecord,
    cols: &[usize],
) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(cols.len());
    for (f, &c) in schema.features.iter().zip(cols) {
        let v = parse_value(record.get(c).unwrap_or(""))?
            .ok_or_else(|| format!("missing {}", f.name))?;
        if !f.domain.contains(v) {
            return Err(format!("{}={v} outside {:?} domain", f.name, f.domain));
        }
        out.push(v);
    }
    Ok(out)
}

/// Loads a delimited file whose header contains every schema feature and the
/// label column. Extra columns are ignored. `label_token` maps a raw label
/// cell to a class index.
fn load_table(
    path: &Path,
    schema: Schema,
    label_token: impl Fn(&str) -> Option<usize>,
) -> Result<Loaded, DataError> {
    let table = Table::read(path)?;
    let mut names: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    names.push(&schema.label);
    let mut cols = table.columns(&names)?;
    let label_col = cols.pop().expect("label column");
    let mut report = LoadReport { source_rows: table.rows.len(), ..LoadReport::default() };
    let mut records = Vec::new();
    for (k, row) in table.rows.iter().enumerate() {
        let row_id = k as u64 + 1;
        let raw_label = row.get(label_col).unwrap_or("");
        let Some(label) = label_token(raw_label) else {
            let why = if is_missing(raw_label) { "missing label".to_string() } else {
                format!("unknown label `{raw_label}`")
            };
            report.drop_row(row_id, why);
            continue;
        };
        match numeric_row(&schema, row, &cols) {
            Ok(features) => records.push(Record { features, label, row_id: Some(row_id) }),
            Err(why) => report.drop_row(row_id, why),
        }
    }
    report.loaded = records.len();
    if records.is_empty() {
        return Err(DataError::NoRecords {
            path: path.display().to_string(),
            dropped: report.dropped.len(),
        });
    }
    Ok(Loaded { dataset: Dataset::new(schema, records), report })
}

/// Loads the cardiotocography corpus from a delimited export.
///
/// Uses the 25 features `b` .. `Tendency` and the three-class `NSP` column
/// (`1/2/3` or `N/S/P`). Identifier columns and the 10-class pattern label
/// are ignored.
pub fn load_ctg(path: impl AsRef<Path>) -> Result<Loaded, DataError> {
    let schema = Schema::ctg();
    let classes = schema.classes.clone();
    load_table(path.as_ref(), schema, move |t| {
        let t = t.trim();
        if let Some(k) = classes.iter().position(|c| c.eq_ignore_ascii_case(t)) {
            return Some(k);
        }
        match t.parse::<f64>() {
            Ok(v) if v == 1.0 => Some(0),
            Ok(v) if v == 2.0 => Some(1),
            Ok(v) if v == 3.0 => Some(2),
            _ => None,
        }
    })
}

/// Loads any delimited file described by a schema sidecar.
pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<Loaded, DataError> {
    schema.check()?;
    let s = schema.clone();
    load_table(path.as_ref(), schema, move |t| s.class_index(t))
}

/// A yes/no column with its accepted tokens (case-insensitive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryColumn {
    pub column: String,
    /// Tokens encoded as 1; the first one is the canonical spelling.
    pub one: Vec<String>,
    /// Tokens encoded as 0; the first one is the canonical spelling.
    pub zero: Vec<String>,
}

impl BinaryColumn {
    fn new(column: &str, one: &[&str], zero: &[&str]) -> Self {
        BinaryColumn {
            column: column.into(),
            one: one.iter().map(|s| (*s).into()).collect(),
            zero: zero.iter().map(|s| (*s).into()).collect(),
        }
    }

    pub fn encode(&self, token: &str) -> Option<u8> {
        let t = token.trim();
        if self.one.iter().any(|s| s.eq_ignore_ascii_case(t)) {
            Some(1)
        } else if self.zero.iter().any(|s| s.eq_ignore_ascii_case(t)) {
            Some(0)
        } else {
            None
        }
    }

    pub fn decode(&self, bit: u8) -> &str {
        if bit == 0 { &self.zero[0] } else { &self.one[0] }
    }
}

/// Order in which day patterns are tried.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DateFormat {
    /// `YYYY-MM-DD`, falling back to day-first.
    #[default]
    Iso,
    /// `DD/MM/YYYY` (also `.` or `-` separated), falling back to ISO.
    DayFirst,
}

impl DateFormat {
    pub fn parse(self, token: &str) -> Option<NaiveDate> {
        let t = token.trim();
        let t = t.split(['T', ' ']).next().unwrap_or(t);
        let iso = || NaiveDate::parse_from_str(t, "%Y-%m-%d").ok();
        let day_first = || {
            ["%d/%m/%Y", "%d.%m.%Y", "%d-%m-%Y"]
                .iter()
                .find_map(|f| NaiveDate::parse_from_str(t, f).ok())
        };
        match self {
            DateFormat::Iso => iso().or_else(day_first),
            DateFormat::DayFirst => day_first().or_else(iso),
        }
    }
}

/// Column mapping for COVID-19 screening exports. The defaults match the
/// English-header release of the Israeli testing data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovidColumns {
    pub date: String,
    pub date_format: DateFormat,
    /// `one` = positive, `zero` = negative; any other token is indeterminate.
    pub result: BinaryColumn,
    /// Eight columns in model input order (see [`COVID_FEATURES`]).
    pub features: Vec<BinaryColumn>,
    pub train_from: NaiveDate,
    pub train_to: NaiveDate,
    pub test_from: NaiveDate,
    pub test_to: NaiveDate,
}

impl Default for CovidColumns {
    fn default() -> Self {
        let yes = ["1", "yes", "true", "1.0"];
        let no = ["0", "no", "false", "0.0"];
        let date = |m, d| NaiveDate::from_ymd_opt(2020, m, d).expect("valid date");
        CovidColumns {
            date: "test_date".into(),
            date_format: DateFormat::Iso,
            result: BinaryColumn::new("corona_result", &["positive"], &["negative"]),
            features: vec![
                BinaryColumn::new("gender", &["male"], &["female"]),
                BinaryColumn::new("age_60_and_above", &["yes", "1"], &["no", "0"]),
                BinaryColumn::new("cough", &yes, &no),
                BinaryColumn::new("fever", &yes, &no),
                BinaryColumn::new("sore_throat", &yes, &no),
                BinaryColumn::new("shortness_of_breath", &yes, &no),
                BinaryColumn::new("head_ache", &yes, &no),
                BinaryColumn::new("test_indication", &["contact with confirmed"], &["abroad", "other"]),
            ],
            train_from: date(3, 22),
            train_to: date(3, 31),
            test_from: date(4, 1),
            test_to: date(4, 7),
        }
    }
}

impl CovidColumns {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let text = read_text(path.as_ref())?;
        let cfg: CovidColumns = toml::from_str(&text).map_err(|e| DataError::Config(e.to_string()))?;
        if cfg.features.len() != COVID_FEATURES.len() {
            return Err(DataError::Config(format!(
                "expected {} feature columns, got {}",
                COVID_FEATURES.len(),
                cfg.features.len()
            )));
        }
        Ok(cfg)
    }
}

/// Type 1 dataset with its predefined split.
#[derive(Clone, Debug)]
pub struct CovidSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub report: LoadReport,
}

/// Loads COVID-19 screening records and splits them by test date.
pub fn load_covid(path: impl AsRef<Path>, cols: &CovidColumns) -> Result<CovidSplit, DataError> {
    let path = path.as_ref();
    let table = Table::read(path)?;
    let mut names: Vec<&str> = cols.features.iter().map(|c| c.column.as_str()).collect();
    names.push(&cols.result.column);
    names.push(&cols.date);
    let mut idx = table.columns(&names)?;
    let date_col = idx.pop().expect("date column");
    let result_col = idx.pop().expect("result column");

    let schema = Schema::covid();
    let mut report = LoadReport { source_rows: table.rows.len(), ..LoadReport::default() };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    // Same token sets repeat across ~10^5 rows.
    let mut memo: HashMap<(usize, String), Option<u8>> = HashMap::new();
    'rows: for (k, row) in table.rows.iter().enumerate() {
        let row_id = k as u64 + 1;
        let raw_date = row.get(date_col).unwrap_or("");
        let Some(date) = cols.date_format.parse(raw_date) else {
            report.drop_row(row_id, format!("unparseable date `{raw_date}`"));
            continue;
        };
        let in_train = date >= cols.train_from && date <= cols.train_to;
        let in_test = date >= cols.test_from && date <= cols.test_to;
        if !in_train && !in_test {
            report.drop_row(row_id, format!("date {date} outside train/test windows"));
            continue;
        }
        let raw_result = row.get(result_col).unwrap_or("");
        let Some(label) = cols.result.encode(raw_result) else {
            report.drop_row(row_id, format!("indeterminate result `{raw_result}`"));
            continue;
        };
        let mut features = Vec::with_capacity(cols.features.len());
        for (j, (c, &ci)) in cols.features.iter().zip(&idx).enumerate() {
            let token = row.get(ci).unwrap_or("");
            let bit = *memo
                .entry((j, token.to_string()))
                .or_insert_with(|| if is_missing(token) { None } else { c.encode(token) });
            match bit {
                Some(b) => features.push(f64::from(b)),
                None => {
                    let why = if is_missing(token) {
                        format!("missing {}", COVID_FEATURES[j])
                    } else {
                        format!("unrecognised {} answer `{token}`", COVID_FEATURES[j])
                    };
                    report.drop_row(row_id, why);
                    continue 'rows;
                }
            }
        }
        let rec = Record { features, label: usize::from(label), row_id: Some(row_id) };
        if in_train { train.push(rec) } else { test.push(rec) }
    }
    report.loaded = train.len() + test.len();
    if report.loaded == 0 {
        return Err(DataError::NoRecords {
            path: path.display().to_string(),
            dropped: report.dropped.len(),
        });
    }
    Ok(CovidSplit {
        train: Dataset::new(schema.clone(), train),
        test: Dataset::new(schema, test),
        report,
    })
}

/// Why a feature vector does not match a schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorViolation {
    Length { expected: usize, got: usize },
    Missing { feature: String },
    Unparseable { feature: String, token: String },
    Domain { feature: String, value: f64 },
}

impl fmt::Display for VectorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorViolation::Length { expected, got } => {
                write!(f, "length: expected {expected} values, got {got}")
            }
            VectorViolation::Missing { feature } => write!(f, "{feature}: missing"),
            VectorViolation::Unparseable { feature, token } => {
                write!(f, "{feature}: cannot parse `{token}`")
            }
            VectorViolation::Domain { feature, value } => {
                write!(f, "{feature}: {value} outside domain")
            }
        }
    }
}

/// Checks length, presence and per-feature domain. Length mismatches are
/// reported alone since positions no longer line up with feature names.
pub fn validate_vector(schema: &Schema, v: &[Option<f64>]) -> Result<Vec<f64>, Vec<VectorViolation>> {
    if v.len() != schema.n_features() {
        return Err(vec![VectorViolation::Length { expected: schema.n_features(), got: v.len() }]);
    }
    let mut violations = Vec::new();
    for (f, x) in schema.features.iter().zip(v) {
        match x {
            None => violations.push(VectorViolation::Missing { feature: f.name.clone() }),
            Some(x) if !f.domain.contains(*x) => {
                violations.push(VectorViolation::Domain { feature: f.name.clone(), value: *x })
            }
            Some(_) => {}
        }
    }
    if violations.is_empty() {
        Ok(v.iter().map(|x| x.expect("checked")).collect())
    } else {
        Err(violations)
    }
}

/// Parses raw tokens (e.g. one line of user input) and validates them.
pub fn parse_vector(schema: &Schema, tokens: &[&str]) -> Result<Vec<f64>, Vec<VectorViolation>> {
    if tokens.len() != schema.n_features() {
        return Err(vec![VectorViolation::Length {
            expected: schema.n_features(),
            got: tokens.len(),
        }]);
    }
    let mut parsed = Vec::with_capacity(tokens.len());
    let mut violations = Vec::new();
    for (f, t) in schema.features.iter().zip(tokens) {
        match parse_value(t) {
            Ok(v) => parsed.push(v),
            Err(_) => {
                violations.push(VectorViolation::Unparseable {
                    feature: f.name.clone(),
                    token: (*t).to_string(),
                });
                parsed.push(Some(0.0));
            }
        }
    }
    match validate_vector(schema, &parsed) {
        Ok(v) if violations.is_empty() => Ok(v),
        Ok(_) => Err(violations),
        Err(mut more) => {
            violations.append(&mut more);
            Err(violations)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domains() {
        assert!(Domain::Ternary.contains(-1.0));
        assert!(!Domain::Ternary.contains(2.0));
        assert!(!Domain::Binary.contains(0.5));
        assert!(Domain::Integer.contains(120.0));
        assert!(!Domain::Integer.contains(1.5));
        assert!(!Domain::Real.contains(f64::NAN));
    }

    #[test]
    fn covid_zero_vector_is_valid() {
        let s = Schema::covid();
        assert_eq!(validate_vector(&s, &[Some(0.0); 8]).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn binary_field_rejects_two() {
        let s = Schema::covid();
        let mut v = [Some(0.0); 8];
        v[2] = Some(2.0);
        let err = validate_vector(&s, &v).unwrap_err();
        assert_eq!(err, vec![VectorViolation::Domain { feature: "cough".into(), value: 2.0 }]);
    }

    #[test]
    fn short_ctg_vector_is_a_length_violation() {
        let err = validate_vector(&Schema::ctg(), &[Some(0.0); 24]).unwrap_err();
        assert_eq!(err, vec![VectorViolation::Length { expected: 25, got: 24 }]);
    }

    #[test]
    fn missing_features_are_listed() {
        let mut v = [Some(1.0); 8];
        v[0] = None;
        v[7] = None;
        let err = validate_vector(&Schema::covid(), &v).unwrap_err();
        let names: Vec<String> = err
            .iter()
            .map(|e| match e {
                VectorViolation::Missing { feature } => feature.clone(),
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(names, ["sex", "contact_with_confirmed"]);
    }

    #[test]
    fn parse_reports_bad_tokens() {
        let tokens = ["0", "1", "maybe", "0", "0", "0", "0", "1"];
        let err = parse_vector(&Schema::covid(), &tokens).unwrap_err();
        assert_eq!(
            err,
            vec![VectorViolation::Unparseable { feature: "cough".into(), token: "maybe".into() }]
        );
    }

    #[test]
    fn delimiter_detection() {
        assert_eq!(detect_delimiter("a;b;c\n1;2;3"), b';');
        assert_eq!(detect_delimiter("a,b,c\n"), b',');
        assert_eq!(detect_delimiter("a\tb\n"), b'\t');
    }

    #[test]
    fn dates_iso_and_day_first() {
        let d = NaiveDate::from_ymd_opt(2020, 4, 1).unwrap();
        assert_eq!(DateFormat::Iso.parse("2020-04-01"), Some(d));
        assert_eq!(DateFormat::Iso.parse("01/04/2020"), Some(d));
        assert_eq!(DateFormat::DayFirst.parse("01.04.2020"), Some(d));
        assert_eq!(DateFormat::Iso.parse("2020-04-01T00:00:00"), Some(d));
        assert_eq!(DateFormat::Iso.parse("April 1"), None);
    }

    #[test]
    fn class_index_by_name_or_number() {
        let s = Schema::ctg();
        assert_eq!(s.class_index("p"), Some(2));
        assert_eq!(s.class_index("1"), Some(1));
        assert_eq!(s.class_index("7"), None);
    }

    #[test]
    fn canonical_tokens_decode() {
        let cols = CovidColumns::default();
        assert_eq!(cols.features[0].decode(1), "male");
        assert_eq!(cols.result.decode(0), "negative");
        assert_eq!(cols.result.encode("Positive"), Some(1));
        assert_eq!(cols.result.encode("other"), None);
    }
}
