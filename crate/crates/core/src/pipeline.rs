//! Training, testing and single-patient classification flows.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, Schema};
use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, MetricsReport};
use crate::head::{self, HeadWeights, TrainConfig};
use crate::reservoir::{
    self, InputScaler, MapSpec, ProjectionMode, Projector, ReservoirScaler, ScaleMode,
};

/// Network shape `N:P:H:M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Architecture {
    /// Input features, `N`.
    pub inputs: usize,
    /// Reservoir outputs, `P`.
    pub reservoir: usize,
    /// Hidden neurons, `H`.
    pub hidden: usize,
    /// Classes, `M`.
    pub classes: usize,
}

impl Architecture {
    pub fn new(inputs: usize, reservoir: usize, hidden: usize, classes: usize) -> Result<Self> {
        let a = Architecture { inputs, reservoir, hidden, classes };
        if [inputs, reservoir, hidden, classes].contains(&0) {
            return Err(Error::Config(format!("architecture {a} has a zero dimension")));
        }
        Ok(a)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.inputs, self.reservoir, self.hidden, self.classes)
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed architecture `{s}`, expected N:P:H:M"));
        let parts: Vec<usize> = s
            .trim()
            .split(':')
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match parts.as_slice() {
            &[n, p, h, m] => Architecture::new(n, p, h, m),
            _ => Err(bad()),
        }
    }
}

impl From<Architecture> for String {
    fn from(a: Architecture) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Architecture {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Indices of a balanced training sequence.
///
/// Examples are grouped by label (keeping their original order), every group
/// is extended to the size of the largest one by cycling from its start, and
/// groups are then interleaved one item at a time in ascending label order.
pub fn balance_indices(labels: &[usize]) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups.retain(|g| !g.is_empty());
    let max = groups.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(max * groups.len());
    for t in 0..max {
        for g in &groups {
            out.push(g[t % g.len()]);
        }
    }
    Ok(out)
}

/// Balances a list of labelled items; see [`balance_indices`].
pub fn balance<T: Clone>(items: &[(T, usize)]) -> Result<Vec<(T, usize)>> {
    let labels: Vec<usize> = items.iter().map(|(_, l)| *l).collect();
    Ok(balance_indices(&labels)?.into_iter().map(|i| items[i].clone()).collect())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub schema_id: String,
    pub seed: u64,
    /// Seconds since the Unix epoch, 0 when unknown.
    pub trained_unix: u64,
}

/// Everything needed to classify a raw feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub arch: Architecture,
    pub spec: MapSpec,
    pub input_scaler: InputScaler,
    pub reservoir_scaler: ReservoirScaler,
    pub head: HeadWeights,
    pub meta: ModelMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub label: String,
    pub scores: Vec<f64>,
}

impl Model {
    /// Checks that every component agrees with `arch`.
    pub fn check(&self) -> Result<()> {
        let a = self.arch;
        let shape = |what, expected, got| {
            if expected == got { Ok(()) } else { Err(Error::Shape { what, expected, got }) }
        };
        shape("input scaler", a.inputs, self.input_scaler.divisors.len())?;
        shape("reservoir scaler", a.reservoir, self.reservoir_scaler.divisors.len())?;
        shape("head inputs", a.reservoir + 1, self.head.inputs)?;
        shape("head hidden", a.hidden, self.head.hidden)?;
        shape("head outputs", a.classes, self.head.outputs)?;
        shape("first weight block", (a.reservoir + 1) * a.hidden, self.head.w1.len())?;
        shape("second weight block", (a.hidden + 1) * a.classes, self.head.w2.len())?;
        crate::chaos::validate_params(self.spec.kind, &self.spec.params)?;
        Ok(())
    }

    pub fn projector(&self, mode: ProjectionMode) -> Result<Projector> {
        Projector::new(&self.spec, self.arch.inputs, self.arch.reservoir, mode)
    }

    /// `S_h` for a raw (unnormalized) feature vector.
    pub fn reservoir_output(&self, projector: &Projector, d: &[f64]) -> Result<Vec<f64>> {
        let y = self.input_scaler.normalize(d)?;
        let s = projector.project(&y)?;
        self.reservoir_scaler.apply(&s)
    }

    /// Class and softmax scores for a raw feature vector.
    pub fn classify_with(&self, projector: &Projector, d: &[f64]) -> Result<(usize, Vec<f64>)> {
        let s_h = self.reservoir_output(projector, d)?;
        let f = self.head.forward(&s_h)?;
        Ok((f.class, f.scores))
    }

    fn check_schema(&self, schema: &Schema) -> Result<()> {
        if schema.n_features() != self.arch.inputs || schema.n_classes() != self.arch.classes {
            return Err(Error::SchemaMismatch(format!(
                "model {} expects {} features and {} classes, dataset `{}` has {} and {}",
                self.arch,
                self.arch.inputs,
                self.arch.classes,
                schema.id,
                schema.n_features(),
                schema.n_classes()
            )));
        }
        if !self.meta.schema_id.is_empty() && self.meta.schema_id != schema.id {
            return Err(Error::SchemaMismatch(format!(
                "model was trained on `{}`, dataset is `{}`",
                self.meta.schema_id, schema.id
            )));
        }
        Ok(())
    }
}

/// Training data prepared once and reused across map parameters: the input
/// scaler is calibrated, inputs are normalized and the balanced order fixed.
#[derive(Clone, Debug)]
pub struct TrainingContext {
    pub arch: Architecture,
    pub schema: Schema,
    pub input_scaler: InputScaler,
    normalized: Vec<Vec<f64>>,
    labels: Vec<usize>,
    order: Vec<usize>,
}

impl TrainingContext {
    pub fn new(train: &Dataset, arch: Architecture, mode: ScaleMode) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if train.schema.n_features() != arch.inputs {
            return Err(Error::SchemaMismatch(format!(
                "architecture {arch} expects {} features, dataset `{}` has {}",
                arch.inputs,
                train.schema.id,
                train.schema.n_features()
            )));
        }
        let labels = train.labels();
        if let Some(&bad) = labels.iter().find(|&&l| l >= arch.classes) {
            return Err(Error::Config(format!("label {bad} out of range for {arch}")));
        }
        let input_scaler = InputScaler::calibrate(
            arch.inputs,
            train.records.iter().map(|r| r.features.as_slice()),
            mode,
        )?;
        let normalized = train
            .records
            .iter()
            .map(|r| input_scaler.normalize(&r.features))
            .collect::<Result<Vec<_>>>()?;
        let order = balance_indices(&labels)?;
        Ok(TrainingContext {
            arch,
            schema: train.schema.clone(),
            input_scaler,
            normalized,
            labels,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Length of the balanced sequence fed to the head.
    pub fn balanced_len(&self) -> usize {
        self.order.len()
    }

    /// Trains a model for `spec` and evaluates it on the (unbalanced)
    /// training set, which doubles as the validation set.
    pub fn train(&self, spec: &MapSpec, cfg: &TrainConfig) -> Result<(Model, MetricsReport)> {
        cfg.validate()?;
        let a = self.arch;
        let w = reservoir::fill_matrix(spec, a.inputs, a.reservoir)?;
        let raw = self
            .normalized
            .iter()
            .map(|y| reservoir::project(&w, y))
            .collect::<Result<Vec<_>>>()?;
        let reservoir_scaler = ReservoirScaler::calibrate(a.reservoir, raw.iter().map(Vec::as_slice))?;
        let s_h = raw
            .iter()
            .map(|s| reservoir_scaler.apply(s))
            .collect::<Result<Vec<_>>>()?;
        let sequence: Vec<(&[f64], usize)> =
            self.order.iter().map(|&i| (s_h[i].as_slice(), self.labels[i])).collect();
        let head = head::fit(&sequence, a.hidden, a.classes, cfg)?;
        let predictions = s_h
            .iter()
            .map(|x| head.classify(x))
            .collect::<Result<Vec<_>>>()?;
        let cm = ConfusionMatrix::from_predictions(a.classes, &self.labels, &predictions)?;
        let report = cm.metrics()?;
        let model = Model {
            arch: a,
            spec: spec.clone(),
            input_scaler: self.input_scaler.clone(),
            reservoir_scaler,
            head,
            meta: ModelMeta { schema_id: self.schema.id.clone(), seed: cfg.seed, trained_unix: 0 },
        };
        Ok((model, report))
    }
}

/// Full training flow for one fixed map spec. Returns the model and its
/// metrics on the training set.
pub fn train_model(
    train: &Dataset,
    arch: Architecture,
    spec: &MapSpec,
    cfg: &TrainConfig,
) -> Result<(Model, MetricsReport)> {
    TrainingContext::new(train, arch, ScaleMode::default())?.train(spec, cfg)
}

/// Classifies every test record with the frozen model (materialized
/// reservoir). The test set is never balanced.
pub fn test_model(model: &Model, test: &Dataset) -> Result<MetricsReport> {
    let (truth, predicted) = predict_dataset(model, test)?;
    ConfusionMatrix::from_predictions(model.arch.classes, &truth, &predicted)?.metrics()
}

/// Ground truth and predicted labels for a dataset.
pub fn predict_dataset(model: &Model, test: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    model.check_schema(&test.schema)?;
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let projector = model.projector(ProjectionMode::Materialized)?;
    let predicted = test
        .records
        .par_iter()
        .map(|r| model.classify_with(&projector, &r.features).map(|(c, _)| c))
        .collect::<Result<Vec<_>>>()?;
    Ok((test.labels(), predicted))
}

/// Classifies one patient vector using the streaming reservoir. Missing or
/// out-of-domain coordinates are rejected with the list of offending features.
pub fn predict_patient(model: &Model, schema: &Schema, v: &[Option<f64>]) -> Result<Prediction> {
    model.check_schema(schema)?;
    let d = data::validate_vector(schema, v).map_err(Error::InvalidVector)?;
    let projector = model.projector(ProjectionMode::Streaming)?;
    let (class, scores) = model.classify_with(&projector, &d)?;
    Ok(Prediction { class, label: schema.classes[class].clone(), scores })
}
