//! Classification metrics and evaluation protocols.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::test_model;
use crate::search::{self, Experiment, Trained};

/// `M x M` counts; rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        crate::error::check_len("confusion matrix", classes * classes, counts.len())?;
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        crate::error::check_len("predictions", truth.len(), predicted.len())?;
        let mut cm = ConfusionMatrix::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::Config(format!("label {} out of range", t.max(p))));
            }
            cm.record(t, p);
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|j| self.get(k, j)).sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, k)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    /// Accuracy and per-class precision, recall and F1.
    pub fn metrics(&self) -> Result<MetricsReport> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        let ratio = |num: u64, den: u64| if den == 0 { (0.0, false) } else { (num as f64 / den as f64, true) };
        let classes = (0..self.classes)
            .map(|k| {
                let tp = self.get(k, k);
                let (precision, precision_defined) = ratio(tp, self.col_sum(k));
                let (recall, recall_defined) = ratio(tp, self.row_sum(k));
                let f1_defined = precision + recall > 0.0;
                let f1 = if f1_defined {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: self.row_sum(k),
                    precision_defined,
                    recall_defined,
                    f1_defined,
                }
            })
            .collect();
        Ok(MetricsReport {
            accuracy: self.trace() as f64 / total as f64,
            classes,
            total,
            confusion: Some(self.clone()),
            folds: Vec::new(),
            warnings: Vec::new(),
        })
    }
}

/// Per-class metrics. Zero denominators give 0 with the matching
/// `*_defined` flag cleared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub classes: Vec<ClassMetrics>,
    /// Number of evaluated examples.
    pub total: u64,
    /// Present for single evaluations; absent for fold averages.
    pub confusion: Option<ConfusionMatrix>,
    /// Per-fold reports when this is a K-fold average.
    pub folds: Vec<MetricsReport>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    /// Unweighted mean over folds. A class metric counts as defined only if
    /// it is defined in every fold.
    pub fn mean_of(folds: Vec<MetricsReport>) -> Result<MetricsReport> {
        let n = folds.len();
        let first = folds.first().ok_or(Error::Empty("fold list"))?;
        let m = first.classes.len();
        let mean = |f: &dyn Fn(&MetricsReport) -> f64| folds.iter().map(f).sum::<f64>() / n as f64;
        let classes = (0..m)
            .map(|k| ClassMetrics {
                precision: mean(&|r| r.classes[k].precision),
                recall: mean(&|r| r.classes[k].recall),
                f1: mean(&|r| r.classes[k].f1),
                support: folds.iter().map(|r| r.classes[k].support).sum(),
                precision_defined: folds.iter().all(|r| r.classes[k].precision_defined),
                recall_defined: folds.iter().all(|r| r.classes[k].recall_defined),
                f1_defined: folds.iter().all(|r| r.classes[k].f1_defined),
            })
            .collect();
        Ok(MetricsReport {
            accuracy: mean(&|r| r.accuracy),
            classes,
            total: folds.iter().map(|r| r.total).sum(),
            confusion: None,
            warnings: folds.iter().flat_map(|r| r.warnings.clone()).collect(),
            folds,
        })
    }
}

/// Splits indices into `k` stratified folds.
///
/// Each class is shuffled with the seeded generator and dealt round-robin
/// into the folds; the dealing position carries over between classes so fold
/// sizes differ by at most one.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("K-fold needs K >= 2, got {k}")));
    }
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (label, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::Config(format!(
                "class {label} has {} examples; {k}-fold stratification needs at least {k}, \
                 otherwise some training split would lack the class",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut members in by_class {
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// K-fold result with each fold's trained parameters.
#[derive(Clone, Debug)]
pub struct KFoldOutcome {
    pub report: MetricsReport,
    pub fold_params: Vec<Vec<f64>>,
}

/// K-fold cross-validation for datasets without a predefined split. Each
/// training split is balanced (and searched, if enabled) independently; the
/// held-out fold is classified untouched.
pub fn kfold_evaluate(
    dataset: &Dataset,
    k: usize,
    exp: &Experiment,
    fold_seed: u64,
) -> Result<KFoldOutcome> {
    let folds = stratified_folds(&dataset.labels(), k, fold_seed)?;
    let mut reports = Vec::with_capacity(k);
    let mut fold_params = Vec::with_capacity(k);
    for test_idx in &folds {
        let held: HashSet<usize> = test_idx.iter().copied().collect();
        let train_idx: Vec<usize> = (0..dataset.len()).filter(|i| !held.contains(i)).collect();
        let train = dataset.subset(&train_idx);
        let test = dataset.subset(test_idx);
        let trained = search::train_experiment(&train, exp)?;
        reports.push(test_model(&trained.model, &test)?);
        fold_params.push(trained.model.spec.params.clone());
    }
    Ok(KFoldOutcome { report: MetricsReport::mean_of(reports)?, fold_params })
}

/// Holdout result: test metrics plus the trained model and search trace.
#[derive(Clone, Debug)]
pub struct HoldoutOutcome {
    pub report: MetricsReport,
    pub trained: Trained,
}

/// Train on `train`, test once on `test`. Records that share a source row id
/// across the two sets are reported as a warning.
pub fn holdout_evaluate(train: &Dataset, test: &Dataset, exp: &Experiment) -> Result<HoldoutOutcome> {
    let trained = search::train_experiment(train, exp)?;
    let mut report = test_model(&trained.model, test)?;
    let ids: HashSet<u64> = train.records.iter().filter_map(|r| r.row_id).collect();
    let overlap = test.records.iter().filter_map(|r| r.row_id).filter(|id| ids.contains(id)).count();
    if overlap > 0 {
        report.warnings.push(format!("{overlap} test record id(s) also present in the training set"));
    }
    Ok(HoldoutOutcome { report, trained })
}

/// Renders rows shaped like the usual results table:
/// model, overall accuracy in percent, then precision, recall and F1 per class.
pub fn render_table(title: &str, class_names: &[String], rows: &[(String, &MetricsReport)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.len()).chain([title.len(), 5]).max().unwrap_or(5);
    let m = class_names.len();
    let col_w = class_names.iter().map(String::len).max().unwrap_or(1).max(5);
    let mut out = String::new();
    let _ = write!(out, "{title:<name_w$}  {:>8}", "A, %");
    for group in ["Precision", "Recall", "F1"] {
        let span = m * (col_w + 1);
        let _ = write!(out, " |{group:^span$}");
    }
    out.push('\n');
    let _ = write!(out, "{:<name_w$}  {:>8}", "", "");
    for _ in 0..3 {
        out.push_str(" |");
        for c in class_names {
            let _ = write!(out, " {c:>col_w$}");
        }
    }
    out.push('\n');
    for (name, r) in rows {
        let _ = write!(out, "{name:<name_w$}  {:>8.3}", r.accuracy * 100.0);
        for pick in [
            (|c: &ClassMetrics| c.precision) as fn(&ClassMetrics) -> f64,
            |c| c.recall,
            |c| c.f1,
        ] {
            out.push_str(" |");
            for k in 0..m {
                match r.classes.get(k) {
                    Some(c) => {
                        let _ = write!(out, " {:>col_w$.3}", pick(c));
                    }
                    None => {
                        let _ = write!(out, " {:>col_w$}", "-");
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}
