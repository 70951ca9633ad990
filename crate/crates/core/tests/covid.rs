mod common;

use std::collections::HashMap;

use lognnet::data::{self, CovidColumns, Schema};
use lognnet::eval::ConfusionMatrix;
use lognnet::pipeline;

#[test]
fn split_counts() {
    let s = common::covid();
    assert_eq!(s.train.len(), 46_872);
    assert_eq!(s.train.class_counts(), [42_998, 3_874]);
    assert_eq!(s.test.len(), 43_916);
    assert_eq!(s.test.class_counts(), [40_546, 3_370]);
    assert_eq!(s.report.loaded + s.report.dropped.len(), s.report.source_rows);
    assert_eq!(s.report.dropped.len(), 900);
}

#[test]
fn drop_reasons_are_reported() {
    let s = common::covid();
    let reasons: Vec<&str> = s.report.dropped.iter().map(|d| d.reason.as_str()).collect();
    assert!(reasons.iter().any(|r| r.starts_with("missing ")));
    assert!(reasons.iter().any(|r| r.starts_with("indeterminate result")));
    assert!(reasons.iter().any(|r| r.contains("outside train/test windows")));
}

#[test]
fn every_value_is_binary() {
    let s = common::covid();
    for r in s.train.records.iter().chain(&s.test.records) {
        assert!(r.features.iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

#[test]
fn reload_is_identical() {
    let a = common::covid();
    let b = common::covid();
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
}

#[test]
fn all_negative_baseline() {
    let s = common::covid();
    let truth = s.test.labels();
    let cm = ConfusionMatrix::from_predictions(2, &truth, &vec![0; truth.len()]).unwrap();
    let r = cm.metrics().unwrap();
    assert!((r.accuracy - (43_916.0 - 3_370.0) / 43_916.0).abs() < 1e-15);
    assert!((r.accuracy * 100.0 - 92.33).abs() < 0.005);
    assert!(!r.classes[1].precision_defined);
}

/// Best achievable test accuracy for any classifier that is a function of the
/// 8-bit answer vector, by counting the 256 cells of the test split.
#[test]
fn cell_ceiling_leaves_room_above_the_threshold() {
    let s = common::covid();
    let mut cells: HashMap<Vec<u8>, [usize; 2]> = HashMap::new();
    for r in &s.test.records {
        let key: Vec<u8> = r.features.iter().map(|&v| v as u8).collect();
        cells.entry(key).or_default()[r.label] += 1;
    }
    let best: usize = cells.values().map(|c| c[0].max(c[1])).sum();
    let ceiling = best as f64 / s.test.len() as f64;
    assert!(ceiling > 0.94 && ceiling < 0.975, "{ceiling}");
}

#[test]
fn balanced_train_set() {
    let s = common::covid();
    let labels = s.train.labels();
    let order = pipeline::balance_indices(&labels).unwrap();
    assert_eq!(order.len(), 85_996);
    assert_eq!(order.iter().filter(|&&i| labels[i] == 1).count(), 42_998);
}

#[test]
fn column_mapping_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("il.csv");
    std::fs::write(
        &csv,
        "date;sex;old;c;f;t;b;h;why;res\n\
         25/03/2020;F;N;N;N;N;N;N;other;neg\n\
         02/04/2020;M;Y;Y;Y;N;N;N;contact;pos\n\
         02/04/2020;M;Y;Y;?;N;N;N;contact;pos\n",
    )
    .unwrap();
    let mut cols = CovidColumns::default();
    cols.date = "date".into();
    cols.date_format = data::DateFormat::DayFirst;
    cols.result = data::BinaryColumn { column: "res".into(), one: vec!["pos".into()], zero: vec!["neg".into()] };
    let names = ["sex", "old", "c", "f", "t", "b", "h", "why"];
    for (c, name) in cols.features.iter_mut().zip(names) {
        c.column = name.into();
    }
    cols.features[0].one = vec!["M".into()];
    cols.features[0].zero = vec!["F".into()];
    for c in &mut cols.features[1..7] {
        c.one = vec!["Y".into()];
        c.zero = vec!["N".into()];
    }
    cols.features[7].one = vec!["contact".into()];
    cols.features[7].zero = vec!["other".into()];
    let toml_path = dir.path().join("cols.toml");
    std::fs::write(&toml_path, toml::to_string(&cols).unwrap()).unwrap();
    let cols = CovidColumns::from_toml_file(&toml_path).unwrap();
    let s = data::load_covid(&csv, &cols).unwrap();
    assert_eq!(s.train.records[0].features, vec![0.0; 8]);
    assert_eq!(s.train.records[0].label, 0);
    assert_eq!(s.test.records[0].features, [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(s.report.dropped.len(), 1);
    assert_eq!(s.train.schema, Schema::covid());
}

#[test]
fn all_rows_rejected_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(
        &csv,
        "test_date,cough,fever,sore_throat,shortness_of_breath,head_ache,corona_result,age_60_and_above,gender,test_indication\n\
         someday,0,0,0,0,0,negative,No,male,Other\n",
    )
    .unwrap();
    assert!(data::load_covid(&csv, &CovidColumns::default()).is_err());
}
