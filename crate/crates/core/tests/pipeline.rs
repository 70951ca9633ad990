mod common;

use lognnet::chaos::MapKind;
use lognnet::data::{self, DataError, VectorViolation};
use lognnet::eval;
use lognnet::model_io;
use lognnet::pipeline::{self, TrainingContext};
use lognnet::reservoir::{MapSpec, ScaleMode};
use lognnet::search::{self, Experiment, MapParams, SwarmConfig};
use lognnet::{Architecture, Error, Schema, TrainConfig};

fn arch(s: &str) -> Architecture {
    s.parse().unwrap()
}

fn sine() -> MapSpec {
    MapSpec::new(MapKind::Sine, vec![0.3, 1.7]).unwrap()
}

#[test]
fn ctg_export_loads_25_features() {
    let dir = tempfile::tempdir().unwrap();
    let path = common::write_ctg(dir.path(), [40, 12, 8], 1);
    let loaded = data::load_ctg(&path).unwrap();
    assert_eq!(loaded.dataset.len(), 60);
    assert_eq!(loaded.dataset.schema.n_features(), 25);
    assert_eq!(loaded.dataset.class_counts(), [40, 12, 8]);
    let tendencies: Vec<f64> = loaded.dataset.records.iter().map(|r| r.features[24]).collect();
    assert!(tendencies.contains(&-1.0) && tendencies.contains(&1.0));
}

#[test]
fn ctg_missing_cell_is_dropped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let path = common::write_ctg(dir.path(), [5, 5, 5], 2);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[3].split(',').map(String::from).collect();
    cells[2 + 8] = String::new(); // MSTV
    lines[3] = cells.join(",");
    lines[5] = lines[5].rsplitn(2, ',').nth(1).unwrap().to_string() + ",7";
    std::fs::write(&path, lines.join("\n")).unwrap();
    let loaded = data::load_ctg(&path).unwrap();
    assert_eq!(loaded.dataset.len(), 13);
    assert_eq!(loaded.report.dropped.len(), 2);
    assert!(loaded.report.dropped[0].reason.to_ascii_uppercase().contains("MSTV"));
    assert!(loaded.report.dropped[1].reason.contains("unknown label"));
}

#[test]
fn ctg_without_dr_column_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = common::write_ctg(dir.path(), [3, 3, 3], 3);
    let text = std::fs::read_to_string(&path).unwrap().replacen(",DR,", ",XX,", 1);
    std::fs::write(&path, text).unwrap();
    match data::load_ctg(&path) {
        Err(DataError::MissingColumns(cols)) => assert_eq!(cols, ["DR"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn semicolon_exports_are_detected() {
    let dir = tempfile::tempdir().unwrap();
    let path = common::write_ctg(dir.path(), [4, 4, 4], 4);
    let text = std::fs::read_to_string(&path).unwrap().replace(',', ";");
    std::fs::write(&path, text).unwrap();
    assert_eq!(data::load_ctg(&path).unwrap().dataset.len(), 12);
}

#[test]
fn separable_toy_reaches_full_fitness() {
    let d = common::separable(80, 1);
    let cfg = TrainConfig { epochs: 200, learning_rate: 0.5, ..TrainConfig::default() };
    let f = search::fitness_of(&d, arch("3:8:4:2"), MapKind::Logistic, &[0.2, 3.9], &cfg);
    assert_eq!(f, 1.0);
    let again = search::fitness_of(&d, arch("3:8:4:2"), MapKind::Logistic, &[0.2, 3.9], &cfg);
    assert_eq!(f, again);
}

#[test]
fn divergent_map_scores_zero() {
    let d = common::separable(20, 2);
    // From x0 = -1 the logistic orbit squares its way to -inf within a few dozen steps.
    let f = search::fitness_of(&d, arch("3:8:4:2"), MapKind::Logistic, &[-1.0, 4.0], &TrainConfig::default());
    assert_eq!(f, 0.0);
    let out_of_box = search::fitness_of(&d, arch("3:8:4:2"), MapKind::Logistic, &[0.2, 9.0], &TrainConfig::default());
    assert_eq!(out_of_box, 0.0);
}

#[test]
fn search_then_final_training() {
    let d = common::separable(60, 3);
    let exp = Experiment {
        arch: arch("3:6:4:2"),
        kind: MapKind::Sine,
        params: MapParams::Search(SwarmConfig { particles: 4, iterations: 3, fitness_epochs: Some(5), ..SwarmConfig::default() }),
        train: TrainConfig { epochs: 40, learning_rate: 0.3, ..TrainConfig::default() },
        scale: ScaleMode::MaxAbs,
    };
    let t = search::train_experiment(&d, &exp).unwrap();
    let s = t.search.as_ref().unwrap();
    assert_eq!(s.trace.len(), 12);
    assert_eq!(t.model.spec.params, s.best);
    assert!(t.train_report.accuracy >= 0.9);
    let jsonl = s.trace_jsonl();
    assert_eq!(jsonl.lines().count(), 12);
    let first: search::TraceRecord = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!((first.iteration, first.particle), (0, 0));
}

#[test]
fn kfold_on_ctg_shaped_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = data::load_ctg(common::write_ctg(dir.path(), [60, 20, 15], 5)).unwrap().dataset;
    let exp = Experiment {
        arch: arch("25:20:8:3"),
        kind: MapKind::Henon1,
        params: MapParams::Fixed(vec![0.5, 0.3, 1.4, 0.3]),
        train: TrainConfig { epochs: 30, ..TrainConfig::default() },
        scale: ScaleMode::MaxAbs,
    };
    let out = eval::kfold_evaluate(&d, 5, &exp, 9).unwrap();
    assert_eq!(out.report.folds.len(), 5);
    // Every record is tested exactly once and never balanced.
    assert_eq!(out.report.total, 95);
    let supports: Vec<u64> = out.report.classes.iter().map(|c| c.support).collect();
    assert_eq!(supports, [60, 20, 15]);
    assert!(out.report.accuracy > 0.5);
    let table = eval::render_table("25:20:8:3", &d.schema.classes, &[("LogNNet/Henon1".into(), &out.report)]);
    assert!(table.contains("LogNNet/Henon1"));
}

#[test]
fn kfold_needs_k_examples_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = data::load_ctg(common::write_ctg(dir.path(), [20, 20, 3], 6)).unwrap().dataset;
    let exp = Experiment {
        arch: arch("25:10:4:3"),
        kind: MapKind::Logistic,
        params: MapParams::Fixed(vec![0.2, 3.9]),
        train: TrainConfig::default(),
        scale: ScaleMode::MaxAbs,
    };
    assert!(matches!(eval::kfold_evaluate(&d, 5, &exp, 1), Err(Error::Config(_))));
}

#[test]
fn holdout_single_example_and_overlap_warning() {
    let d = common::separable(40, 7);
    let exp = Experiment {
        arch: arch("3:6:4:2"),
        kind: MapKind::Logistic,
        params: MapParams::Fixed(vec![0.2, 3.9]),
        train: TrainConfig { epochs: 20, ..TrainConfig::default() },
        scale: ScaleMode::MaxAbs,
    };
    let one = d.subset(&[3]);
    let r = eval::holdout_evaluate(&d, &one, &exp).unwrap().report;
    assert!(r.accuracy == 0.0 || r.accuracy == 1.0);
    assert_eq!(r.warnings.len(), 1);
    let train = d.subset(&(0..30).collect::<Vec<_>>());
    let test = d.subset(&(30..40).collect::<Vec<_>>());
    assert!(eval::holdout_evaluate(&train, &test, &exp).unwrap().report.warnings.is_empty());
}

#[test]
fn patient_prediction_and_rejections() {
    let s = common::covid();
    let small = s.train.subset(&(0..3000).collect::<Vec<_>>());
    let (model, _) = pipeline::train_model(&small, arch("8:6:4:2"), &sine(), &TrainConfig { epochs: 5, ..TrainConfig::default() }).unwrap();
    let schema = Schema::covid();
    let p = pipeline::predict_patient(&model, &schema, &[Some(0.0); 8]).unwrap();
    assert_eq!(p.label, schema.classes[p.class]);
    assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let mut v = [Some(0.0); 8];
    v[3] = Some(2.0);
    v[5] = None;
    match pipeline::predict_patient(&model, &schema, &v) {
        Err(Error::InvalidVector(vs)) => {
            assert_eq!(vs.len(), 2);
            assert!(matches!(&vs[0], VectorViolation::Missing { .. } | VectorViolation::Domain { .. }));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(pipeline::predict_patient(&model, &Schema::ctg(), &[Some(0.0); 25]), Err(Error::SchemaMismatch(_))));
}

#[test]
fn streaming_and_materialized_predictions_agree() {
    let s = common::covid();
    let small = s.train.subset(&(0..2000).collect::<Vec<_>>());
    let (model, _) = pipeline::train_model(&small, arch("8:6:4:2"), &sine(), &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let test = s.test.subset(&(0..500).collect::<Vec<_>>());
    let (_, batch) = pipeline::predict_dataset(&model, &test).unwrap();
    for (r, &b) in test.records.iter().zip(&batch) {
        let v: Vec<Option<f64>> = r.features.iter().map(|&x| Some(x)).collect();
        assert_eq!(pipeline::predict_patient(&model, &Schema::covid(), &v).unwrap().class, b);
    }
}

#[test]
fn saved_model_reproduces_metrics() {
    let s = common::covid();
    let small = s.train.subset(&(0..4000).collect::<Vec<_>>());
    let (model, _) = pipeline::train_model(&small, arch("8:6:4:2"), &sine(), &TrainConfig { epochs: 5, ..TrainConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("covid.lgnn");
    model_io::save(&model, &path).unwrap();
    let loaded = model_io::load(&path).unwrap();
    let test = s.test.subset(&(0..5000).collect::<Vec<_>>());
    let a = pipeline::test_model(&model_io::quantized_model(&model).unwrap(), &test).unwrap();
    let b = pipeline::test_model(&loaded, &test).unwrap();
    assert_eq!(a.confusion, b.confusion);
    assert_eq!(model_io::weight_payload_len(model.arch), 76);
}

#[test]
fn training_context_shapes() {
    let s = common::covid();
    let small = s.train.subset(&(0..1000).collect::<Vec<_>>());
    let ctx = TrainingContext::new(&small, arch("8:6:4:2"), ScaleMode::MaxAbs).unwrap();
    assert_eq!(ctx.len(), 1000);
    assert_eq!(ctx.balanced_len() % 2, 0);
    assert!(TrainingContext::new(&small, arch("9:6:4:2"), ScaleMode::MaxAbs).is_err());
}
