use lognnet::budget::{self, Algorithm};
use lognnet::chaos::{self, MapKind, Orbit};
use lognnet::data::{BinaryColumn, CovidColumns};
use lognnet::eval::{self, ConfusionMatrix};
use lognnet::head::HeadWeights;
use lognnet::model_io;
use lognnet::pipeline::{self, ModelMeta};
use lognnet::reservoir::{self, InputScaler, MapSpec, ReservoirScaler, ScaleMode};
use lognnet::{Architecture, Model};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = MapKind> {
    prop::sample::select(MapKind::ALL.to_vec())
}

/// A parameter vector inside the kind's limits.
fn spec() -> impl Strategy<Value = MapSpec> {
    kind().prop_flat_map(|k| {
        let ranges: Vec<_> = k.limits().iter().map(|l| l.lo..=l.hi).collect();
        ranges.prop_map(move |p| MapSpec::unchecked(k, p))
    })
}

fn arch() -> impl Strategy<Value = Architecture> {
    (1usize..40, 1usize..60, 1usize..30, 2usize..6).prop_map(|(n, p, h, m)| Architecture::new(n, p, h, m).unwrap())
}

fn confusion() -> impl Strategy<Value = ConfusionMatrix> {
    (2usize..5).prop_flat_map(|m| {
        prop::collection::vec(0u64..50, m * m)
            .prop_filter("non-empty", |c| c.iter().sum::<u64>() > 0)
            .prop_map(move |c| ConfusionMatrix::from_counts(m, c).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn orbit_prefix_is_stable(s in spec(), a in 0usize..50, b in 0usize..50) {
        let (short, long) = (a.min(b), a.max(b));
        match (chaos::orbit(s.kind, &s.params, short), chaos::orbit(s.kind, &s.params, long)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(&x[..], &y[..short]),
            (Ok(x), Err(chaos::OrbitError::Diverged { index, partial, .. })) => {
                prop_assert!(index >= short);
                prop_assert_eq!(&x[..], &partial[..short]);
            }
            (Err(e), _) => {
                let expected = matches!(e, chaos::OrbitError::NoScalarOrbit(_) | chaos::OrbitError::Diverged { .. });
                prop_assert!(expected, "{}", e);
            }
            (Ok(_), Err(e)) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn iterator_matches_orbit(s in spec(), n in 1usize..40) {
        if let Ok(o) = chaos::orbit(s.kind, &s.params, n) {
            let it: Vec<f64> = Orbit::new(s.kind, &s.params).unwrap().take(n).collect();
            prop_assert_eq!(o, it);
        }
    }

    #[test]
    fn logistic_stays_in_unit_interval(x0 in 0.0f64..=1.0, r in 1.0f64..=4.0) {
        for x in chaos::orbit(MapKind::Logistic, &[x0, r], 200).unwrap() {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn streaming_equals_materialized(s in spec(), n in 1usize..12, p in 1usize..12, seed in any::<u64>()) {
        let mut y = vec![1.0];
        y.extend((0..n).map(|i| ((seed >> (i % 60)) & 0xff) as f64 / 255.0));
        let a = reservoir::fill_matrix(&s, n, p).and_then(|w| reservoir::project(&w, &y));
        let b = reservoir::project_streaming(&s, &y, p);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let (a, b): (Vec<u64>, Vec<u64>) = (a.iter().map(|v| v.to_bits()).collect(), b.iter().map(|v| v.to_bits()).collect());
                prop_assert_eq!(a, b);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn projection_is_linear(n in 1usize..10, p in 1usize..10, y in prop::collection::vec(-1.0f64..1.0, 10), z in prop::collection::vec(-1.0f64..1.0, 10), c in -3.0f64..3.0) {
        let s = MapSpec::new(MapKind::Sine, vec![0.3, 1.7]).unwrap();
        let w = reservoir::fill_matrix(&s, n, p).unwrap();
        let (y, z) = (&y[..=n], &z[..=n]);
        let mix: Vec<f64> = y.iter().zip(z).map(|(a, b)| a + c * b).collect();
        let (py, pz, pm) = (reservoir::project(&w, y).unwrap(), reservoir::project(&w, z).unwrap(), reservoir::project(&w, &mix).unwrap());
        for j in 0..p {
            prop_assert!((pm[j] - (py[j] + c * pz[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn balancing_invariants(labels in prop::collection::vec(0usize..4, 1..200)) {
        let order = pipeline::balance_indices(&labels).unwrap();
        let mut present: Vec<usize> = labels.clone();
        present.sort_unstable();
        present.dedup();
        let max = (0..4).map(|c| labels.iter().filter(|&&l| l == c).count()).max().unwrap();
        prop_assert_eq!(order.len(), max * present.len());
        for &c in &present {
            prop_assert_eq!(order.iter().filter(|&&i| labels[i] == c).count(), max);
        }
        // Every original example is used at least once.
        let mut seen = vec![false; labels.len()];
        for &i in &order { seen[i] = true; }
        prop_assert!(seen.iter().all(|&s| s));
        // Consecutive blocks hold one example of each present class.
        for block in order.chunks(present.len()) {
            let ls: Vec<usize> = block.iter().map(|&i| labels[i]).collect();
            prop_assert_eq!(&ls, &present);
        }
    }

    #[test]
    fn metric_totals(cm in confusion()) {
        let r = cm.metrics().unwrap();
        prop_assert_eq!(r.total, cm.total());
        prop_assert_eq!(r.classes.iter().map(|c| c.support).sum::<u64>(), cm.total());
        let weighted: f64 = r.classes.iter().map(|c| c.recall * c.support as f64).sum::<f64>() / cm.total() as f64;
        prop_assert!((weighted - r.accuracy).abs() < 1e-12);
        for c in &r.classes {
            prop_assert!((0.0..=1.0).contains(&c.precision) && (0.0..=1.0).contains(&c.recall) && (0.0..=1.0).contains(&c.f1));
        }
    }

    #[test]
    fn folds_partition_and_stratify(labels in prop::collection::vec(0usize..3, 30..150), k in 2usize..6, seed in any::<u64>()) {
        match eval::stratified_folds(&labels, k, seed) {
            Ok(folds) => {
                prop_assert_eq!(folds.len(), k);
                let mut all: Vec<usize> = folds.concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                for c in 0..3 {
                    let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == c).count()).collect();
                    prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
                }
                prop_assert_eq!(folds, eval::stratified_folds(&labels, k, seed).unwrap());
            }
            Err(_) => {
                let short = (0..3).any(|c| {
                    let n = labels.iter().filter(|&&l| l == c).count();
                    n > 0 && n < k
                });
                prop_assert!(short);
            }
        }
    }

    #[test]
    fn budget_identities(a in arch()) {
        let b = budget::estimate(a);
        prop_assert_eq!(b.alg2 - b.alg1, ((a.inputs + 1) * a.reservoir * 4) as u64);
        prop_assert_eq!(b.saving, b.alg2 - b.alg1);
        let bigger = Architecture::new(a.inputs, a.reservoir + 1, a.hidden, a.classes).unwrap();
        prop_assert!(budget::estimate(bigger).alg1 > b.alg1);
        prop_assert!(budget::estimate(bigger).alg2 > b.alg2);
        let fit = budget::fits(a, b.alg1, Algorithm::Alg1).unwrap();
        prop_assert!(fit.fits && fit.headroom == 0);
        prop_assert!(!budget::fits(a, b.alg1 - 1, Algorithm::Alg1).unwrap().fits);
    }

    #[test]
    fn quantization_error_bound(w in prop::collection::vec(-50.0f64..50.0, 1..100)) {
        let q = model_io::quantize(&w).unwrap();
        for (a, b) in w.iter().zip(model_io::dequantize(&q)) {
            prop_assert!((a - b).abs() <= q.scale / 2.0 + 1e-12 * a.abs());
        }
        // Quantizing again is the identity on the grid.
        let again = model_io::quantize(&model_io::dequantize(&q)).unwrap();
        prop_assert_eq!(again.values, q.values);
    }

    #[test]
    fn encoding_is_deterministic_and_round_trips(s in spec(), a in arch(), seed in any::<u64>()) {
        let s = if s.kind == MapKind::SineLogistic { s } else { MapSpec::new(s.kind, s.params).unwrap() };
        let model = Model {
            arch: a,
            spec: s,
            input_scaler: InputScaler { divisors: vec![2.0; a.inputs], mode: ScaleMode::MaxAbs },
            reservoir_scaler: ReservoirScaler { divisors: vec![3.0; a.reservoir] },
            head: HeadWeights::seeded(a.reservoir + 1, a.hidden, a.classes, seed),
            meta: ModelMeta { schema_id: "toy".into(), seed, trained_unix: 1_600_000_000 },
        };
        let bytes = model_io::encode(&model).unwrap();
        prop_assert_eq!(&bytes, &model_io::encode(&model).unwrap());
        let back = model_io::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &model_io::quantized_model(&model).unwrap());
        prop_assert_eq!(model_io::encode(&back).unwrap(), bytes);
    }

    #[test]
    fn binary_vocabulary_round_trips(bits in prop::collection::vec(0u8..2, 8)) {
        let cols = CovidColumns::default();
        for (c, &bit) in cols.features.iter().zip(&bits) {
            prop_assert_eq!(c.encode(c.decode(bit)), Some(bit));
            prop_assert_eq!(c.encode(&c.decode(bit).to_ascii_uppercase()), Some(bit));
        }
        prop_assert_eq!(cols.result.encode(cols.result.decode(bits[0])), Some(bits[0]));
        let col = BinaryColumn { column: "x".into(), one: vec!["t".into()], zero: vec!["f".into()] };
        prop_assert_eq!(col.encode(" T "), Some(1));
        prop_assert_eq!(col.encode("maybe"), None);
    }
}
