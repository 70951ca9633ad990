#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lognnet::data::{self, CovidColumns, CovidSplit};
use lognnet::{Dataset, Record, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn covid() -> CovidSplit {
    data::load_covid(fixture("covid_surrogate.csv.gz"), &CovidColumns::default()).unwrap()
}

pub const CTG_HEADER: [&str; 25] = [
    "b", "e", "LBE", "LB", "AC", "FM", "UC", "ASTV", "MSTV", "ALTV", "MLTV", "DL", "DS", "DP", "DR",
    "Width", "Min", "Max", "Nmax", "Nzeros", "Mode", "Mean", "Median", "Variance", "Tendency",
];

/// One CTG-shaped row whose features drift with the class.
pub fn ctg_row(class: usize, rng: &mut impl Rng) -> Vec<f64> {
    let shift = class as f64;
    let schema = Schema::ctg();
    schema
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let centre = 10.0 + 3.0 * j as f64 + 6.0 * shift * if j % 2 == 0 { 1.0 } else { -0.5 };
            let v = centre + rng.random_range(-4.0..4.0);
            match f.domain {
                data::Domain::Ternary => (class as f64 - 1.0).clamp(-1.0, 1.0),
                data::Domain::Integer => v.round().max(0.0),
                _ => (v / 100.0).max(0.0),
            }
        })
        .collect()
}

/// Writes a CTG-shaped export with identifier columns, an `NSP` label
/// (1/2/3) and class counts `counts`.
pub fn write_ctg(dir: &Path, counts: [usize; 3], seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("FileName,Date,");
    out.push_str(&CTG_HEADER.join(","));
    out.push_str(",CLASS,NSP\n");
    for (class, &n) in counts.iter().enumerate() {
        for k in 0..n {
            let row = ctg_row(class, &mut rng);
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "f{class}_{k}.txt,1/1/1996,{},{},{}", cells.join(","), k % 10 + 1, class + 1);
        }
    }
    let path = dir.join("ctg.csv");
    std::fs::write(&path, out).unwrap();
    path
}

/// Two classes separated by the sign of the first feature.
pub fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema {
        id: "toy".into(),
        features: (0..3)
            .map(|i| data::Feature { name: format!("x{i}"), domain: data::Domain::Real })
            .collect(),
        label: "y".into(),
        classes: vec!["neg".into(), "pos".into()],
    };
    let records = (0..n)
        .map(|i| {
            let label = i % 2;
            let sign = if label == 1 { 1.0 } else { -1.0 };
            let features = vec![sign * rng.random_range(0.5..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            Record { features, label, row_id: Some(i as u64 + 1) }
        })
        .collect();
    Dataset::new(schema, records)
}
