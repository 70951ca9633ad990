//! Writes the synthetic COVID-19 screening fixture used by the test suite.
//!
//! Records are drawn from a two-component mixture of independent Bernoulli
//! features per class, with exact per-split class counts. A few hundred extra
//! rows carry missing answers, indeterminate results or out-of-window dates
//! so the loader's drop paths are exercised.
//!
//! ```text
//! cargo run -p lognnet --example covid_surrogate -- crates/core/tests/fixtures/covid_surrogate.csv.gz
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};

use chrono::{Duration, NaiveDate};
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Feature order: sex, age 60+, cough, fever, sore throat, shortness of
/// breath, headache, contact with a confirmed case.
type Rates = [f64; 8];

pub struct Mixture {
    pub weight: f64,
    pub main: Rates,
    pub other: Rates,
}

pub const POSITIVE: Mixture = Mixture {
    weight: 0.735,
    main: [0.55, 0.13, 0.60, 0.918, 0.15, 0.10, 0.20, 0.35],
    other: [0.55, 0.13, 0.03, 0.01, 0.01, 0.002, 0.005, 0.02],
};

pub const NEGATIVE: Mixture = Mixture {
    weight: 0.958,
    main: [0.47, 0.13, 0.03, 0.005, 0.01, 0.002, 0.003, 0.012],
    other: [0.47, 0.13, 0.70, 0.207, 0.35, 0.05, 0.20, 0.02],
};

const SEED: u64 = 20_200_322;

struct Split {
    first: NaiveDate,
    days: i64,
    total: usize,
    positive: usize,
}

fn sample(m: &Mixture, rng: &mut impl Rng) -> [bool; 8] {
    let rates = if rng.random::<f64>() < m.weight { &m.main } else { &m.other };
    rates.map(|p| rng.random::<f64>() < p)
}

fn bit(b: bool) -> &'static str {
    if b { "1" } else { "0" }
}

fn row(date: NaiveDate, f: [bool; 8], result: &str, rng: &mut impl Rng) -> [String; 10] {
    let indication = if f[7] {
        "Contact with confirmed"
    } else if rng.random::<f64>() < 0.1 {
        "Abroad"
    } else {
        "Other"
    };
    [
        date.format("%Y-%m-%d").to_string(),
        bit(f[2]).into(),
        bit(f[3]).into(),
        bit(f[4]).into(),
        bit(f[5]).into(),
        bit(f[6]).into(),
        result.into(),
        (if f[1] { "Yes" } else { "No" }).into(),
        (if f[0] { "male" } else { "female" }).into(),
        indication.into(),
    ]
}

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/fixtures/covid_surrogate.csv.gz".into());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let d = |m, day| NaiveDate::from_ymd_opt(2020, m, day).unwrap();
    let splits = [
        Split { first: d(3, 22), days: 10, total: 46_872, positive: 3_874 },
        Split { first: d(4, 1), days: 7, total: 43_916, positive: 3_370 },
    ];

    let mut rows: Vec<[String; 10]> = Vec::new();
    for s in &splits {
        let mut labels: Vec<bool> = (0..s.total).map(|i| i < s.positive).collect();
        labels.shuffle(&mut rng);
        for positive in labels {
            let date = s.first + Duration::days(rng.random_range(0..s.days));
            let f = sample(if positive { &POSITIVE } else { &NEGATIVE }, &mut rng);
            rows.push(row(date, f, if positive { "positive" } else { "negative" }, &mut rng));
        }
    }
    for k in 0..900 {
        let positive = rng.random::<f64>() < 0.08;
        let f = sample(if positive { &POSITIVE } else { &NEGATIVE }, &mut rng);
        let date = d(3, 22) + Duration::days(rng.random_range(0..17));
        let mut r = row(date, f, if positive { "positive" } else { "negative" }, &mut rng);
        match k % 3 {
            0 => r[rng.random_range(1..=5)] = "None".into(),
            1 => r[6] = "other".into(),
            _ => {
                let off = rng.random_range(1..4);
                r[0] = if rng.random() { d(3, 21) - Duration::days(off - 1) } else { d(4, 7) + Duration::days(off) }
                    .format("%Y-%m-%d")
                    .to_string();
            }
        }
        rows.push(r);
    }
    rows.shuffle(&mut rng);
    rows.sort_by(|a, b| b[0].cmp(&a[0]));

    let file = File::create(&out)?;
    let mut w = BufWriter::new(GzEncoder::new(file, Compression::best()));
    writeln!(
        w,
        "test_date,cough,fever,sore_throat,shortness_of_breath,head_ache,corona_result,age_60_and_above,gender,test_indication"
    )?;
    for r in &rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.into_inner().map_err(|e| e.into_error())?.finish()?;
    eprintln!("wrote {} rows to {out}", rows.len());
    Ok(())
}
