//! Particle swarm search over chaotic-map parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::MapKind;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::head::TrainConfig;
use crate::pipeline::{Architecture, Model, TrainingContext};
use crate::reservoir::{MapSpec, ScaleMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    /// Stop once the global best reaches this fitness.
    pub target: Option<f64>,
    /// Epochs per fitness evaluation; `None` uses the final training budget.
    pub fitness_epochs: Option<usize>,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            particles: 20,
            iterations: 30,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            seed: 7,
            target: None,
            fitness_epochs: None,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config(format!("swarm needs at least 2 particles, got {}", self.particles)));
        }
        if self.iterations < 1 {
            return Err(Error::Config("swarm needs at least 1 iteration".into()));
        }
        for (name, v) in [("inertia", self.inertia), ("cognitive", self.cognitive), ("social", self.social)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} weight must be positive, got {v}")));
            }
        }
        if self.fitness_epochs == Some(0) {
            return Err(Error::Config("fitness_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub particle: usize,
    pub params: Vec<f64>,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Iterations actually run (early exit may stop short).
    pub iterations: usize,
    /// Global best after each iteration.
    pub best_history: Vec<f64>,
    pub trace: Vec<TraceRecord>,
}

impl SearchResult {
    /// Trace as line-delimited JSON.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace record serializes") + "\n")
            .collect()
    }
}

struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best_f: f64,
}


fn sanitize(f: f64) -> f64 {
    if f.is_nan() { f64::NEG_INFINITY } else { f }
}

/// Reflects `x` into `[lo, hi]`, negating `v` when a wall is hit.
fn reflect(x: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    if hi <= lo {
        *x = lo;
        *v = 0.0;
        return;
    }
    if *x > hi {
        *x = 2.0 * hi - *x;
        *v = -*v;
    } else if *x < lo {
        *x = 2.0 * lo - *x;
        *v = -*v;
    }
    *x = x.clamp(lo, hi);
}

/// Maximizes `objective` over the box `bounds`.
///
/// Synchronous PSO: every particle of an iteration is evaluated (in
/// parallel) before personal and global bests are updated in particle order.
/// Iteration 0 evaluates the random initial swarm. Bests change only on a
/// strictly greater fitness, so ties go to the earlier discovery. NaN
/// fitness counts as worst.
pub fn optimize_box<F>(bounds: &[(f64, f64)], objective: F, cfg: &SwarmConfig) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::Config(format!("invalid search box {bounds:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let range: Vec<f64> = bounds.iter().map(|&(lo, hi)| hi - lo).collect();
    let mut swarm: Vec<Particle> = (0..cfg.particles)
        .map(|_| {
            let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo)).collect();
            let v: Vec<f64> = range.iter().map(|&r| (rng.random::<f64>() * 2.0 - 1.0) * r * 0.5).collect();
            Particle { best_x: x.clone(), x, v, best_f: f64::NEG_INFINITY }
        })
        .collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut best_history = Vec::with_capacity(cfg.iterations);
    let mut trace = Vec::with_capacity(cfg.iterations * cfg.particles);
    let mut iterations = 0;

    for it in 0..cfg.iterations {
        if it > 0 {
            let g = &best.as_ref().expect("global best set after iteration 0").0;
            for p in &mut swarm {
                for d in 0..bounds.len() {
                    let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                    let mut v = cfg.inertia * p.v[d]
                        + cfg.cognitive * r1 * (p.best_x[d] - p.x[d])
                        + cfg.social * r2 * (g[d] - p.x[d]);
                    v = v.clamp(-range[d], range[d]);
                    let mut x = p.x[d] + v;
                    reflect(&mut x, &mut v, bounds[d].0, bounds[d].1);
                    p.x[d] = x;
                    p.v[d] = v;
                }
            }
        }
        let fitness: Vec<f64> = swarm.par_iter().map(|p| sanitize(objective(&p.x))).collect();
        for (i, (p, &f)) in swarm.iter_mut().zip(&fitness).enumerate() {
            trace.push(TraceRecord { iteration: it, particle: i, params: p.x.clone(), fitness: f });
            if f > p.best_f {
                p.best_f = f;
                p.best_x = p.x.clone();
            }
            if best.as_ref().map_or(true, |(_, bf)| f > *bf) {
                best = Some((p.x.clone(), f));
            }
        }
        // All-NaN iteration 0: fall back to the first particle.
        if best.is_none() {
            best = Some((swarm[0].x.clone(), f64::NEG_INFINITY));
        }
        let bf = best.as_ref().map(|b| b.1).unwrap_or(f64::NEG_INFINITY);
        best_history.push(bf);
        iterations = it + 1;
        if cfg.target.is_some_and(|t| bf >= t) {
            break;
        }
    }
    let (best, best_fitness) = best.expect("at least one iteration ran");
    Ok(SearchResult { best, best_fitness, iterations, best_history, trace })
}

/// Searches the parameter box of `kind`. The result's `best` and trace
/// params are full parameter vectors (non-searched slots at defaults).
pub fn optimize<F>(kind: MapKind, objective: F, cfg: &SwarmConfig) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut res = optimize_box(&kind.search_box(), |p| objective(&kind.params_from_search(p)), cfg)?;
    res.best = kind.params_from_search(&res.best);
    for r in &mut res.trace {
        r.params = kind.params_from_search(&r.params);
    }
    Ok(res)
}

/// Training-set accuracy for `spec`; any failure scores 0.
pub fn fitness(ctx: &TrainingContext, spec: &MapSpec, cfg: &TrainConfig) -> f64 {
    ctx.train(spec, cfg).map_or(0.0, |(_, r)| r.accuracy)
}

/// Convenience wrapper around [`fitness`] that builds the context first.
pub fn fitness_of(dataset: &Dataset, arch: Architecture, kind: MapKind, params: &[f64], cfg: &TrainConfig) -> f64 {
    let Ok(ctx) = TrainingContext::new(dataset, arch, ScaleMode::default()) else {
        return 0.0;
    };
    match MapSpec::new(kind, params.to_vec()) {
        Ok(spec) => fitness(&ctx, &spec, cfg),
        Err(_) => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapParams {
    Fixed(Vec<f64>),
    Search(SwarmConfig),
}

/// What to train: architecture, map and how its parameters are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub arch: Architecture,
    pub kind: MapKind,
    pub params: MapParams,
    pub train: TrainConfig,
    #[serde(default)]
    pub scale: ScaleMode,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    /// Metrics on the training set.
    pub train_report: MetricsReport,
    pub search: Option<SearchResult>,
}

/// Runs the search (if any), then trains the final model on the best
/// parameters with the full epoch budget.
pub fn train_experiment(train: &Dataset, exp: &Experiment) -> Result<Trained> {
    exp.train.validate()?;
    let ctx = TrainingContext::new(train, exp.arch, exp.scale)?;
    let (params, search) = match &exp.params {
        MapParams::Fixed(p) => (p.clone(), None),
        MapParams::Search(swarm) => {
            swarm.validate()?;
            let mut fit_cfg = exp.train.clone();
            if let Some(e) = swarm.fitness_epochs {
                fit_cfg.epochs = e;
            }
            let res = optimize(
                exp.kind,
                |p| match MapSpec::new(exp.kind, p.to_vec()) {
                    Ok(spec) => fitness(&ctx, &spec, &fit_cfg),
                    Err(_) => 0.0,
                },
                swarm,
            )?;
            (res.best.clone(), Some(res))
        }
    };
    let spec = MapSpec::new(exp.kind, params)?;
    let (model, train_report) = ctx.train(&spec, &exp.train)?;
    Ok(Trained { model, train_report, search })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(center: &[f64]) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |x| -x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    #[test]
    fn defaults_are_clerc() {
        let c = SwarmConfig::default();
        assert_eq!((c.particles, c.iterations), (20, 30));
        assert_eq!((c.inertia, c.cognitive, c.social), (0.729, 1.49445, 1.49445));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            SwarmConfig { particles: 1, ..Default::default() },
            SwarmConfig { iterations: 0, ..Default::default() },
            SwarmConfig { inertia: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(optimize_box(&[(0.0, 1.0)], |_| 0.0, &c).is_err());
        }
    }

    #[test]
    fn sphere_on_logistic_box() {
        let center = [0.3, 2.5];
        let cfg = SwarmConfig { iterations: 80, ..Default::default() };
        let res = optimize(MapKind::Logistic, sphere(&center), &cfg).unwrap();
        let err: f64 = res.best.iter().zip(&center).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{:?}", res.best);
    }

    #[test]
    fn corner_optimum_reached() {
        // The optimum sits on the box corner; reflection must not stop particles reaching it.
        let center = [1.0, 4.0];
        let cfg = SwarmConfig { iterations: 80, ..Default::default() };
        let res = optimize(MapKind::Logistic, sphere(&center), &cfg).unwrap();
        assert!(res.best_fitness > -1e-6);
    }

    #[test]
    fn constant_objective_single_iteration() {
        let cfg = SwarmConfig { particles: 2, iterations: 1, ..Default::default() };
        let res = optimize_box(&[(0.0, 1.0), (5.0, 6.0)], |_| 0.25, &cfg).unwrap();
        assert_eq!(res.best_fitness, 0.25);
        assert_eq!(res.best, res.trace[0].params);
        assert_eq!(res.trace.len(), 2);
    }

    #[test]
    fn deterministic_and_monotone() {
        let b = MapKind::Henon2.search_box();
        let cfg = SwarmConfig { particles: 6, iterations: 8, ..Default::default() };
        let f = |x: &[f64]| (x[0] * 3.0).sin() + x[2].cos() - x[5];
        let a = optimize_box(&b, f, &cfg).unwrap();
        let c = optimize_box(&b, f, &cfg).unwrap();
        assert_eq!(a, c);
        assert!(a.best_history.windows(2).all(|w| w[1] >= w[0]));
        for r in &a.trace {
            for (x, (lo, hi)) in r.params.iter().zip(&b) {
                assert!(lo <= x && x <= hi);
            }
        }
    }

    #[test]
    fn target_stops_early() {
        let cfg = SwarmConfig { target: Some(-1.0), ..Default::default() };
        let res = optimize_box(&[(0.0, 1.0)], |_| 0.0, &cfg).unwrap();
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn nan_is_worst() {
        let cfg = SwarmConfig { particles: 4, iterations: 3, ..Default::default() };
        let res = optimize_box(&[(0.0, 1.0)], |x| if x[0] < 0.5 { f64::NAN } else { x[0] }, &cfg).unwrap();
        assert!(res.best_fitness >= 0.5);
    }

    #[test]
    fn reflection_stays_inside() {
        let (mut x, mut v) = (1.3, 0.5);
        reflect(&mut x, &mut v, 0.0, 1.0);
        assert!((x - 0.7).abs() < 1e-12);
        assert_eq!(v, -0.5);
        let (mut x, mut v) = (-0.2, -0.4);
        reflect(&mut x, &mut v, 0.0, 1.0);
        assert!((x - 0.2).abs() < 1e-12 && v == 0.4);
    }
}
