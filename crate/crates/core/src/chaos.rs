//! Chaotic maps used to generate reservoir weights.
//!
//! Each [`MapKind`] carries a fixed parameter layout with closed search
//! limits. Parameter vectors are plain `f64` slices ordered as listed by
//! [`MapKind::limits`]. The first entries of every scalar map are the seed
//! state (`x0`, and `y0` for the two-dimensional Henon variants).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default wavelength divisor of the sine-seeded fill rule.
pub const DEFAULT_SINE_DIVISOR: f64 = 784.0;

/// The eight supported maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MapKind {
    /// Sine-seeded first column followed by the logistic recurrence along rows.
    SineLogistic,
    Logistic,
    Sine,
    Gauss,
    TwoSided,
    Plank,
    Henon1,
    Henon2,
}

/// Closed interval for one named parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamLimit {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    /// `false` for configuration constants that the swarm never moves.
    pub searched: bool,
    pub default: Option<f64>,
}

const fn lim(name: &'static str, lo: f64, hi: f64) -> ParamLimit {
    ParamLimit { name, lo, hi, searched: true, default: None }
}

const SINE_LOGISTIC_LIMITS: [ParamLimit; 4] = [
    lim("A", -1.0, 1.0),
    lim("B", 0.1, 10.0),
    lim("r", 0.1, 2.0),
    ParamLimit {
        name: "D",
        lo: f64::MIN_POSITIVE,
        hi: f64::MAX,
        searched: false,
        default: Some(DEFAULT_SINE_DIVISOR),
    },
];
const LOGISTIC_LIMITS: [ParamLimit; 2] = [lim("x0", -1.0, 1.0), lim("r", 1.0, 4.0)];
const SINE_LIMITS: [ParamLimit; 2] = [lim("x0", -1.0, 1.0), lim("r", 0.0, 2.0)];
const GAUSS_LIMITS: [ParamLimit; 3] =
    [lim("x0", -1.0, 1.0), lim("r1", -1.0, 1.0), lim("r2", 3.0, 6.0)];
const TWO_SIDED_LIMITS: [ParamLimit; 2] = [lim("x0", 0.0, 10.0), lim("r", 0.0, 100.0)];
const PLANK_LIMITS: [ParamLimit; 2] = [lim("x0", 0.0, 5.0), lim("r", 0.0, 7.0)];
const HENON1_LIMITS: [ParamLimit; 4] = [
    lim("x0", 0.01, 1.5),
    lim("y0", 0.01, 10.0),
    lim("r1", 0.0, 1.5),
    lim("r2", 0.0, 1.5),
];
const HENON2_LIMITS: [ParamLimit; 6] = [
    lim("x0", 0.01, 1.5),
    lim("y0", 0.01, 10.0),
    lim("r1", 0.0, 1.5),
    lim("r2", 0.0, 1.5),
    lim("r3", 0.0, 1.5),
    lim("r4", 0.0, 1.5),
];

impl MapKind {
    pub const ALL: [MapKind; 8] = [
        MapKind::SineLogistic,
        MapKind::Logistic,
        MapKind::Sine,
        MapKind::Gauss,
        MapKind::TwoSided,
        MapKind::Plank,
        MapKind::Henon1,
        MapKind::Henon2,
    ];

    /// Name used in config files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            MapKind::SineLogistic => "lognnet",
            MapKind::Logistic => "logistic",
            MapKind::Sine => "sine",
            MapKind::Gauss => "gauss",
            MapKind::TwoSided => "2sided",
            MapKind::Plank => "plank",
            MapKind::Henon1 => "henon1",
            MapKind::Henon2 => "henon2",
        }
    }

    /// Display name as used in result tables, e.g. `LogNNet/Sine`.
    pub fn model_name(self) -> &'static str {
        match self {
            MapKind::SineLogistic => "LogNNet",
            MapKind::Logistic => "LogNNet/Logistic",
            MapKind::Sine => "LogNNet/Sine",
            MapKind::Gauss => "LogNNet/Gauss",
            MapKind::TwoSided => "LogNNet/2sided",
            MapKind::Plank => "LogNNet/Plank",
            MapKind::Henon1 => "LogNNet/Henon1",
            MapKind::Henon2 => "LogNNet/Henon2",
        }
    }

    /// Stable numeric id used by the binary model format.
    pub fn id(self) -> u8 {
        match self {
            MapKind::SineLogistic => 0,
            MapKind::Logistic => 1,
            MapKind::Sine => 2,
            MapKind::Gauss => 3,
            MapKind::TwoSided => 4,
            MapKind::Plank => 5,
            MapKind::Henon1 => 6,
            MapKind::Henon2 => 7,
        }
    }

    pub fn from_id(id: u8) -> Option<MapKind> {
        MapKind::ALL.get(usize::from(id)).copied()
    }

    pub fn limits(self) -> &'static [ParamLimit] {
        match self {
            MapKind::SineLogistic => &SINE_LOGISTIC_LIMITS,
            MapKind::Logistic => &LOGISTIC_LIMITS,
            MapKind::Sine => &SINE_LIMITS,
            MapKind::Gauss => &GAUSS_LIMITS,
            MapKind::TwoSided => &TWO_SIDED_LIMITS,
            MapKind::Plank => &PLANK_LIMITS,
            MapKind::Henon1 => &HENON1_LIMITS,
            MapKind::Henon2 => &HENON2_LIMITS,
        }
    }

    pub fn arity(self) -> usize {
        self.limits().len()
    }

    /// Bounds of the dimensions the swarm explores, in parameter order.
    pub fn search_box(self) -> Vec<(f64, f64)> {
        self.limits().iter().filter(|l| l.searched).map(|l| (l.lo, l.hi)).collect()
    }

    /// Expands a point of [`MapKind::search_box`] into a full parameter vector,
    /// filling non-searched slots with their defaults.
    pub fn params_from_search(self, point: &[f64]) -> Vec<f64> {
        let mut it = point.iter();
        self.limits()
            .iter()
            .map(|l| {
                if l.searched {
                    *it.next().expect("search point shorter than search box")
                } else {
                    l.default.unwrap_or(l.lo)
                }
            })
            .collect()
    }

    pub fn is_two_dimensional(self) -> bool {
        matches!(self, MapKind::Henon1 | MapKind::Henon2)
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let lower = lower.strip_prefix("lognnet/").unwrap_or(&lower);
        MapKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| format!("unknown map kind `{s}`"))
    }
}

impl From<MapKind> for String {
    fn from(k: MapKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for MapKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A parameter outside its limits.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub name: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={} outside [{}, {}]", self.name, self.value, self.lo, self.hi)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{kind} expects {expected} parameters, got {got}")]
    Arity { kind: MapKind, expected: usize, got: usize },
    #[error("{kind} parameters out of range: {}", join(.violations))]
    OutOfRange { kind: MapKind, violations: Vec<Violation> },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ParamError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ParamError::OutOfRange { violations, .. } => violations,
            ParamError::Arity { .. } => &[],
        }
    }
}

/// Checks arity first, then every value against its closed interval.
/// Non-finite values are always violations.
pub fn validate_params(kind: MapKind, params: &[f64]) -> Result<(), ParamError> {
    let limits = kind.limits();
    if params.len() != limits.len() {
        return Err(ParamError::Arity { kind, expected: limits.len(), got: params.len() });
    }
    let violations: Vec<Violation> = limits
        .iter()
        .zip(params)
        .filter(|(l, &v)| !(v.is_finite() && v >= l.lo && v <= l.hi))
        .map(|(l, &v)| Violation { name: l.name, value: v, lo: l.lo, hi: l.hi })
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange { kind, violations })
    }
}

/// Map state. `y` only moves for the Henon variants.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MapState {
    pub x: f64,
    pub y: f64,
}

impl MapState {
    pub fn new(x: f64, y: f64) -> Self {
        MapState { x, y }
    }

    pub fn diverged(&self) -> bool {
        !(self.x.is_finite() && self.y.is_finite())
    }
}

/// Seed state encoded in a parameter vector. `None` for the sine-seeded map,
/// which has no single scalar seed.
pub fn seed_state(kind: MapKind, params: &[f64]) -> Option<MapState> {
    match kind {
        MapKind::SineLogistic => None,
        MapKind::Henon1 | MapKind::Henon2 => Some(MapState::new(params[0], params[1])),
        _ => Some(MapState::new(params[0], 0.0)),
    }
}

/// Advances one step. A non-finite successor is returned as is; check
/// [`MapState::diverged`].
///
/// For [`MapKind::SineLogistic`] this is the row recurrence `x' = 1 - r x^2`.
///
/// # Panics
/// If `params` is shorter than the kind's arity.
#[inline]
pub fn step(kind: MapKind, params: &[f64], s: MapState) -> MapState {
    let x = s.x;
    match kind {
        MapKind::SineLogistic => MapState::new(1.0 - params[2] * (x * x), s.y),
        MapKind::Logistic => MapState::new(params[1] * x * (1.0 - x), s.y),
        MapKind::Sine => MapState::new(params[1] * (PI * x).sin(), s.y),
        MapKind::Gauss => MapState::new((-params[2] * (x * x)).exp() + params[1], s.y),
        MapKind::TwoSided => MapState::new(params[1] * x / (1.0 + x * x * x), s.y),
        MapKind::Plank => MapState::new(params[1] * (x * x * x) / (1.0 + x.exp()), s.y),
        MapKind::Henon1 => {
            let (r1, r2) = (params[2], params[3]);
            MapState::new(1.0 - r1 * (x * x) + s.y, r2 * x)
        }
        MapKind::Henon2 => {
            let y = s.y;
            let (r1, r2, r3, r4) = (params[2], params[3], params[4], params[5]);
            MapState::new(x + r1 * (x * x) + r2 * (y * y) - r3 * y * x - r4, x)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("{kind} orbit diverged at index {index}")]
    Diverged { kind: MapKind, index: usize, partial: Vec<f64> },
    #[error("{0} has no scalar orbit")]
    NoScalarOrbit(MapKind),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Iterator over the x component of an orbit, excluding the seed.
#[derive(Clone, Debug)]
pub struct Orbit<'a> {
    kind: MapKind,
    params: &'a [f64],
    state: MapState,
}

impl<'a> Orbit<'a> {
    /// Starts an orbit from the seed stored in `params`. Parameters are not
    /// range-checked here; see [`orbit`] for the validating entry point.
    pub fn new(kind: MapKind, params: &'a [f64]) -> Result<Self, OrbitError> {
        if params.len() != kind.arity() {
            return Err(ParamError::Arity { kind, expected: kind.arity(), got: params.len() }.into());
        }
        let state = seed_state(kind, params).ok_or(OrbitError::NoScalarOrbit(kind))?;
        Ok(Orbit { kind, params, state })
    }
}

impl Iterator for Orbit<'_> {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        self.state = step(self.kind, self.params, self.state);
        Some(self.state.x)
    }
}

/// Returns `x_1..x_length`. Diverging orbits return the finite prefix inside
/// the error together with the 0-based index of the first non-finite value.
pub fn orbit(kind: MapKind, params: &[f64], length: usize) -> Result<Vec<f64>, OrbitError> {
    validate_params(kind, params)?;
    let mut out = Vec::with_capacity(length);
    let mut state = seed_state(kind, params).ok_or(OrbitError::NoScalarOrbit(kind))?;
    for index in 0..length {
        state = step(kind, params, state);
        if state.diverged() {
            return Err(OrbitError::Diverged { kind, index, partial: out });
        }
        out.push(state.x);
    }
    Ok(out)
}
