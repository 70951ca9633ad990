//! Reservoir construction and projection.
//!
//! The reservoir is an `(N+1) x P` matrix `W` whose entries come from a
//! chaotic map. It can be stored ([`ReservoirMatrix`], materialized mode) or
//! regenerated entry by entry while projecting ([`project_streaming`]). Both
//! paths perform the same floating-point operations in the same order
//! (ascending row index within each column), so their outputs are bit-identical.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chaos::{self, MapKind, MapState};
use crate::error::{check_len, Error, Result};

/// A chaotic map together with a full parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub kind: MapKind,
    pub params: Vec<f64>,
}

impl MapSpec {
    /// Validated constructor.
    pub fn new(kind: MapKind, params: Vec<f64>) -> Result<Self> {
        chaos::validate_params(kind, &params)?;
        Ok(MapSpec { kind, params })
    }

    /// Builds a spec without range checks. Used when probing points outside
    /// the search box; reservoir operations still report divergence.
    pub fn unchecked(kind: MapKind, params: Vec<f64>) -> Self {
        MapSpec { kind, params }
    }

    fn infeasible(&self, index: usize) -> Error {
        Error::Infeasible { kind: self.kind, params: self.params.clone(), index }
    }

    fn check_arity(&self) -> Result<()> {
        let expected = self.kind.arity();
        if self.params.len() != expected {
            return Err(chaos::ParamError::Arity {
                kind: self.kind,
                expected,
                got: self.params.len(),
            }
            .into());
        }
        Ok(())
    }
}

/// `W[i, 0] = A sin((i / D) (pi / B))`.
#[inline]
fn sine_seed(params: &[f64], i: usize) -> f64 {
    let (a, b, d) = (params[0], params[1], params[3]);
    a * ((i as f64 / d) * (PI / b)).sin()
}

/// Dense reservoir, column-major: entry `(i, j)` lives at `j * rows + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ReservoirMatrix {
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("reservoir entries", rows * cols, data.len())?;
        Ok(ReservoirMatrix { rows, cols, data })
    }

    /// Number of rows, `N + 1`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns, `P`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }
}

/// Fills `W` for `n_inputs` features and `n_outputs` reservoir neurons.
///
/// Scalar and Henon maps are consumed column by column from a single orbit:
/// entry `(i, j)` (0-based) is orbit element `j * (N+1) + i` (0-based, seed
/// excluded). The sine-seeded map fills column 0 from the sine rule and each
/// further column by applying `x -> 1 - r x^2` to the column before it.
pub fn fill_matrix(spec: &MapSpec, n_inputs: usize, n_outputs: usize) -> Result<ReservoirMatrix> {
    spec.check_arity()?;
    let rows = n_inputs + 1;
    let mut data = Vec::with_capacity(rows * n_outputs);
    match spec.kind {
        MapKind::SineLogistic => {
            for i in 0..rows {
                data.push(sine_seed(&spec.params, i));
            }
            for j in 1..n_outputs {
                for i in 0..rows {
                    let prev = data[(j - 1) * rows + i];
                    data.push(chaos::step(spec.kind, &spec.params, MapState::new(prev, 0.0)).x);
                }
            }
            data.truncate(rows * n_outputs);
            if let Some(index) = data.iter().position(|v| !v.is_finite()) {
                return Err(spec.infeasible(index));
            }
        }
        kind => {
            let orbit = chaos::Orbit::new(kind, &spec.params)?;
            for (index, x) in orbit.take(rows * n_outputs).enumerate() {
                if !x.is_finite() {
                    return Err(spec.infeasible(index));
                }
                data.push(x);
            }
        }
    }
    ReservoirMatrix::from_column_major(rows, n_outputs, data)
}

/// `S'[j] = sum_i W[i, j] Y[i]`, accumulated in ascending `i`.
pub fn project(w: &ReservoirMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_len("input vector Y", w.rows, y.len())?;
    Ok((0..w.cols)
        .map(|j| {
            let mut acc = 0.0;
            for (wij, yi) in w.column(j).iter().zip(y) {
                acc += wij * yi;
            }
            acc
        })
        .collect())
}

/// Same result as `project(&fill_matrix(spec, N, P)?, y)` without storing `W`.
///
/// Scalar and Henon maps keep only the current map state. The sine-seeded map
/// keeps one column of `N+1` values, since each entry depends on its left
/// neighbour rather than on the previous orbit element.
pub fn project_streaming(spec: &MapSpec, y: &[f64], n_outputs: usize) -> Result<Vec<f64>> {
    spec.check_arity()?;
    if y.is_empty() {
        return Err(Error::Shape { what: "input vector Y", expected: 1, got: 0 });
    }
    let rows = y.len();
    let mut out = Vec::with_capacity(n_outputs);
    match spec.kind {
        MapKind::SineLogistic => {
            let mut column: Vec<f64> = (0..rows).map(|i| sine_seed(&spec.params, i)).collect();
            for j in 0..n_outputs {
                let mut acc = 0.0;
                for (i, (w, yi)) in column.iter_mut().zip(y).enumerate() {
                    if j > 0 {
                        *w = chaos::step(spec.kind, &spec.params, MapState::new(*w, 0.0)).x;
                    }
                    if !w.is_finite() {
                        return Err(spec.infeasible(j * rows + i));
                    }
                    acc += *w * yi;
                }
                out.push(acc);
            }
        }
        kind => {
            let mut state = chaos::seed_state(kind, &spec.params)
                .ok_or_else(|| Error::Config(format!("{kind} has no scalar orbit")))?;
            for j in 0..n_outputs {
                let mut acc = 0.0;
                for (i, yi) in y.iter().enumerate() {
                    state = chaos::step(kind, &spec.params, state);
                    if !state.x.is_finite() {
                        return Err(spec.infeasible(j * rows + i));
                    }
                    acc += state.x * yi;
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

/// How a normalizer derives per-feature divisors from training data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Largest absolute value.
    #[default]
    MaxAbs,
    /// Largest signed value, taken literally.
    PaperLiteralMax,
}

impl ScaleMode {
    pub fn id(self) -> u8 {
        match self {
            ScaleMode::MaxAbs => 0,
            ScaleMode::PaperLiteralMax => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(ScaleMode::MaxAbs),
            1 => Some(ScaleMode::PaperLiteralMax),
            _ => None,
        }
    }
}

/// Divisors are replaced by 1 when the calibrated value is not positive.
fn calibrate_divisors<'a>(
    width: usize,
    rows: impl IntoIterator<Item = &'a [f64]>,
    mode: ScaleMode,
) -> Result<Vec<f64>> {
    let mut best = vec![f64::NEG_INFINITY; width];
    let mut seen = false;
    for row in rows {
        check_len("calibration row", width, row.len())?;
        seen = true;
        for (b, &v) in best.iter_mut().zip(row) {
            let v = match mode {
                ScaleMode::MaxAbs => v.abs(),
                ScaleMode::PaperLiteralMax => v,
            };
            if v > *b {
                *b = v;
            }
        }
    }
    if !seen {
        return Err(Error::Empty("calibration set"));
    }
    Ok(best.into_iter().map(|b| if b > 0.0 && b.is_finite() { b } else { 1.0 }).collect())
}

/// Per-feature input normalization, `Y = [1, d_1/s_1, ..., d_N/s_N]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub divisors: Vec<f64>,
    pub mode: ScaleMode,
}

impl InputScaler {
    pub fn calibrate<'a>(
        n_inputs: usize,
        rows: impl IntoIterator<Item = &'a [f64]>,
        mode: ScaleMode,
    ) -> Result<Self> {
        Ok(InputScaler { divisors: calibrate_divisors(n_inputs, rows, mode)?, mode })
    }

    pub fn normalize(&self, d: &[f64]) -> Result<Vec<f64>> {
        check_len("feature vector", self.divisors.len(), d.len())?;
        let mut y = Vec::with_capacity(d.len() + 1);
        y.push(1.0);
        y.extend(d.iter().zip(&self.divisors).map(|(v, s)| v / s));
        Ok(y)
    }
}

/// Normalization of the raw projection `S'` into `S_h = [1, S'/s]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirScaler {
    pub divisors: Vec<f64>,
}

impl ReservoirScaler {
    /// Divisor `j` is `max |S'_j|` over the given projections.
    pub fn calibrate<'a>(
        n_outputs: usize,
        projections: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Self> {
        Ok(ReservoirScaler {
            divisors: calibrate_divisors(n_outputs, projections, ScaleMode::MaxAbs)?,
        })
    }

    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_len("reservoir projection", self.divisors.len(), s.len())?;
        let mut out = Vec::with_capacity(s.len() + 1);
        out.push(1.0);
        out.extend(s.iter().zip(&self.divisors).map(|(v, d)| v / d));
        Ok(out)
    }
}

/// Which of the two equivalent projection paths to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    #[default]
    Materialized,
    Streaming,
}

/// A ready-to-use projection for a fixed spec and shape.
#[derive(Clone, Debug)]
pub enum Projector {
    Materialized(ReservoirMatrix),
    Streaming { spec: MapSpec, n_outputs: usize },
}

impl Projector {
    pub fn new(spec: &MapSpec, n_inputs: usize, n_outputs: usize, mode: ProjectionMode) -> Result<Self> {
        match mode {
            ProjectionMode::Materialized => {
                Ok(Projector::Materialized(fill_matrix(spec, n_inputs, n_outputs)?))
            }
            ProjectionMode::Streaming => {
                Ok(Projector::Streaming { spec: spec.clone(), n_outputs })
            }
        }
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Projector::Materialized(w) => project(w, y),
            Projector::Streaming { spec, n_outputs } => project_streaming(spec, y, *n_outputs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::DEFAULT_SINE_DIVISOR;

    fn logistic() -> MapSpec {
        MapSpec::new(MapKind::Logistic, vec![0.3, 4.0]).unwrap()
    }

    /// Iterated-arithmetic oracle for the logistic orbit.
    fn logistic_orbit(x0: f64, r: f64, n: usize) -> Vec<f64> {
        let mut x = x0;
        (0..n)
            .map(|_| {
                x = r * x * (1.0 - x);
                x
            })
            .collect()
    }

    #[test]
    fn normalize_prepends_bias() {
        let s = InputScaler { divisors: vec![2.0, 4.0], mode: ScaleMode::MaxAbs };
        assert_eq!(s.normalize(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        let s = InputScaler { divisors: vec![5.0, 3.0], mode: ScaleMode::MaxAbs };
        assert_eq!(s.normalize(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(s.normalize(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn max_abs_handles_negative_feature() {
        let rows: Vec<Vec<f64>> = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let s = InputScaler::calibrate(1, rows.iter().map(Vec::as_slice), ScaleMode::MaxAbs).unwrap();
        assert_eq!(s.divisors, vec![1.0]);
        assert_eq!(s.normalize(&[-1.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn literal_max_substitutes_one_for_nonpositive() {
        let rows: Vec<Vec<f64>> = vec![vec![-3.0, 2.0], vec![-1.0, 6.0]];
        let s = InputScaler::calibrate(2, rows.iter().map(Vec::as_slice), ScaleMode::PaperLiteralMax)
            .unwrap();
        assert_eq!(s.divisors, vec![1.0, 6.0]);
    }

    #[test]
    fn all_zero_feature_gets_unit_divisor() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0], vec![0.0]];
        let s = InputScaler::calibrate(1, rows.iter().map(Vec::as_slice), ScaleMode::MaxAbs).unwrap();
        assert_eq!(s.divisors, vec![1.0]);
    }

    #[test]
    fn sine_logistic_fill() {
        let spec = MapSpec::new(MapKind::SineLogistic, vec![0.3, 5.9, 1.7, DEFAULT_SINE_DIVISOR]).unwrap();
        let w = fill_matrix(&spec, 3, 3).unwrap();
        assert_eq!(w.get(0, 0), 0.0);
        assert_eq!(w.get(0, 1), 1.0);
        for i in 0..4 {
            let first = 0.3 * ((i as f64 / 784.0) * (PI / 5.9)).sin();
            assert_eq!(w.get(i, 0), first);
            assert_eq!(w.get(i, 1), 1.0 - 1.7 * first * first);
        }
    }

    #[test]
    fn logistic_fill_is_column_major_orbit() {
        let w = fill_matrix(&logistic(), 1, 2).unwrap();
        let o = logistic_orbit(0.3, 4.0, 4);
        assert_eq!(w.column(0), &o[0..2]);
        assert_eq!(w.column(1), &o[2..4]);
        assert!((w.get(0, 0) - 0.84).abs() < 1e-15);
        assert!((w.get(1, 0) - 0.5376).abs() < 1e-15);
        assert!((w.get(0, 1) - 0.994_344_96).abs() < 1e-8);
    }

    #[test]
    fn project_hand_examples() {
        let w = ReservoirMatrix::from_column_major(2, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(project(&w, &[1.0, 3.0]).unwrap(), vec![7.0]);
        let z = ReservoirMatrix::from_column_major(3, 2, vec![0.0; 6]).unwrap();
        assert_eq!(project(&z, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn streaming_logistic_small() {
        let s = project_streaming(&logistic(), &[1.0, 1.0], 2).unwrap();
        let o = logistic_orbit(0.3, 4.0, 4);
        assert_eq!(s, vec![o[0] + o[1], o[2] + o[3]]);
        assert!((s[0] - 1.3776).abs() < 1e-14);
    }

    #[test]
    fn streaming_zero_input_is_zero() {
        let s = project_streaming(&logistic(), &[0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(s, vec![0.0; 4]);
    }

    #[test]
    fn divergent_spec_is_infeasible_in_both_paths() {
        let spec = MapSpec::unchecked(MapKind::TwoSided, vec![-1.0, 3.0]);
        assert!(matches!(fill_matrix(&spec, 2, 2), Err(Error::Infeasible { index: 0, .. })));
        assert!(matches!(
            project_streaming(&spec, &[1.0, 0.0, 0.0], 2),
            Err(Error::Infeasible { index: 0, .. })
        ));
    }

    #[test]
    fn reservoir_output_prepends_offset() {
        let s = ReservoirScaler { divisors: vec![3.0] };
        assert_eq!(s.apply(&[3.0]).unwrap(), vec![1.0, 1.0]);
        let s = ReservoirScaler { divisors: vec![2.0, 5.0] };
        assert_eq!(s.apply(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }
}
