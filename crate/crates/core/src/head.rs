//! Two-layer trainable classifier on top of the reservoir output.
//!
//! `S_h (P+1) -> sigmoid hidden (H) -> [1, hidden] (H+1) -> softmax (M)`,
//! trained with per-example SGD on cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Initial weights are drawn from `[-INIT_RANGE, INIT_RANGE]`.
pub const INIT_RANGE: f64 = 0.5;
/// Central-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for relative gradient deviations.
pub const GRAD_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Shuffle the sequence every epoch. Off by default: the balanced
    /// round-robin order is part of the training procedure.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, learning_rate: 0.05, seed: 1, shuffle: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Weights of both layers.
///
/// `w1` is `(P+1) x H` row-major (`w1[i * H + h]`), `w2` is `(H+1) x M`
/// row-major; row 0 of `w2` multiplies the constant hidden unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadWeights {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

/// Result of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    /// `[1, sigmoid(W1^T S_h)]`, length `H + 1`.
    pub hidden: Vec<f64>,
    /// Softmax output, length `M`.
    pub scores: Vec<f64>,
    pub class: usize,
}

/// Gradients with the same layout as [`HeadWeights`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl HeadWeights {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        HeadWeights {
            inputs,
            hidden,
            outputs,
            w1: vec![0.0; inputs * hidden],
            w2: vec![0.0; (hidden + 1) * outputs],
        }
    }

    /// Uniform initialization in `[-INIT_RANGE, INIT_RANGE]`.
    pub fn random(inputs: usize, hidden: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut w = Self::zeros(inputs, hidden, outputs);
        for v in w.w1.iter_mut().chain(w.w2.iter_mut()) {
            *v = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
        w
    }

    pub fn seeded(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        Self::random(inputs, hidden, outputs, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.w2).all(|v| v.is_finite())
    }

    fn check_shapes(&self) -> Result<()> {
        check_len("first weight block", self.inputs * self.hidden, self.w1.len())?;
        check_len("second weight block", (self.hidden + 1) * self.outputs, self.w2.len())
    }

    /// Output-layer pre-activations.
    fn logits(&self, s_h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let mut hidden = vec![0.0; h + 1];
        hidden[0] = 1.0;
        let mut z = vec![0.0; h];
        for (i, &x) in s_h.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.w1[i * h..(i + 1) * h];
            for (zk, wk) in z.iter_mut().zip(row) {
                *zk += wk * x;
            }
        }
        for (a, zk) in hidden[1..].iter_mut().zip(&z) {
            *a = sigmoid(*zk);
        }
        let m = self.outputs;
        let mut out = vec![0.0; m];
        for (k, &a) in hidden.iter().enumerate() {
            let row = &self.w2[k * m..(k + 1) * m];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * a;
            }
        }
        (hidden, out)
    }

    pub fn forward(&self, s_h: &[f64]) -> Result<Forward> {
        check_len("reservoir output S_h", self.inputs, s_h.len())?;
        let (hidden, mut scores) = self.logits(s_h);
        softmax_in_place(&mut scores);
        let class = argmax(&scores);
        Ok(Forward { hidden, scores, class })
    }

    pub fn classify(&self, s_h: &[f64]) -> Result<usize> {
        self.forward(s_h).map(|f| f.class)
    }

    /// Cross-entropy `-ln softmax(o)[label]`, computed as `logsumexp(o) - o[label]`.
    pub fn loss(&self, s_h: &[f64], label: usize) -> f64 {
        let (_, o) = self.logits(s_h);
        let max = o.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + o.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        lse - o[label]
    }

    /// Analytic gradient of [`HeadWeights::loss`].
    pub fn gradients(&self, s_h: &[f64], label: usize) -> Result<Gradients> {
        check_len("reservoir output S_h", self.inputs, s_h.len())?;
        let (h, m) = (self.hidden, self.outputs);
        let fwd = self.forward(s_h)?;
        let delta_out: Vec<f64> = fwd
            .scores
            .iter()
            .enumerate()
            .map(|(k, p)| if k == label { p - 1.0 } else { *p })
            .collect();
        let delta_hidden = self.hidden_deltas(&fwd.hidden, &delta_out);
        let mut g2 = vec![0.0; (h + 1) * m];
        for (k, a) in fwd.hidden.iter().enumerate() {
            for (c, d) in delta_out.iter().enumerate() {
                g2[k * m + c] = a * d;
            }
        }
        let mut g1 = vec![0.0; self.inputs * h];
        for (i, x) in s_h.iter().enumerate() {
            for (k, d) in delta_hidden.iter().enumerate() {
                g1[i * h + k] = x * d;
            }
        }
        Ok(Gradients { w1: g1, w2: g2 })
    }

    fn hidden_deltas(&self, hidden: &[f64], delta_out: &[f64]) -> Vec<f64> {
        let m = self.outputs;
        (0..self.hidden)
            .map(|k| {
                let a = hidden[k + 1];
                let row = &self.w2[(k + 1) * m..(k + 2) * m];
                let back: f64 = row.iter().zip(delta_out).map(|(w, d)| w * d).sum();
                back * a * (1.0 - a)
            })
            .collect()
    }

    /// One SGD update on a single example; returns the pre-update loss.
    pub fn sgd_step(&mut self, s_h: &[f64], label: usize, lr: f64) -> f64 {
        let (h, m) = (self.hidden, self.outputs);
        let (hidden, mut out) = self.logits(s_h);
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + out.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - out[label];
        softmax_in_place(&mut out);
        out[label] -= 1.0;
        let delta_out = out;
        let delta_hidden = self.hidden_deltas(&hidden, &delta_out);
        for (k, a) in hidden.iter().enumerate() {
            let row = &mut self.w2[k * m..(k + 1) * m];
            for (w, d) in row.iter_mut().zip(&delta_out) {
                *w -= lr * a * d;
            }
        }
        for (i, &x) in s_h.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &mut self.w1[i * h..(i + 1) * h];
            for (w, d) in row.iter_mut().zip(&delta_hidden) {
                *w -= lr * x * d;
            }
        }
        loss
    }

    /// Runs `cfg.epochs` passes over `train` starting from the current
    /// weights. Returns the mean pre-update loss of every epoch.
    pub fn train(&mut self, train: &[(&[f64], usize)], cfg: &TrainConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        self.check_shapes()?;
        if train.is_empty() {
            return Err(Error::Empty("training sequence"));
        }
        for (x, label) in train {
            check_len("reservoir output S_h", self.inputs, x.len())?;
            if *label >= self.outputs {
                return Err(Error::Config(format!(
                    "label {label} out of range for {} classes",
                    self.outputs
                )));
            }
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_5bu64);
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            let mut total = 0.0;
            for &idx in &order {
                let (x, label) = train[idx];
                total += self.sgd_step(x, label, cfg.learning_rate);
            }
            let mean = total / train.len() as f64;
            if !mean.is_finite() || !self.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            history.push(mean);
        }
        Ok(history)
    }
}

/// Trains a fresh head seeded from `cfg.seed`.
pub fn fit(
    train: &[(&[f64], usize)],
    hidden: usize,
    outputs: usize,
    cfg: &TrainConfig,
) -> Result<HeadWeights> {
    let inputs = train.first().map(|(x, _)| x.len()).ok_or(Error::Empty("training sequence"))?;
    let mut w = HeadWeights::seeded(inputs, hidden, outputs, cfg.seed);
    w.train(train, cfg)?;
    Ok(w)
}

/// `L(w + step e) - L(w - step e)` for one weight, where `layer` is 1 or 2
/// and `idx` indexes that layer's block.
///
/// Formed from the unperturbed forward pass with `exp_m1`/`ln_1p` so the two
/// losses are never subtracted directly; a plain subtraction loses about
/// `eps |L| / step` of absolute gradient accuracy.
fn loss_difference(w: &HeadWeights, s_h: &[f64], label: usize, layer: usize, idx: usize, step: f64) -> f64 {
    let (h, m) = (w.hidden, w.outputs);
    let (hidden, mut p) = w.logits(s_h);
    softmax_in_place(&mut p);
    let (mut up, mut down) = (vec![0.0; m], vec![0.0; m]);
    if layer == 1 {
        let (i, k) = (idx / h, idx % h);
        let z: f64 = (0..w.inputs).map(|j| w.w1[j * h + k] * s_h[j]).sum();
        let d = step * s_h[i];
        let a = hidden[k + 1];
        // sigmoid(z + d) - sigmoid(z) = sigmoid(z) sigmoid(-(z + d)) expm1(d)
        let da_up = a * sigmoid(-(z + d)) * d.exp_m1();
        let da_down = a * sigmoid(-(z - d)) * (-d).exp_m1();
        for c in 0..m {
            up[c] = w.w2[(k + 1) * m + c] * da_up;
            down[c] = w.w2[(k + 1) * m + c] * da_down;
        }
    } else {
        let (k, c) = (idx / m, idx % m);
        up[c] = step * hidden[k];
        down[c] = -step * hidden[k];
    }
    let spread: f64 = (0..m).map(|c| p[c] * (up[c].exp_m1() - down[c].exp_m1())).sum();
    let base: f64 = 1.0 + (0..m).map(|c| p[c] * down[c].exp_m1()).sum::<f64>();
    (spread / base).ln_1p() - (up[label] - down[label])
}

/// Largest relative deviation between analytic and central-difference
/// gradients over every weight of both layers.
///
/// Deviation per weight is `|a - n| / max(|a|, |n|, GRAD_FLOOR)`.
pub fn gradient_check(w: &HeadWeights, s_h: &[f64], label: usize) -> Result<f64> {
    let analytic = w.gradients(s_h, label)?;
    let mut worst: f64 = 0.0;
    for (layer, grads) in [(1, &analytic.w1), (2, &analytic.w2)] {
        for (idx, &a) in grads.iter().enumerate() {
            let numeric = loss_difference(w, s_h, label, layer, idx, FD_STEP) / (2.0 * FD_STEP);
            let dev = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}
