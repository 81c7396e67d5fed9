//! Reference classifiers for comparison runs: a small logistic MLP and a
//! linear primal-subgradient SVM. These are transparent desk-scale
//! baselines, not replicas of any toolbox defaults.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable softplus, ln(1 + e^z).
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 10,
            learning_rate: 0.01,
            epochs: 500,
            seed: 0,
        }
    }
}

/// One hidden layer of logistic units and a logistic output, trained by
/// full-batch gradient descent on mean cross-entropy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub n_inputs: usize,
    /// hidden x n_inputs, row-major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpModel {
    pub fn new(n_inputs: usize, config: MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scale = 1.0 / (n_inputs as f64).sqrt();
        Self {
            config,
            n_inputs,
            w1: (0..config.hidden * n_inputs)
                .map(|_| rng.gen_range(-scale..scale))
                .collect(),
            b1: vec![0.0; config.hidden],
            w2: (0..config.hidden).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            b2: 0.0,
        }
    }

    /// Output-unit pre-activation.
    fn logit(&self, x: &[f64]) -> f64 {
        let h = self.hidden_activations(x);
        self.w2.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() + self.b2
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.config.hidden)
            .map(|j| {
                let z: f64 = self.w1[j * self.n_inputs..(j + 1) * self.n_inputs]
                    .iter()
                    .zip(x)
                    .map(|(w, x)| w * x)
                    .sum();
                sigmoid(z + self.b1[j])
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.logit(x) >= 0.0)
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let correct = data
            .samples()
            .iter()
            .filter(|s| self.predict(&s.features) == s.label)
            .count();
        correct as f64 / data.len() as f64
    }

    /// Mean cross-entropy over the dataset, computed from logits.
    pub fn loss(&self, data: &Dataset) -> f64 {
        data.samples()
            .iter()
            .map(|s| {
                let z = self.logit(&s.features);
                softplus(z) - s.label as f64 * z
            })
            .sum::<f64>()
            / data.len() as f64
    }

    /// Flat parameter vector in the order (w1, b1, w2, b2).
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w1.clone();
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (n1, nh) = (self.w1.len(), self.config.hidden);
        self.w1.copy_from_slice(&p[..n1]);
        self.b1.copy_from_slice(&p[n1..n1 + nh]);
        self.w2.copy_from_slice(&p[n1 + nh..n1 + 2 * nh]);
        self.b2 = p[n1 + 2 * nh];
    }

    /// Analytic gradient of `loss`, flattened like `params`.
    pub fn gradient(&self, data: &Dataset) -> Vec<f64> {
        let n = data.len() as f64;
        let nh = self.config.hidden;
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; nh];
        let mut gw2 = vec![0.0; nh];
        let mut gb2 = 0.0;
        for s in data.samples() {
            let h = self.hidden_activations(&s.features);
            let z = self.w2.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() + self.b2;
            let dz2 = (sigmoid(z) - s.label as f64) / n;
            for j in 0..nh {
                gw2[j] += dz2 * h[j];
                let dz1 = dz2 * self.w2[j] * h[j] * (1.0 - h[j]);
                gb1[j] += dz1;
                for (i, x) in s.features.iter().enumerate() {
                    gw1[j * self.n_inputs + i] += dz1 * x;
                }
            }
            gb2 += dz2;
        }
        let mut g = gw1;
        g.extend(gb1);
        g.extend(gw2);
        g.push(gb2);
        g
    }

    fn step(&mut self, data: &Dataset) {
        let g = self.gradient(data);
        let mut p = self.params();
        for (p, g) in p.iter_mut().zip(&g) {
            *p -= self.config.learning_rate * g;
        }
        self.set_params(&p);
    }
}

/// Train and report (model, train accuracy, validation accuracy).
pub fn train_mlp(
    train: &Dataset,
    val: &Dataset,
    config: MlpConfig,
) -> Result<(MlpModel, f64, Option<f64>)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = MlpModel::new(train.n_features(), config);
    for _ in 0..config.epochs {
        model.step(train);
    }
    let train_acc = model.accuracy(train);
    let val_acc = (!val.is_empty()).then(|| model.accuracy(val));
    Ok((model, train_acc, val_acc))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SvmConfig {
    /// L2 regularization strength on the weight vector (bias unregularized).
    pub reg: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            reg: 0.01,
            epochs: 200,
            seed: 0,
        }
    }
}

/// Linear classifier sign(w . x + b) trained by full-batch subgradient
/// descent on the regularized hinge loss, reporting the averaged iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub config: SvmConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    pub fn predict(&self, x: &[f64]) -> u8 {
        let score: f64 = self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias;
        u8::from(score >= 0.0)
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let correct = data
            .samples()
            .iter()
            .filter(|s| self.predict(&s.features) == s.label)
            .count();
        correct as f64 / data.len() as f64
    }

    /// Regularized hinge objective: reg/2 ||w||^2 + mean hinge.
    pub fn objective(&self, data: &Dataset) -> f64 {
        let reg_term = 0.5 * self.config.reg
            * self.weights.iter().map(|w| w * w).sum::<f64>();
        let hinge: f64 = data
            .samples()
            .iter()
            .map(|s| {
                let y = 2.0 * s.label as f64 - 1.0;
                let score: f64 =
                    self.weights.iter().zip(&s.features).map(|(w, x)| w * x).sum::<f64>() + self.bias;
                (1.0 - y * score).max(0.0)
            })
            .sum::<f64>()
            / data.len() as f64;
        reg_term + hinge
    }
}

/// Train and report (model, train accuracy). Per the comparison protocol the
/// SVM path considers only training and test partitions; callers evaluate on
/// test via `SvmModel::accuracy`.
pub fn train_linear_svm(train: &Dataset, config: SvmConfig) -> Result<(SvmModel, f64)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (zeros, ones) = train.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::SingleClass);
    }
    let d = train.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let mut b = 0.0f64;
    let mut w_avg = vec![0.0; d];
    let mut b_avg = 0.0;
    let n = train.len() as f64;
    for t in 1..=config.epochs {
        let mut gw: Vec<f64> = w.iter().map(|w| config.reg * w).collect();
        let mut gb = 0.0;
        for s in train.samples() {
            let y = 2.0 * s.label as f64 - 1.0;
            let score: f64 = w.iter().zip(&s.features).map(|(w, x)| w * x).sum::<f64>() + b;
            if y * score < 1.0 {
                for (g, x) in gw.iter_mut().zip(&s.features) {
                    *g -= y * x / n;
                }
                gb -= y / n;
            }
        }
        // offset in the denominator keeps the first steps bounded
        let eta = 1.0 / (config.reg * t as f64 + 1.0);
        for (w, g) in w.iter_mut().zip(&gw) {
            *w -= eta * g;
        }
        b -= eta * gb;
        for (a, w) in w_avg.iter_mut().zip(&w) {
            *a += (w - *a) / t as f64;
        }
        b_avg += (b - b_avg) / t as f64;
    }
    let model = SvmModel {
        config,
        weights: if config.epochs > 0 { w_avg } else { w },
        bias: if config.epochs > 0 { b_avg } else { b },
    };
    let train_acc = model.accuracy(train);
    Ok((model, train_acc))
}
