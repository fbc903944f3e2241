//! One-vs-rest linear SVM trained with Pegasos stochastic subgradient steps.
//!
//! For every class `c` and visited sample `(x, y)` at step `t`, with
//! `η = 1/(λt)` and `y = ±1` for "is class c":
//!
//! ```text
//! w_c ← (1 − ηλ)·w_c + [y(w_c·x + b_c) < 1]·η·y·x
//! ```
//!
//! The bias is handled as a weight on a constant input of 1 and is
//! regularised along with `w_c`.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::argmax_masked;
use crate::{Error, LatentFeatures, Result, SeededRng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub reg_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            reg_lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    /// `[K, m]`
    weights: Tensor,
    bias: Vec<f64>,
    reg_lambda: f64,
}

impl LinearSvmModel {
    pub fn from_parts(weights: Tensor, bias: Vec<f64>, reg_lambda: f64) -> Result<Self> {
        if weights.shape().len() != 2 || weights.rows() != bias.len() || bias.is_empty() {
            return Err(Error::Shape {
                op: "svm params",
                left: weights.shape().to_vec(),
                right: vec![bias.len()],
            });
        }
        if reg_lambda.is_nan() || reg_lambda <= 0.0 {
            return Err(Error::Config("reg_lambda must be positive".into()));
        }
        Ok(LinearSvmModel {
            weights,
            bias,
            reg_lambda,
        })
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn reg_lambda(&self) -> f64 {
        self.reg_lambda
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.shape()[1]
    }

    /// `w_c·x + b_c` for every class.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                op: "svm predict",
                left: vec![x.len()],
                right: vec![self.dim()],
            });
        }
        Ok((0..self.num_classes())
            .map(|c| dot(self.weights.row(c), x) + self.bias[c])
            .collect())
    }

    /// Highest-scoring class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let scores = self.decision_values(x)?;
        argmax_masked(&scores, &vec![true; scores.len()])
    }

    pub fn predict_all(&self, features: &LatentFeatures) -> Result<Vec<usize>> {
        (0..features.len())
            .map(|i| self.predict(features.sample(i)))
            .collect()
    }

    pub fn accuracy(&self, features: &LatentFeatures) -> Result<f64> {
        if features.is_empty() {
            return Ok(0.0);
        }
        let predictions = self.predict_all(features)?;
        let hits = predictions
            .iter()
            .zip(features.labels())
            .filter(|(p, l)| p == l)
            .count();
        Ok(hits as f64 / features.len() as f64)
    }

    /// `λ/2·Σ_c ‖(w_c, b_c)‖² + (1/n)·Σ_i Σ_c max(0, 1 − y_ic(w_c·x_i + b_c))`
    pub fn objective(&self, features: &LatentFeatures) -> Result<f64> {
        let mut reg = 0.0;
        for c in 0..self.num_classes() {
            reg += dot(self.weights.row(c), self.weights.row(c)) + self.bias[c] * self.bias[c];
        }
        let mut hinge = 0.0;
        for i in 0..features.len() {
            let scores = self.decision_values(features.sample(i))?;
            for (c, s) in scores.iter().enumerate() {
                let y = if features.label(i) == c { 1.0 } else { -1.0 };
                hinge += (1.0 - y * s).max(0.0);
            }
        }
        let n = features.len().max(1) as f64;
        Ok(0.5 * self.reg_lambda * reg + hinge / n)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_svm(features: &LatentFeatures, cfg: &SvmConfig) -> Result<LinearSvmModel> {
    train_svm_traced(features, cfg).map(|(model, _)| model)
}

/// Trains and also reports the objective after every epoch.
pub fn train_svm_traced(
    features: &LatentFeatures,
    cfg: &SvmConfig,
) -> Result<(LinearSvmModel, Vec<f64>)> {
    if features.is_empty() {
        return Err(Error::Config("cannot train an SVM on zero samples".into()));
    }
    if !(cfg.reg_lambda > 0.0 && cfg.reg_lambda.is_finite()) {
        return Err(Error::Config("reg_lambda must be positive".into()));
    }
    let (k, m) = (features.num_classes(), features.dim());
    let mut model = LinearSvmModel {
        weights: Tensor::zeros(&[k, m]),
        bias: vec![0.0; k],
        reg_lambda: cfg.reg_lambda,
    };
    let first = features.label(0);
    if features.labels().iter().all(|&l| l == first) {
        // One class only: every one-vs-rest problem is constant, so the
        // margin-optimal classifiers are pure biases.
        for (c, b) in model.bias.iter_mut().enumerate() {
            *b = if c == first { 1.0 } else { -1.0 };
        }
        let objective = model.objective(features)?;
        return Ok((model, vec![objective; cfg.epochs]));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let mut objectives = Vec::with_capacity(cfg.epochs);
    let mut t = 0u64;
    for _ in 0..cfg.epochs {
        for i in rng.permutation(features.len()) {
            t += 1;
            let eta = 1.0 / (cfg.reg_lambda * t as f64);
            let shrink = 1.0 - eta * cfg.reg_lambda;
            let x = features.sample(i);
            for c in 0..k {
                let y = if features.label(i) == c { 1.0 } else { -1.0 };
                let w = model.weights.row_mut(c);
                let margin = y * (dot(w, x) + model.bias[c]);
                w.iter_mut().for_each(|v| *v *= shrink);
                model.bias[c] *= shrink;
                if margin < 1.0 {
                    for (v, xj) in w.iter_mut().zip(x) {
                        *v += eta * y * xj;
                    }
                    model.bias[c] += eta * y;
                }
            }
        }
        objectives.push(model.objective(features)?);
    }
    Ok((model, objectives))
}
