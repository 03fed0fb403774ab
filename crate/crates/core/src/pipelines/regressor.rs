//! A small fully connected network that regresses sample values from
//! features: one rectified hidden layer, scalar output, full-batch gradient
//! descent on mean squared error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, stream};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            hidden: 64,
            learning_rate: 1e-2,
            epochs: 500,
            seed: 0,
        }
    }
}

/// Two-layer value regressor. Inputs are standardized with statistics stored
/// at training time, so prediction is self-contained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueRegressor {
    /// Hidden weights, `w1[j][i]` connecting input i to hidden unit j.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// Output weights per hidden unit.
    pub w2: Vec<f64>,
    pub b2: f64,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    /// Full-batch loss after each epoch; index 0 is the initial loss.
    pub loss_curve: Vec<f64>,
}

/// Parameter gradients, same shapes as the regressor.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ValueRegressor {
    /// Fan-in scaled symmetric uniform initialization, seeded.
    fn init(input_dim: usize, config: &RegressorConfig) -> Self {
        let mut rng = seeded(config.seed, stream::REGRESSOR);
        let bound1 = 1.0 / (input_dim as f64).sqrt();
        let w1 = (0..config.hidden)
            .map(|_| (0..input_dim).map(|_| rng.gen_range(-bound1..bound1)).collect())
            .collect();
        let b1 = (0..config.hidden).map(|_| rng.gen_range(-bound1..bound1)).collect();
        let bound2 = 1.0 / (config.hidden as f64).sqrt();
        let w2 = (0..config.hidden).map(|_| rng.gen_range(-bound2..bound2)).collect();
        let b2 = rng.gen_range(-bound2..bound2);
        ValueRegressor {
            w1,
            b1,
            w2,
            b2,
            input_mean: vec![0.0; input_dim],
            input_std: vec![1.0; input_dim],
            loss_curve: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_mean.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, x)| {
                if self.input_std[j] > 0.0 {
                    (x - self.input_mean[j]) / self.input_std[j]
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn hidden_activations(&self, standardized: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| {
                let pre: f64 = row.iter().zip(standardized).map(|(w, x)| w * x).sum::<f64>() + b;
                pre.max(0.0)
            })
            .collect()
    }

    /// Forward pass for a single raw feature row.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "regressor expects {} features, got {}",
                self.input_dim(),
                row.len()
            )));
        }
        let h = self.hidden_activations(&self.standardize(row));
        Ok(self.w2.iter().zip(&h).map(|(w, a)| w * a).sum::<f64>() + self.b2)
    }

    /// Mean squared error over a batch.
    pub fn mse(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
        if rows.len() != targets.len() || rows.is_empty() {
            return Err(Error::invalid("features and targets must align and be nonempty"));
        }
        let mut loss = 0.0;
        for (row, y) in rows.iter().zip(targets) {
            let e = self.predict(row)? - y;
            loss += e * e;
        }
        Ok(loss / rows.len() as f64)
    }

    /// Full-batch analytic gradients of the mean squared error.
    pub fn gradients(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<Gradients> {
        if rows.len() != targets.len() || rows.is_empty() {
            return Err(Error::invalid("features and targets must align and be nonempty"));
        }
        let hidden = self.hidden_dim();
        let input = self.input_dim();
        let mut gw1 = vec![vec![0.0; input]; hidden];
        let mut gb1 = vec![0.0; hidden];
        let mut gw2 = vec![0.0; hidden];
        let mut gb2 = 0.0;
        let scale = 2.0 / rows.len() as f64;
        for (row, y) in rows.iter().zip(targets) {
            let x = self.standardize(row);
            let h = self.hidden_activations(&x);
            let pred: f64 = self.w2.iter().zip(&h).map(|(w, a)| w * a).sum::<f64>() + self.b2;
            let d_out = scale * (pred - y);
            gb2 += d_out;
            for j in 0..hidden {
                gw2[j] += d_out * h[j];
                if h[j] > 0.0 {
                    let d_hidden = d_out * self.w2[j];
                    gb1[j] += d_hidden;
                    for i in 0..input {
                        gw1[j][i] += d_hidden * x[i];
                    }
                }
            }
        }
        Ok(Gradients {
            w1: gw1,
            b1: gb1,
            w2: gw2,
            b2: gb2,
        })
    }

    fn step(&mut self, grads: &Gradients, lr: f64) {
        for (row, grow) in self.w1.iter_mut().zip(&grads.w1) {
            for (w, g) in row.iter_mut().zip(grow) {
                *w -= lr * g;
            }
        }
        for (b, g) in self.b1.iter_mut().zip(&grads.b1) {
            *b -= lr * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grads.w2) {
            *w -= lr * g;
        }
        self.b2 -= lr * grads.b2;
    }
}

/// Trains a value regressor by full-batch gradient descent.
///
/// Inputs are standardized with the training batch's statistics, which the
/// returned regressor stores. Errors out if the loss turns non-finite or ends
/// above its initial value; both indicate the learning rate is too large.
pub fn train_value_regressor(
    rows: &[Vec<f64>],
    targets: &[f64],
    config: &RegressorConfig,
) -> Result<ValueRegressor> {
    if rows.is_empty() || rows.len() != targets.len() {
        return Err(Error::invalid("need at least one (features, target) pair"));
    }
    if config.hidden == 0 {
        return Err(Error::invalid("hidden width must be positive"));
    }
    let input_dim = rows[0].len();
    for row in rows {
        if row.len() != input_dim {
            return Err(Error::invalid("feature rows differ in length"));
        }
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("regression targets contain non-finite values".into()));
    }

    let mut reg = ValueRegressor::init(input_dim, config);
    let n = rows.len() as f64;
    let mut mean = vec![0.0; input_dim];
    for row in rows {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; input_dim];
    for row in rows {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(row) {
            let d = x - m;
            *v += d * d;
        }
    }
    reg.input_mean = mean;
    reg.input_std = var.into_iter().map(|v| (v / n).sqrt()).collect();

    let initial = reg.mse(rows, targets)?;
    reg.loss_curve.push(initial);
    for epoch in 0..config.epochs {
        let grads = reg.gradients(rows, targets)?;
        reg.step(&grads, config.learning_rate);
        let loss = reg.mse(rows, targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "regressor loss diverged at epoch {epoch}; lower the learning rate"
            )));
        }
        reg.loss_curve.push(loss);
    }
    let last = *reg.loss_curve.last().expect("loss curve is nonempty");
    if last > initial {
        return Err(Error::NonFinite(format!(
            "regressor loss rose from {initial} to {last}; lower the learning rate"
        )));
    }
    Ok(reg)
}

/// Forward pass over a feature matrix.
pub fn predict_values(reg: &ValueRegressor, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter().map(|row| reg.predict(row)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_data(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = seeded(seed, 90);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let targets = rows
            .iter()
            .map(|r: &Vec<f64>| r.iter().sum::<f64>() * 0.5 + 0.3)
            .collect();
        (rows, targets)
    }

    #[test]
    fn constant_targets_converge() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let targets = vec![0.7; 10];
        let config = RegressorConfig {
            hidden: 16,
            learning_rate: 0.05,
            epochs: 600,
            seed: 4,
        };
        let reg = train_value_regressor(&rows, &targets, &config).unwrap();
        let loss = reg.mse(&rows, &targets).unwrap();
        assert!(loss < 1e-3, "loss {loss}");
        for row in &rows {
            assert!((reg.predict(row).unwrap() - 0.7).abs() < 0.1);
        }
    }

    #[test]
    fn zero_epochs_returns_seeded_initialization() {
        let (rows, targets) = toy_data(8, 3, 1);
        let config = RegressorConfig {
            epochs: 0,
            seed: 11,
            ..Default::default()
        };
        let a = train_value_regressor(&rows, &targets, &config).unwrap();
        let b = train_value_regressor(&rows, &targets, &config).unwrap();
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.loss_curve.len(), 1);
        assert_eq!(
            predict_values(&a, &rows).unwrap(),
            predict_values(&b, &rows).unwrap()
        );
    }

    #[test]
    fn zero_weights_output_the_bias() {
        let mut reg = ValueRegressor::init(2, &RegressorConfig::default());
        for row in &mut reg.w1 {
            row.iter_mut().for_each(|w| *w = 0.0);
        }
        reg.b1.iter_mut().for_each(|b| *b = 0.0);
        reg.w2.iter_mut().for_each(|w| *w = 0.0);
        reg.b2 = -1.25;
        for row in [[0.0, 0.0], [5.0, -3.0], [100.0, 2.0]] {
            assert_eq!(reg.predict(&row).unwrap(), -1.25);
        }
    }

    #[test]
    fn batch_prediction_matches_row_wise() {
        let (rows, targets) = toy_data(12, 4, 2);
        let reg = train_value_regressor(
            &rows,
            &targets,
            &RegressorConfig {
                epochs: 50,
                ..Default::default()
            },
        )
        .unwrap();
        let batch = predict_values(&reg, &rows).unwrap();
        for (row, b) in rows.iter().zip(batch) {
            assert_eq!(reg.predict(row).unwrap(), b);
        }
    }

    #[test]
    fn divergent_learning_rate_is_reported() {
        let (rows, targets) = toy_data(10, 2, 3);
        let config = RegressorConfig {
            learning_rate: 1e6,
            epochs: 50,
            ..Default::default()
        };
        let err = train_value_regressor(&rows, &targets, &config).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn loss_never_ends_above_start() {
        let (rows, targets) = toy_data(20, 3, 5);
        let reg = train_value_regressor(
            &rows,
            &targets,
            &RegressorConfig {
                epochs: 200,
                ..Default::default()
            },
        )
        .unwrap();
        let first = reg.loss_curve[0];
        let last = *reg.loss_curve.last().unwrap();
        assert!(last <= first);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (rows, targets) = toy_data(6, 3, 7);
        let mut reg = ValueRegressor::init(3, &RegressorConfig {
            hidden: 4,
            seed: 8,
            ..Default::default()
        });
        reg.input_mean = vec![0.0; 3];
        reg.input_std = vec![1.0; 3];
        let grads = reg.gradients(&rows, &targets).unwrap();
        let eps = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for j in 0..4 {
            for i in 0..3 {
                let mut plus = reg.clone();
                plus.w1[j][i] += eps;
                let mut minus = reg.clone();
                minus.w1[j][i] -= eps;
                let numeric = (plus.mse(&rows, &targets).unwrap()
                    - minus.mse(&rows, &targets).unwrap())
                    / (2.0 * eps);
                assert!(rel(grads.w1[j][i], numeric) < 1e-4);
            }
        }
    }
}
