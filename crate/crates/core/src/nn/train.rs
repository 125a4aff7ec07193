use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::DenseNet;
use super::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub loss_threshold: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            loss_threshold: 1e-6,
            max_epochs: 2000,
            batch_size: 16,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && self.loss_threshold.is_finite()
            && self.loss_threshold > 0.0
            && self.batch_size >= 1;
        if ok {
            Ok(())
        } else {
            Err(NnError::BadConfig(format!("{self:?}")))
        }
    }
}

/// Mean squared error.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64, NnError> {
    if pred.len() != target.len() {
        return Err(NnError::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(NnError::EmptyInput);
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// Minibatch index ranges for one epoch. A trailing batch of one row is
/// folded into its predecessor when `min_rows` is 2.
fn batches(n: usize, size: usize, min_rows: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n).step_by(size).map(|s| (s, (s + size).min(n))).collect();
    if out.len() > 1 {
        let (s, e) = out[out.len() - 1];
        if e - s < min_rows {
            out.pop();
            out.last_mut().expect("at least one batch").1 = e;
        }
    }
    out
}

/// Minibatch SGD on squared error. Returns the per-epoch mean loss.
///
/// Stops once an epoch's loss is at or below `loss_threshold`.
pub fn train(
    net: &mut DenseNet,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    cfg: &TrainConfig,
) -> Result<Vec<f64>, NnError> {
    cfg.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return Err(NnError::EmptyInput);
    }
    if targets.nrows() != n {
        return Err(NnError::LengthMismatch {
            left: n,
            right: targets.nrows(),
        });
    }
    if targets.ncols() != net.out_dim() {
        return Err(NnError::DimMismatch {
            expected: net.out_dim(),
            found: targets.ncols(),
        });
    }
    let min_rows = if net.has_batch_norm() { 2 } else { 1 };
    if n < min_rows {
        return Err(NnError::BatchTooSmall { rows: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let width = targets.ncols() as f64;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (s, e) in batches(n, cfg.batch_size, min_rows) {
            let idx = &order[s..e];
            let x = inputs.select(Axis(0), idx);
            let y = targets.select(Axis(0), idx);
            let (out, cache) = net.forward_train(&x)?;
            let diff = &out - &y;
            let rows = idx.len() as f64;
            total += diff.mapv(|d| d * d).sum() / width;
            let grads = net.backward(&cache, &(diff * (2.0 / (rows * width))))?;
            net.apply(&grads, cfg.learning_rate);
        }
        let loss = total / n as f64;
        if !loss.is_finite() || !net.is_finite() {
            return Err(NnError::NonFiniteLoss { epoch });
        }
        trace.push(loss);
        if loss <= cfg.loss_threshold {
            break;
        }
    }
    Ok(trace)
}
