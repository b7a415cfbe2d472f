//! Full-graph node classification training.
//!
//! Masked softmax cross-entropy, AdamW with decoupled weight decay, early
//! stopping on validation accuracy, and best-checkpoint selection. The whole
//! loop is single-threaded and bitwise deterministic for a fixed seed.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::models::{self, LayerTrace, ModelSpec, Params};

/// A node-classification dataset: graph, features, labels, and split masks.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub graph: Graph,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub num_classes: usize,
}

impl LabeledData {
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.node_count();
        if self.features.rows() != n {
            return Err(Error::Validation(format!(
                "features have {} rows but graph has {} nodes",
                self.features.rows(),
                n
            )));
        }
        if self.labels.len() != n
            || self.train_mask.len() != n
            || self.val_mask.len() != n
            || self.test_mask.len() != n
        {
            return Err(Error::Validation(
                "labels and masks must have one entry per node".into(),
            ));
        }
        for i in 0..n {
            let masked = self.train_mask[i] || self.val_mask[i] || self.test_mask[i];
            let overlap = (self.train_mask[i] as u8)
                + (self.val_mask[i] as u8)
                + (self.test_mask[i] as u8);
            if overlap > 1 {
                return Err(Error::Validation(format!("node {i} is in multiple splits")));
            }
            if masked && self.labels[i] >= self.num_classes {
                return Err(Error::Validation(format!(
                    "node {i} has label {} outside [0, {})",
                    self.labels[i], self.num_classes
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-2,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            patience: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidSpec("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub test_accuracy: f64,
    pub trace: LayerTrace,
}

/// Mean negative log softmax probability of the true class over masked nodes.
///
/// Returns the loss and its gradient with respect to the logits; gradient
/// rows of unmasked nodes are zero. Softmax uses max-subtraction.
pub fn masked_cross_entropy(
    logits: &Matrix,
    labels: &[usize],
    mask: &[bool],
) -> Result<(f64, Matrix)> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    if logits.rows() != labels.len() || logits.rows() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "logits have {} rows, {} labels, {} mask entries",
            logits.rows(),
            labels.len(),
            mask.len()
        )));
    }
    let inv_count = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        if !mask[i] {
            continue;
        }
        let label = labels[i];
        if label >= logits.cols() {
            return Err(Error::Validation(format!(
                "label {label} outside [0, {}) at node {i}",
                logits.cols()
            )));
        }
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = max + sum_exp.ln();
        loss += (log_sum - row[label]) * inv_count;
        let grad_row = grad.row_mut(i);
        for (j, (gr, &v)) in grad_row.iter_mut().zip(row).enumerate() {
            let softmax = (v - max).exp() / sum_exp;
            *gr = inv_count * (softmax - if j == label { 1.0 } else { 0.0 });
        }
    }
    Ok((loss, grad))
}

/// Fraction of masked nodes whose argmax logit equals the label. Argmax ties
/// break toward the smallest class index.
pub fn accuracy(logits: &Matrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mut correct = 0usize;
    for i in 0..logits.rows() {
        if !mask[i] {
            continue;
        }
        let row = logits.row(i);
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / count as f64)
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl AdamW {
    fn new(len: usize) -> AdamW {
        AdamW {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            // decoupled weight decay
            *p -= cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *p);
        }
    }
}

/// Train a model on the full graph. Returns the parameters with the best
/// validation accuracy and the training history.
pub fn train(spec: &ModelSpec, data: &LabeledData, cfg: &TrainConfig) -> Result<(Params, History)> {
    spec.validate()?;
    cfg.validate()?;
    data.validate()?;

    let mut spec = spec.clone();
    spec.seed = cfg.seed;
    let mut params = models::init_params(&spec)?;
    let mut flat = params.flatten();
    let mut optimizer = AdamW::new(flat.len());

    let mut history = History {
        train_loss: Vec::new(),
        train_accuracy: Vec::new(),
        val_accuracy: Vec::new(),
        test_accuracy: 0.0,
        trace: LayerTrace {
            energy: Vec::new(),
            entropy: Vec::new(),
            mean_norm: Vec::new(),
        },
    };
    let mut best_val = f64::NEG_INFINITY;
    let mut best_params = params.clone();
    let mut epochs_since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let (logits, _, cache) = models::forward_with_cache(&spec, &params, &data.graph, &data.features)
            .map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("epoch {epoch}: {msg}")),
                other => other,
            })?;
        let (loss, grad_logits) =
            masked_cross_entropy(&logits, &data.labels, &data.train_mask)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("epoch {epoch}: loss diverged")));
        }
        let grads = models::backward(&spec, &params, &data.graph, &cache, &grad_logits)?;

        history.train_loss.push(loss);
        history
            .train_accuracy
            .push(accuracy(&logits, &data.labels, &data.train_mask)?);
        let val_acc = accuracy(&logits, &data.labels, &data.val_mask)?;
        history.val_accuracy.push(val_acc);

        if val_acc > best_val {
            best_val = val_acc;
            best_params = params.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }

        let grad_flat = grads.flatten();
        optimizer.update(&mut flat, &grad_flat, cfg);
        params.assign_from_flat(&flat)?;
    }

    let (logits, trace) = models::forward(&spec, &best_params, &data.graph, &data.features)?;
    history.test_accuracy = accuracy(&logits, &data.labels, &data.test_mask)?;
    history.trace = trace;
    Ok((best_params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Variant;

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        let logits = Matrix::from_rows(&vec![vec![0.5; 4]; 3]).unwrap();
        let labels = vec![0, 1, 2];
        let mask = vec![true; 3];
        let (loss, _) = masked_cross_entropy(&logits, &labels, &mask).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn huge_true_logit_drives_loss_to_zero() {
        let logits = Matrix::from_rows(&[vec![1e6, 0.0]]).unwrap();
        let (loss, _) = masked_cross_entropy(&logits, &[0], &[true]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn loss_and_grad_match_hand_values() {
        let logits = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 2.0]]).unwrap();
        let labels = vec![0, 1];
        let mask = vec![true, true];
        let (loss, grad) = masked_cross_entropy(&logits, &labels, &mask).unwrap();
        // row 0: -log(e^1 / (e^1 + e^-1)); row 1: -log(e^2 / (1 + e^2))
        let l0 = -(1.0f64.exp() / (1.0f64.exp() + (-1.0f64).exp())).ln();
        let l1 = -(2.0f64.exp() / (1.0 + 2.0f64.exp())).ln();
        assert!((loss - 0.5 * (l0 + l1)).abs() < 1e-12);

        // finite differences on every logit entry
        let mut work = logits.clone();
        for i in 0..2 {
            for j in 0..2 {
                let h = 1e-6;
                let orig = work.get(i, j);
                work.set(i, j, orig + h);
                let (lp, _) = masked_cross_entropy(&work, &labels, &mask).unwrap();
                work.set(i, j, orig - h);
                let (lm, _) = masked_cross_entropy(&work, &labels, &mask).unwrap();
                work.set(i, j, orig);
                let fd = (lp - lm) / (2.0 * h);
                assert!(
                    (grad.get(i, j) - fd).abs() < 1e-8,
                    "grad mismatch at ({i},{j}): {} vs {fd}",
                    grad.get(i, j)
                );
            }
        }
    }

    #[test]
    fn unmasked_rows_get_zero_grad() {
        let logits = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.3, -0.4]]).unwrap();
        let (_, grad) = masked_cross_entropy(&logits, &[0, 1], &[false, true]).unwrap();
        assert_eq!(grad.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn empty_mask_rejected() {
        let logits = Matrix::zeros(2, 2);
        assert_eq!(
            masked_cross_entropy(&logits, &[0, 0], &[false, false]).unwrap_err(),
            Error::EmptyMask
        );
        assert_eq!(
            accuracy(&logits, &[0, 0], &[false, false]).unwrap_err(),
            Error::EmptyMask
        );
    }

    #[test]
    fn accuracy_perfect_and_zero() {
        let logits = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(accuracy(&logits, &[0, 1], &[true, true]).unwrap(), 1.0);
        assert_eq!(accuracy(&logits, &[1, 0], &[true, true]).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_fraction() {
        let logits =
            Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let acc = accuracy(&logits, &[0, 1, 1], &[true, true, true]).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_break_low() {
        let logits = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert_eq!(accuracy(&logits, &[0], &[true]).unwrap(), 1.0);
        assert_eq!(accuracy(&logits, &[1], &[true]).unwrap(), 0.0);
    }

    #[test]
    fn zero_depth_rejected() {
        let spec = ModelSpec {
            depth: 0,
            in_dim: 2,
            hidden_dim: 2,
            out_dim: 2,
            variant: Variant::Basic,
            lambda: 0.0,
            temperature: 1.0,
            residual: true,
            seed: 0,
        };
        assert!(spec.validate().is_err());
    }
}
