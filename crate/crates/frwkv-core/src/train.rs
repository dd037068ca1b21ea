//! Training machinery: weighted L1 sequence loss with horizon weights
//! (t+1)^(-alpha), MSE/MAE evaluation, decoupled-weight-decay Adam, a cosine
//! learning-rate schedule stepped per epoch, and early stopping that only
//! activates after half of the scheduled epochs.

use serde::{Deserialize, Serialize};

use crate::data::{epoch_batches, WindowSet};
use crate::error::{Error, Result};
use crate::model::{Forecaster, NamedParam};
use crate::tensor::{backward, no_grad, Tensor};

/// Horizon weights w_t = (t+1)^(-alpha), t = 0..h-1; strictly decreasing for
/// alpha > 0.
pub fn horizon_weights(h: usize, alpha: f64) -> Vec<f64> {
    (0..h).map(|t| ((t + 1) as f64).powf(-alpha)).collect()
}

/// Weighted L1 sequence loss: the plain average of w_t * |pred - target|
/// over every (sample, step, variable) element. Differentiable; the
/// subgradient of |.| at 0 is 0.
pub fn weighted_l1_loss(pred: &Tensor, target: &Tensor, alpha: f64) -> Tensor {
    assert_eq!(
        pred.shape(),
        target.shape(),
        "loss shape mismatch: pred {:?} vs target {:?}",
        pred.shape(),
        target.shape()
    );
    assert_eq!(pred.rank(), 3, "loss expects [B,H,N], got {:?}", pred.shape());
    let h = pred.shape()[1];
    let weights = Tensor::new(horizon_weights(h, alpha), &[1, h, 1]);
    pred.sub(target).abs().mul(&weights).mean_all()
}

/// Standard MSE and MAE over all elements (evaluation only).
pub fn mse_mae(pred: &Tensor, target: &Tensor) -> (f64, f64) {
    assert_eq!(
        pred.shape(),
        target.shape(),
        "metric shape mismatch: pred {:?} vs target {:?}",
        pred.shape(),
        target.shape()
    );
    let p = pred.data();
    let t = target.data();
    let n = p.len() as f64;
    let mut se = 0.0;
    let mut ae = 0.0;
    for (a, b) in p.iter().zip(t.iter()) {
        let d = a - b;
        se += d * d;
        ae += d.abs();
    }
    (se / n, ae / n)
}

/// Cosine annealing, stepped per epoch, floor 0, no warmup.
pub fn cosine_lr(epoch: usize, epochs_max: usize, lr0: f64) -> f64 {
    assert!(epoch < epochs_max, "epoch {epoch} out of schedule 0..{epochs_max}");
    lr0 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs_max as f64).cos()) / 2.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs_max: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Horizon-weight exponent of the training loss.
    pub loss_alpha: f64,
    /// Shuffling seed for train batches (model init has its own seed).
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr: 1e-4,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs_max: 50,
            patience: 8,
            batch_size: 32,
            loss_alpha: 0.5,
            seed: 2024,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.weight_decay < 0.0 || !self.weight_decay.is_finite() {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.epochs_max == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs_max and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay. Moment buffers are keyed positionally
/// against the parameter list the optimizer was built with.
pub struct AdamW {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step_count: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
    names: Vec<String>,
}

impl AdamW {
    pub fn new(params: &[NamedParam], cfg: &OptimConfig) -> AdamW {
        AdamW {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            step_count: 0,
            moments: params
                .iter()
                .map(|p| (vec![0.0; p.tensor.numel()], vec![0.0; p.tensor.numel()]))
                .collect(),
            names: params.iter().map(|p| p.name.clone()).collect(),
        }
    }

    /// One update with the given learning rate. `grads[i]` pairs with
    /// `params[i]`; decay is applied to decay-eligible parameters only.
    pub fn step(&mut self, params: &[NamedParam], grads: &[Vec<f64>], lr: f64) {
        assert_eq!(params.len(), self.moments.len(), "optimizer/param list mismatch");
        assert_eq!(params.len(), grads.len(), "grads do not pair with params");
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((param, grad), (m, v)) in params.iter().zip(grads).zip(&mut self.moments) {
            debug_assert_eq!(param.tensor.numel(), grad.len());
            let mut data = param.tensor.data_mut();
            if param.decay && self.weight_decay > 0.0 {
                let shrink = 1.0 - lr * self.weight_decay;
                for x in data.iter_mut() {
                    *x *= shrink;
                }
            }
            for i in 0..grad.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Early stopping with delayed activation: the stop only fires once at least
/// half of the scheduled epochs have run AND no strict improvement has been
/// seen for `patience` epochs.
#[derive(Clone, Debug)]
pub struct EarlyStop {
    pub best_val: f64,
    pub best_epoch: usize,
    pub epochs_max: usize,
    pub patience: usize,
}

impl EarlyStop {
    pub fn new(epochs_max: usize, patience: usize) -> EarlyStop {
        EarlyStop {
            best_val: f64::INFINITY,
            best_epoch: 0,
            epochs_max,
            patience,
        }
    }

    /// `epoch` counts completed epochs starting at 1. Returns
    /// (improved, stop).
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        let improved = val_loss < self.best_val;
        if improved {
            self.best_val = val_loss;
            self.best_epoch = epoch;
        }
        let half = self.epochs_max.div_ceil(2);
        let stop = epoch >= half && epoch - self.best_epoch >= self.patience;
        (improved, stop)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub stopped: bool,
}

pub struct TrainOutcome {
    pub epochs_run: usize,
    pub best_val: f64,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

/// Mean weighted-L1 loss of the model over a window set (no gradients).
pub fn eval_loss(model: &Forecaster, set: &WindowSet, cfg: &OptimConfig) -> Result<f64> {
    no_grad(|| {
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in epoch_batches(set.count(), cfg.batch_size, None) {
            let (x, y) = set.batch(&batch);
            let pred = model.forward(&x)?;
            let elems = y.numel();
            total += weighted_l1_loss(&pred, &y, cfg.loss_alpha).item() * elems as f64;
            count += elems;
        }
        Ok(total / count as f64)
    })
}

/// MSE/MAE of the model over a window set (no gradients), on the z-scored
/// dataset scale.
pub fn eval_metrics(model: &Forecaster, set: &WindowSet, batch_size: usize) -> Result<(f64, f64)> {
    no_grad(|| {
        let mut se = 0.0;
        let mut ae = 0.0;
        let mut count = 0usize;
        for batch in epoch_batches(set.count(), batch_size, None) {
            let (x, y) = set.batch(&batch);
            let pred = model.forward(&x)?;
            let (mse, mae) = mse_mae(&pred, &y);
            let elems = y.numel();
            se += mse * elems as f64;
            ae += mae * elems as f64;
            count += elems;
        }
        Ok((se / count as f64, ae / count as f64))
    })
}

/// Repeat-last-value baseline metrics over a window set.
pub fn repeat_last_metrics(set: &WindowSet) -> (f64, f64) {
    let n = set.n_vars;
    let mut se = 0.0;
    let mut ae = 0.0;
    let mut count = 0usize;
    for i in 0..set.count() {
        let (x, y) = set.window(i);
        let last = &x[(set.input_len - 1) * n..];
        for h in 0..set.horizon {
            for j in 0..n {
                let d = y[h * n + j] - last[j];
                se += d * d;
                ae += d.abs();
                count += 1;
            }
        }
    }
    (se / count as f64, ae / count as f64)
}

/// Train in place with AdamW + cosine schedule + delayed early stopping.
/// On return the model carries the best-validation parameters.
pub fn train(
    model: &Forecaster,
    train_set: &WindowSet,
    val_set: &WindowSet,
    cfg: &OptimConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let params = model.params();
    let mut optimizer = AdamW::new(&params, cfg);
    let mut stopper = EarlyStop::new(cfg.epochs_max, cfg.patience);
    let mut best_snapshot: Vec<Vec<f64>> = params.iter().map(|p| p.tensor.to_vec()).collect();
    let mut log = Vec::new();
    let mut epochs_run = 0;

    for epoch_idx in 0..cfg.epochs_max {
        let lr = cosine_lr(epoch_idx, cfg.epochs_max, cfg.lr);
        let mut loss_sum = 0.0;
        let mut loss_elems = 0usize;
        let shuffle = cfg.seed.wrapping_add((epoch_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for batch in epoch_batches(train_set.count(), cfg.batch_size, Some(shuffle)) {
            let (x, y) = train_set.batch(&batch);
            let pred = model.forward(&x)?;
            let loss = weighted_l1_loss(&pred, &y, cfg.loss_alpha);
            let loss_value = loss.item();
            if !loss_value.is_finite() {
                return Err(Error::Divergence(format!(
                    "training loss became {loss_value} at epoch {}",
                    epoch_idx + 1
                )));
            }
            loss_sum += loss_value * y.numel() as f64;
            loss_elems += y.numel();
            let grads = backward(&loss);
            let grad_vecs: Vec<Vec<f64>> = params.iter().map(|p| grads.wrt(&p.tensor)).collect();
            optimizer.step(&params, &grad_vecs, lr);
        }

        let epoch = epoch_idx + 1;
        epochs_run = epoch;
        let val_loss = eval_loss(model, val_set, cfg)?;
        let (improved, stop) = stopper.update(epoch, val_loss);
        if improved {
            for (snap, p) in best_snapshot.iter_mut().zip(&params) {
                snap.copy_from_slice(&p.tensor.data());
            }
        }
        log.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / loss_elems as f64,
            val_loss,
            stopped: stop,
        });
        if stop {
            break;
        }
    }

    // restore the best checkpoint
    for (snap, p) in best_snapshot.iter().zip(&params) {
        p.tensor.data_mut().copy_from_slice(snap);
    }
    Ok(TrainOutcome {
        epochs_run,
        best_val: stopper.best_val,
        best_epoch: stopper.best_epoch,
        log,
    })
}
