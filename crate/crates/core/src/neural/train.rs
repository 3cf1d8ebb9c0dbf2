use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Displacement, RnnNaluModel, StepFeatures};
use crate::error::{Error, Result};

/// One training example: per-step features and target displacements.
pub type Sequence = (Vec<StepFeatures>, Vec<Displacement>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Global-norm gradient clip threshold.
    pub grad_clip: f64,
    /// L2 penalty added to the gradient of every parameter except the NALU
    /// gate. Shrinking the gate would leave the multiplicative path half open,
    /// which biases the output. Not included in the reported loss.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 500,
            seed: 0,
            optimizer: Optimizer::default(),
            grad_clip: 1.0,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Config(format!("weight_decay {}", self.weight_decay)));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config(format!("grad_clip {}", self.grad_clip)));
        }
        Ok(())
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Trains with a generator seeded from `cfg.seed`.
pub fn train(
    model: RnnNaluModel,
    dataset: &[Sequence],
    cfg: &TrainConfig,
) -> Result<(RnnNaluModel, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_with_rng(model, dataset, cfg, &mut rng)
}

/// Runs `cfg.epochs` passes over `dataset` in a shuffled order drawn from
/// `rng`, updating after every sequence. Returns the trained model and the
/// mean pre-update loss of each epoch.
pub fn train_with_rng(
    mut model: RnnNaluModel,
    dataset: &[Sequence],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(RnnNaluModel, Vec<f64>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let n_params = model.param_count();
    let mut adam = AdamState {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        step: 0,
    };
    let h0 = model.zero_state();
    // The gate matrix sits last in the flat parameter order.
    let decayed = n_params - model.head.g.as_slice().len();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let (inputs, targets) = &dataset[i];
            let (loss, grads) = model.bptt_gradients(inputs, &h0, targets).map_err(|e| match e {
                Error::NumericInput(_) => Error::Divergence { epoch },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            epoch_loss += loss;

            let mut params = model.params();
            let mut g = grads.flatten();
            if cfg.weight_decay > 0.0 {
                for (gi, p) in g.iter_mut().zip(&params).take(decayed) {
                    *gi += cfg.weight_decay * p;
                }
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            if norm > cfg.grad_clip {
                let s = cfg.grad_clip / norm;
                g.iter_mut().for_each(|v| *v *= s);
            }

            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, gi) in params.iter_mut().zip(&g) {
                        *p -= cfg.learning_rate * gi;
                    }
                }
                Optimizer::Adam {
                    beta1,
                    beta2,
                    epsilon,
                } => {
                    adam.step += 1;
                    let c1 = 1.0 - beta1.powi(adam.step);
                    let c2 = 1.0 - beta2.powi(adam.step);
                    for k in 0..n_params {
                        adam.m[k] = beta1 * adam.m[k] + (1.0 - beta1) * g[k];
                        adam.v[k] = beta2 * adam.v[k] + (1.0 - beta2) * g[k] * g[k];
                        let m_hat = adam.m[k] / c1;
                        let v_hat = adam.v[k] / c2;
                        params[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
            model.set_params(&params);
        }
        let mean = epoch_loss / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(mean);
    }
    Ok((model, history))
}
