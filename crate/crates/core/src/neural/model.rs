//! Recurrent network with a NALU output head, its forward pass and exact
//! backpropagation through time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nalu::{NaluCache, NaluCell, NaluGrads};
use super::rnn::RnnCell;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Per-step input features: speed (m/s), yaw rate (rad/s), step length (s).
pub const INPUT_DIM: usize = 3;
/// Per-step output: planar displacement (m).
pub const OUTPUT_DIM: usize = 2;
pub const DEFAULT_HIDDEN: usize = 16;

pub type StepFeatures = [f64; INPUT_DIM];
pub type Displacement = [f64; OUTPUT_DIM];

/// Input standardization and output scale, fitted on the training set and
/// stored with the model. The network runs on `(x - mean) / std` and its
/// output is multiplied by `target_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_mean: [f64; INPUT_DIM],
    pub input_std: [f64; INPUT_DIM],
    pub target_scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            input_mean: [0.0; INPUT_DIM],
            input_std: [1.0; INPUT_DIM],
            target_scale: 1.0,
        }
    }
}

impl Normalization {
    /// Feature mean/std and the RMS target norm over every step of `dataset`.
    /// Constant features keep unit std.
    pub fn fit(dataset: &[(Vec<StepFeatures>, Vec<Displacement>)]) -> Self {
        let mut n = 0usize;
        let mut sum = [0.0; INPUT_DIM];
        let mut sq_target = 0.0;
        for (inputs, targets) in dataset {
            for x in inputs {
                for k in 0..INPUT_DIM {
                    sum[k] += x[k];
                }
                n += 1;
            }
            for y in targets {
                sq_target += y[0] * y[0] + y[1] * y[1];
            }
        }
        if n == 0 {
            return Normalization::default();
        }
        let mean = sum.map(|s| s / n as f64);
        let mut var = [0.0; INPUT_DIM];
        for (inputs, _) in dataset {
            for x in inputs {
                for k in 0..INPUT_DIM {
                    var[k] += (x[k] - mean[k]).powi(2);
                }
            }
        }
        let std = var.map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 1e-9 {
                s
            } else {
                1.0
            }
        });
        let rms = (sq_target / n as f64).sqrt();
        Normalization {
            input_mean: mean,
            input_std: std,
            target_scale: if rms > 1e-9 { rms } else { 1.0 },
        }
    }

    /// Raises each input std to at least `floor`, so a feature that barely
    /// varies in training is not blown up to unit scale.
    pub fn with_min_std(mut self, floor: [f64; INPUT_DIM]) -> Self {
        for (s, f) in self.input_std.iter_mut().zip(floor) {
            *s = s.max(f);
        }
        self
    }

    fn apply(&self, x: &StepFeatures) -> [f64; INPUT_DIM] {
        let mut out = [0.0; INPUT_DIM];
        for k in 0..INPUT_DIM {
            out[k] = (x[k] - self.input_mean[k]) / self.input_std[k];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnNaluModel {
    pub cell: RnnCell,
    pub head: NaluCell,
    pub norm: Normalization,
}

/// Gradients shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
    pub head: NaluGrads,
}

impl ModelGrads {
    pub fn zeros(hidden: usize) -> Self {
        ModelGrads {
            w_x: Matrix::zeros(hidden, INPUT_DIM),
            w_h: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
            head: NaluGrads::zeros(OUTPUT_DIM, hidden),
        }
    }

    /// Flattened in the same order as [`RnnNaluModel::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(self.w_x.as_slice());
        v.extend_from_slice(self.w_h.as_slice());
        v.extend_from_slice(&self.b);
        v.extend_from_slice(self.head.w_hat.as_slice());
        v.extend_from_slice(self.head.m_hat.as_slice());
        v.extend_from_slice(self.head.g.as_slice());
        v
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct SequenceCache {
    inputs: Vec<[f64; INPUT_DIM]>,
    /// `hidden[0]` is `h0`; `hidden[t + 1]` follows input `t`.
    hidden: Vec<Vec<f64>>,
    heads: Vec<NaluCache>,
    /// Raw network outputs before `target_scale`.
    outputs: Vec<Displacement>,
}

impl RnnNaluModel {
    /// Random initialisation drawing from `rng`.
    pub fn init<R: Rng + ?Sized>(hidden_dim: usize, rng: &mut R) -> Self {
        let cell = RnnCell::init(INPUT_DIM, hidden_dim, rng);
        let head = NaluCell::init(OUTPUT_DIM, hidden_dim, rng);
        RnnNaluModel {
            cell,
            head,
            norm: Normalization::default(),
        }
    }

    pub fn new(cell: RnnCell, head: NaluCell, norm: Normalization) -> Result<Self> {
        if cell.input_dim() != INPUT_DIM {
            return Err(Error::Dimension(format!(
                "recurrent cell takes {} inputs, model needs {INPUT_DIM}",
                cell.input_dim()
            )));
        }
        if head.input_dim() != cell.hidden_dim() || head.output_dim() != OUTPUT_DIM {
            return Err(Error::Dimension(format!(
                "head is {}x{}, expected {OUTPUT_DIM}x{}",
                head.output_dim(),
                head.input_dim(),
                cell.hidden_dim()
            )));
        }
        Ok(RnnNaluModel { cell, head, norm })
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.hidden_dim()]
    }

    pub fn param_count(&self) -> usize {
        let h = self.hidden_dim();
        h * INPUT_DIM + h * h + h + 3 * OUTPUT_DIM * h
    }

    /// All trainable parameters, flattened as
    /// `W_x, W_h, b, W_hat, M_hat, G` (matrices row-major).
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(self.cell.w_x.as_slice());
        v.extend_from_slice(self.cell.w_h.as_slice());
        v.extend_from_slice(&self.cell.b);
        v.extend_from_slice(self.head.w_hat.as_slice());
        v.extend_from_slice(self.head.m_hat.as_slice());
        v.extend_from_slice(self.head.g.as_slice());
        v
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter vector length");
        let mut rest = flat;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(self.cell.w_x.as_mut_slice());
        take(self.cell.w_h.as_mut_slice());
        take(&mut self.cell.b);
        take(self.head.w_hat.as_mut_slice());
        take(self.head.m_hat.as_mut_slice());
        take(self.head.g.as_mut_slice());
    }

    /// Runs the recurrence over `inputs` from `h0`, emitting one
    /// displacement per step.
    pub fn forward_sequence(
        &self,
        inputs: &[StepFeatures],
        h0: &[f64],
    ) -> Result<(Vec<Displacement>, SequenceCache)> {
        if h0.len() != self.hidden_dim() {
            return Err(Error::Dimension(format!(
                "initial state has {} entries, hidden size is {}",
                h0.len(),
                self.hidden_dim()
            )));
        }
        let mut cache = SequenceCache {
            inputs: Vec::with_capacity(inputs.len()),
            hidden: Vec::with_capacity(inputs.len() + 1),
            heads: Vec::with_capacity(inputs.len()),
            outputs: Vec::with_capacity(inputs.len()),
        };
        cache.hidden.push(h0.to_vec());
        let mut displacements = Vec::with_capacity(inputs.len());
        for x in inputs {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericInput(format!("step features {x:?}")));
            }
            let xn = self.norm.apply(x);
            let h = self.cell.step(cache.hidden.last().unwrap(), &xn)?;
            let (y, head_cache) = self.head.forward_cached(&h)?;
            let out = [y[0], y[1]];
            if !(out[0].is_finite() && out[1].is_finite()) {
                return Err(Error::NumericInput("network output overflowed".into()));
            }
            displacements.push(out.map(|v| v * self.norm.target_scale));
            cache.inputs.push(xn);
            cache.hidden.push(h);
            cache.heads.push(head_cache);
            cache.outputs.push(out);
        }
        Ok((displacements, cache))
    }

    /// Convenience wrapper: displacements from a zero initial state.
    pub fn predict(&self, inputs: &[StepFeatures]) -> Result<Vec<Displacement>> {
        Ok(self.forward_sequence(inputs, &self.zero_state())?.0)
    }

    /// Loss `1/(2T) sum |y_hat - y|^2` (in target-scale units) and its exact
    /// gradient with respect to every parameter.
    pub fn bptt_gradients(
        &self,
        inputs: &[StepFeatures],
        h0: &[f64],
        targets: &[Displacement],
    ) -> Result<(f64, ModelGrads)> {
        if inputs.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let (_, cache) = self.forward_sequence(inputs, h0)?;
        Ok(self.backward(&cache, targets))
    }

    pub(crate) fn loss(&self, inputs: &[StepFeatures], h0: &[f64], targets: &[Displacement]) -> Result<f64> {
        let (pred, _) = self.forward_sequence(inputs, h0)?;
        let scale = self.norm.target_scale;
        let t = targets.len().max(1) as f64;
        Ok(pred
            .iter()
            .zip(targets)
            .map(|(p, y)| ((p[0] - y[0]) / scale).powi(2) + ((p[1] - y[1]) / scale).powi(2))
            .sum::<f64>()
            / (2.0 * t))
    }

    fn backward(&self, cache: &SequenceCache, targets: &[Displacement]) -> (f64, ModelGrads) {
        let hidden = self.hidden_dim();
        let steps = targets.len();
        let mut grads = ModelGrads::zeros(hidden);
        if steps == 0 {
            return (0.0, grads);
        }
        let inv_t = 1.0 / steps as f64;
        let scale = self.norm.target_scale;

        let mut loss = 0.0;
        let mut dh_next = vec![0.0; hidden];
        for t in (0..steps).rev() {
            let out = cache.outputs[t];
            let resid = [out[0] - targets[t][0] / scale, out[1] - targets[t][1] / scale];
            loss += resid[0] * resid[0] + resid[1] * resid[1];
            let dy = [resid[0] * inv_t, resid[1] * inv_t];

            let mut dh = self.head.backward(&cache.heads[t], &dy, &mut grads.head);
            for (a, b) in dh.iter_mut().zip(&dh_next) {
                *a += b;
            }
            let h = &cache.hidden[t + 1];
            let dz: Vec<f64> = dh.iter().zip(h).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
            grads.w_x.add_outer(&dz, &cache.inputs[t]);
            grads.w_h.add_outer(&dz, &cache.hidden[t]);
            for (gb, d) in grads.b.iter_mut().zip(&dz) {
                *gb += d;
            }
            dh_next = self.cell.w_h.matvec_t(&dz);
        }
        (loss * 0.5 * inv_t, grads)
    }
}
