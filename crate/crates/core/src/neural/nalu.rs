//! Neural arithmetic logic unit.
//!
//! ```text
//! W = tanh(W_hat) * sigmoid(M_hat)          (elementwise)
//! a = W x                                   additive path
//! m = exp(W log(|x| + eps))                 multiplicative path
//! g = sigmoid(G x)
//! y = g * a + (1 - g) * m
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_EPS: f64 = 1e-7;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaluCell {
    pub w_hat: Matrix,
    pub m_hat: Matrix,
    pub g: Matrix,
    pub eps: f64,
}

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct NaluCache {
    x: Vec<f64>,
    tanh_w: Matrix,
    sig_m: Matrix,
    w: Matrix,
    log_x: Vec<f64>,
    a: Vec<f64>,
    m: Vec<f64>,
    gate: Vec<f64>,
}

/// Gradients with respect to the three parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct NaluGrads {
    pub w_hat: Matrix,
    pub m_hat: Matrix,
    pub g: Matrix,
}

impl NaluGrads {
    pub fn zeros(out: usize, inp: usize) -> Self {
        NaluGrads {
            w_hat: Matrix::zeros(out, inp),
            m_hat: Matrix::zeros(out, inp),
            g: Matrix::zeros(out, inp),
        }
    }
}

impl NaluCell {
    pub fn new(w_hat: Matrix, m_hat: Matrix, g: Matrix, eps: f64) -> Result<Self> {
        let shape = (w_hat.rows(), w_hat.cols());
        if (m_hat.rows(), m_hat.cols()) != shape || (g.rows(), g.cols()) != shape {
            return Err(Error::Dimension("NALU parameter matrices differ in shape".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "NALU eps must be positive, got {eps}"
            )));
        }
        if !(w_hat.is_finite() && m_hat.is_finite() && g.is_finite()) {
            return Err(Error::NumericInput("NALU parameters".into()));
        }
        Ok(NaluCell { w_hat, m_hat, g, eps })
    }

    /// Uniform Glorot initialisation of all three matrices.
    pub fn init<R: Rng + ?Sized>(out: usize, inp: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (inp + out) as f64).sqrt();
        let mut draw = || Matrix::from_fn(out, inp, |_, _| rng.random_range(-bound..bound));
        let w_hat = draw();
        let m_hat = draw();
        let g = draw();
        NaluCell {
            w_hat,
            m_hat,
            g,
            eps: DEFAULT_EPS,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_hat.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w_hat.rows()
    }

    /// Effective weight matrix `tanh(W_hat) * sigmoid(M_hat)`.
    pub fn weights(&self) -> Matrix {
        Matrix::from_fn(self.output_dim(), self.input_dim(), |r, c| {
            self.w_hat[(r, c)].tanh() * sigmoid(self.m_hat[(r, c)])
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, NaluCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "NALU expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInput(format!("NALU input {x:?}")));
        }
        let tanh_w = self.w_hat.map(f64::tanh);
        let sig_m = self.m_hat.map(sigmoid);
        let w = Matrix::from_fn(self.output_dim(), self.input_dim(), |r, c| {
            tanh_w[(r, c)] * sig_m[(r, c)]
        });
        let log_x: Vec<f64> = x.iter().map(|v| (v.abs() + self.eps).ln()).collect();
        let a = w.matvec(x);
        let m: Vec<f64> = w.matvec(&log_x).into_iter().map(f64::exp).collect();
        let gate: Vec<f64> = self.g.matvec(x).into_iter().map(sigmoid).collect();
        let y = (0..self.output_dim())
            .map(|i| gate[i] * a[i] + (1.0 - gate[i]) * m[i])
            .collect();
        Ok((
            y,
            NaluCache {
                x: x.to_vec(),
                tanh_w,
                sig_m,
                w,
                log_x,
                a,
                m,
                gate,
            },
        ))
    }

    /// Accumulates parameter gradients for upstream gradient `dy` into
    /// `grads` and returns the gradient with respect to the input.
    ///
    /// `d|x|/dx` is taken as `sign(x)`, zero at zero.
    pub fn backward(&self, cache: &NaluCache, dy: &[f64], grads: &mut NaluGrads) -> Vec<f64> {
        let out = self.output_dim();
        let mut da = vec![0.0; out];
        let mut dm_pre = vec![0.0; out];
        let mut dg_pre = vec![0.0; out];
        for i in 0..out {
            let g = cache.gate[i];
            da[i] = dy[i] * g;
            dm_pre[i] = dy[i] * (1.0 - g) * cache.m[i];
            dg_pre[i] = dy[i] * (cache.a[i] - cache.m[i]) * g * (1.0 - g);
        }

        let mut dw = Matrix::zeros(out, self.input_dim());
        dw.add_outer(&da, &cache.x);
        dw.add_outer(&dm_pre, &cache.log_x);
        grads.g.add_outer(&dg_pre, &cache.x);
        for r in 0..out {
            for c in 0..self.input_dim() {
                let t = cache.tanh_w[(r, c)];
                let s = cache.sig_m[(r, c)];
                grads.w_hat[(r, c)] += dw[(r, c)] * (1.0 - t * t) * s;
                grads.m_hat[(r, c)] += dw[(r, c)] * t * s * (1.0 - s);
            }
        }

        let from_add = cache.w.matvec_t(&da);
        let from_mul = cache.w.matvec_t(&dm_pre);
        let from_gate = self.g.matvec_t(&dg_pre);
        (0..self.input_dim())
            .map(|j| {
                let x = cache.x[j];
                let dlog = if x == 0.0 {
                    0.0
                } else {
                    x.signum() / (x.abs() + self.eps)
                };
                from_add[j] + from_mul[j] * dlog + from_gate[j]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(gate: f64) -> NaluCell {
        NaluCell::new(
            Matrix::filled(1, 2, 1e6),
            Matrix::filled(1, 2, 1e6),
            Matrix::filled(1, 2, gate),
            DEFAULT_EPS,
        )
        .unwrap()
    }

    #[test]
    fn additive_limit_sums() {
        let y = cell(1e6).forward(&[2.0, 3.0]).unwrap();
        assert!((y[0] - 5.0).abs() < 1e-3);
    }

    #[test]
    fn multiplicative_limit_multiplies() {
        let y = cell(-1e6).forward(&[2.0, 3.0]).unwrap();
        assert!((y[0] - 6.0).abs() / 6.0 < 0.02);
    }

    #[test]
    fn zero_input_stays_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = NaluCell::init(2, 4, &mut rng);
        let (y, cache) = c.forward_cached(&[0.0; 4]).unwrap();
        assert!(cache.a.iter().all(|&v| v == 0.0));
        assert!(y.iter().all(|v| v.is_finite()));
        let expected: Vec<f64> = c
            .weights()
            .matvec(&[DEFAULT_EPS.ln(); 4])
            .into_iter()
            .map(f64::exp)
            .collect();
        assert_eq!(cache.m, expected);
    }

    #[test]
    fn rejects_bad_input() {
        let c = cell(0.0);
        assert!(matches!(c.forward(&[f64::NAN, 1.0]), Err(Error::NumericInput(_))));
        assert!(matches!(c.forward(&[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(1e6), 1.0);
        assert_eq!(sigmoid(-1e6), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
