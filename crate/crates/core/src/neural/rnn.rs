use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Vanilla tanh recurrent cell: `h' = tanh(W_x x + W_h h + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnCell {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
}

impl RnnCell {
    pub fn new(w_x: Matrix, w_h: Matrix, b: Vec<f64>) -> Result<Self> {
        let hidden = w_x.rows();
        if w_h.rows() != hidden || w_h.cols() != hidden || b.len() != hidden {
            return Err(Error::Dimension(format!(
                "recurrent cell: W_x {}x{}, W_h {}x{}, b {}",
                w_x.rows(),
                w_x.cols(),
                w_h.rows(),
                w_h.cols(),
                b.len()
            )));
        }
        if !(w_x.is_finite() && w_h.is_finite() && b.iter().all(|v| v.is_finite())) {
            return Err(Error::NumericInput("recurrent cell parameters".into()));
        }
        Ok(RnnCell { w_x, w_h, b })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        RnnCell {
            w_x: Matrix::zeros(hidden, input),
            w_h: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bx = (6.0 / (input + hidden) as f64).sqrt();
        let bh = (3.0 / hidden as f64).sqrt();
        let w_x = Matrix::from_fn(hidden, input, |_, _| rng.random_range(-bx..bx));
        let w_h = Matrix::from_fn(hidden, hidden, |_, _| rng.random_range(-bh..bh));
        RnnCell {
            w_x,
            w_h,
            b: vec![0.0; hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_x.rows()
    }

    pub fn step(&self, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.hidden_dim() || x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "recurrent step: hidden {} (want {}), input {} (want {})",
                h.len(),
                self.hidden_dim(),
                x.len(),
                self.input_dim()
            )));
        }
        let zx = self.w_x.matvec(x);
        let zh = self.w_h.matvec(h);
        Ok(zx
            .iter()
            .zip(&zh)
            .zip(&self.b)
            .map(|((a, b), c)| (a + b + c).tanh())
            .collect())
    }
}
