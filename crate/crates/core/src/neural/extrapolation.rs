//! Extrapolation comparison between a NALU head and a saturating tanh head
//! with the same number of parameters, on the task `y = x1 + x2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::nalu::{NaluCell, NaluGrads};
use crate::error::Result;
use crate::linalg::Matrix;

/// `y = v . tanh(W x)` with `W` 2x2 and `v` 1x2: six parameters, the same
/// as a 2-input NALU.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhHead {
    pub w: Matrix,
    pub v: [f64; 2],
}

impl TanhHead {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let bound = 1.0;
        TanhHead {
            w: Matrix::from_fn(2, 2, |_, _| rng.random_range(-bound..bound)),
            v: [rng.random_range(-bound..bound), rng.random_range(-bound..bound)],
        }
    }

    pub fn forward(&self, x: &[f64; 2]) -> f64 {
        let z = self.w.matvec(x);
        self.v[0] * z[0].tanh() + self.v[1] * z[1].tanh()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.w.as_slice().to_vec();
        p.extend_from_slice(&self.v);
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        self.w.as_mut_slice().copy_from_slice(&p[..4]);
        self.v = [p[4], p[5]];
    }

    /// Mean squared error (halved) and its gradient over a batch.
    fn loss_grad(&self, xs: &[[f64; 2]], ys: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; 6];
        let mut loss = 0.0;
        let n = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.w.matvec(x);
            let t = [z[0].tanh(), z[1].tanh()];
            let r = self.v[0] * t[0] + self.v[1] * t[1] - y;
            loss += 0.5 * r * r / n;
            for i in 0..2 {
                let dz = r * self.v[i] * (1.0 - t[i] * t[i]) / n;
                grad[2 * i] += dz * x[0];
                grad[2 * i + 1] += dz * x[1];
                grad[4 + i] += r * t[i] / n;
            }
        }
        (loss, grad)
    }
}

fn nalu_params(cell: &NaluCell) -> Vec<f64> {
    let mut p = cell.w_hat.as_slice().to_vec();
    p.extend_from_slice(cell.m_hat.as_slice());
    p.extend_from_slice(cell.g.as_slice());
    p
}

fn set_nalu_params(cell: &mut NaluCell, p: &[f64]) {
    let k = cell.w_hat.as_slice().len();
    cell.w_hat.as_mut_slice().copy_from_slice(&p[..k]);
    cell.m_hat.as_mut_slice().copy_from_slice(&p[k..2 * k]);
    cell.g.as_mut_slice().copy_from_slice(&p[2 * k..]);
}

fn nalu_loss_grad(cell: &NaluCell, xs: &[[f64; 2]], ys: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut grads = NaluGrads::zeros(1, 2);
    let mut loss = 0.0;
    let n = xs.len() as f64;
    for (x, &y) in xs.iter().zip(ys) {
        let (out, cache) = cell.forward_cached(x)?;
        let r = out[0] - y;
        loss += 0.5 * r * r / n;
        cell.backward(&cache, &[r / n], &mut grads);
    }
    let mut g = grads.w_hat.as_slice().to_vec();
    g.extend_from_slice(grads.m_hat.as_slice());
    g.extend_from_slice(grads.g.as_slice());
    Ok((loss, g))
}

/// Plain full-batch Adam over a flat parameter vector.
fn adam_fit(
    params: &mut [f64],
    iterations: usize,
    lr: f64,
    mut loss_grad: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<()> {
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    for step in 1..=iterations {
        let (_, g) = loss_grad(params)?;
        let c1 = 1.0 - f64::powi(b1, step as i32);
        let c2 = 1.0 - f64::powi(b2, step as i32);
        for k in 0..params.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            params[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtrapolationReport {
    pub nalu_train_mse: f64,
    pub nalu_test_mse: f64,
    pub tanh_train_mse: f64,
    pub tanh_test_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationSetup {
    pub train_range: (f64, f64),
    pub test_range: (f64, f64),
    pub train_samples: usize,
    pub test_samples: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Independent initialisations per head. NALU training can settle in a
    /// local minimum on the multiplicative path.
    pub restarts: usize,
}

impl Default for ExtrapolationSetup {
    fn default() -> Self {
        ExtrapolationSetup {
            train_range: (0.0, 10.0),
            test_range: (50.0, 100.0),
            train_samples: 256,
            test_samples: 256,
            iterations: 3000,
            learning_rate: 0.02,
            restarts: 3,
        }
    }
}

fn mse(pred: impl Iterator<Item = f64>, ys: &[f64]) -> f64 {
    pred.zip(ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / ys.len() as f64
}

/// Fits both heads to `x1 + x2` on the training square and scores them on
/// the (disjoint, larger) test square.
pub fn compare_extrapolation(seed: u64, setup: &ExtrapolationSetup) -> Result<ExtrapolationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize, (lo, hi): (f64, f64)| -> (Vec<[f64; 2]>, Vec<f64>) {
        let xs: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(lo..hi), rng.random_range(lo..hi)])
            .collect();
        let ys = xs.iter().map(|x| x[0] + x[1]).collect();
        (xs, ys)
    };
    let (train_x, train_y) = draw(setup.train_samples, setup.train_range);
    let (test_x, test_y) = draw(setup.test_samples, setup.test_range);

    // Each head keeps the restart with the lowest training loss. Test data
    // plays no part in the choice.
    let mut nalu: Option<(f64, NaluCell)> = None;
    let mut tanh: Option<(f64, TanhHead)> = None;
    for _ in 0..setup.restarts.max(1) {
        let mut cell = NaluCell::init(1, 2, &mut rng);
        let mut p = nalu_params(&cell);
        {
            let mut probe = cell.clone();
            adam_fit(&mut p, setup.iterations, setup.learning_rate, |q| {
                set_nalu_params(&mut probe, q);
                nalu_loss_grad(&probe, &train_x, &train_y)
            })?;
        }
        set_nalu_params(&mut cell, &p);
        let loss = nalu_loss_grad(&cell, &train_x, &train_y)?.0;
        if nalu.as_ref().is_none_or(|(best, _)| loss < *best) {
            nalu = Some((loss, cell));
        }

        let mut head = TanhHead::init(&mut rng);
        let mut q = head.params();
        {
            let mut probe = head.clone();
            adam_fit(&mut q, setup.iterations, setup.learning_rate, |q| {
                probe.set_params(q);
                Ok(probe.loss_grad(&train_x, &train_y))
            })?;
        }
        head.set_params(&q);
        let loss = head.loss_grad(&train_x, &train_y).0;
        if tanh.as_ref().is_none_or(|(best, _)| loss < *best) {
            tanh = Some((loss, head));
        }
    }
    let (nalu, tanh) = (nalu.unwrap().1, tanh.unwrap().1);

    let nalu_pred =
        |xs: &[[f64; 2]]| -> Result<Vec<f64>> { xs.iter().map(|x| Ok(nalu.forward(x)?[0])).collect() };
    Ok(ExtrapolationReport {
        nalu_train_mse: mse(nalu_pred(&train_x)?.into_iter(), &train_y),
        nalu_test_mse: mse(nalu_pred(&test_x)?.into_iter(), &test_y),
        tanh_train_mse: mse(train_x.iter().map(|x| tanh.forward(x)), &train_y),
        tanh_test_mse: mse(test_x.iter().map(|x| tanh.forward(x)), &test_y),
    })
}
