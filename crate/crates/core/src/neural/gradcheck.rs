//! Central finite-difference verification of the analytic BPTT gradients.

use super::model::{Displacement, RnnNaluModel, StepFeatures};
use crate::error::{Error, Result};

/// Per-parameter relative errors `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`,
/// in the order of [`RnnNaluModel::params`].
pub fn grad_check_report(
    model: &RnnNaluModel,
    inputs: &[StepFeatures],
    targets: &[Displacement],
    h: f64,
) -> Result<Vec<f64>> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }
    let h0 = model.zero_state();
    let (_, grads) = model.bptt_gradients(inputs, &h0, targets)?;
    let analytic = grads.flatten();
    let base = model.params();
    let mut probe = model.clone();
    let mut params = base.clone();
    let mut errors = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        params[k] = base[k] + h;
        probe.set_params(&params);
        let plus = probe.loss(inputs, &h0, targets)?;
        params[k] = base[k] - h;
        probe.set_params(&params);
        let minus = probe.loss(inputs, &h0, targets)?;
        params[k] = base[k];

        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-8);
        errors.push((analytic[k] - numeric).abs() / denom);
    }
    Ok(errors)
}

/// Largest relative gradient error over all parameters.
pub fn grad_check(
    model: &RnnNaluModel,
    inputs: &[StepFeatures],
    targets: &[Displacement],
    h: f64,
) -> Result<f64> {
    Ok(grad_check_report(model, inputs, targets, h)?
        .into_iter()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(
        seed: u64,
        hidden: usize,
        steps: usize,
    ) -> (RnnNaluModel, Vec<StepFeatures>, Vec<Displacement>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = RnnNaluModel::init(hidden, &mut rng);
        let inputs = (0..steps)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.5..1.5),
                ]
            })
            .collect();
        let targets = (0..steps)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        (model, inputs, targets)
    }

    #[test]
    fn small_random_model_passes() {
        let (m, x, y) = random_case(17, 4, 3);
        let err = grad_check(&m, &x, &y, 1e-5).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn saturated_gate_parameters_have_zero_error() {
        let (mut m, x, y) = random_case(5, 3, 2);
        // Positive hidden biases with a huge positive gate keep g exactly 1,
        // so the loss does not depend on G at all.
        m.cell.b = vec![5.0; 3];
        m.head.g = Matrix::filled(2, 3, 1e3);
        let report = grad_check_report(&m, &x, &y, 1e-5).unwrap();
        let g_offset = m.param_count() - 6;
        for e in &report[g_offset..] {
            assert!(*e < 1e-6, "{e}");
        }
    }

    #[test]
    fn max_does_not_depend_on_parameter_order() {
        let (m, x, y) = random_case(23, 3, 4);
        let report = grad_check_report(&m, &x, &y, 1e-5).unwrap();
        let forward = report.iter().copied().fold(0.0, f64::max);
        let reverse = report.iter().rev().copied().fold(0.0, f64::max);
        assert_eq!(forward, reverse);
        assert_eq!(forward, grad_check(&m, &x, &y, 1e-5).unwrap());
    }

    #[test]
    fn step_outside_range_is_rejected() {
        let (m, x, y) = random_case(1, 2, 2);
        assert!(grad_check(&m, &x, &y, 1e-2).is_err());
    }
}
