//! Finite-difference check of the RNN+NALU backpropagation-through-time gradients.

use gapfill::neural::{grad_check_report, RnnNaluModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gapfill::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (hidden, steps) in [(2, 1), (4, 3), (8, 5)] {
        let model = RnnNaluModel::init(hidden, &mut rng);
        let inputs: Vec<[f64; 3]> = (0..steps)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0])
            .collect();
        let targets: Vec<[f64; 2]> = (0..steps)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let errs = grad_check_report(&model, &inputs, &targets, 1e-5)?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        println!(
            "hidden {hidden}, T {steps}: {} parameters, max relative error {worst:.2e}",
            errs.len()
        );
    }
    Ok(())
}
