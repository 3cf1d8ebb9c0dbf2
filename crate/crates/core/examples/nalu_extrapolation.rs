//! A NALU head against a tanh head on `x1 + x2`: both fit the training
//! square, only the NALU keeps working far outside it.

use gapfill::neural::{compare_extrapolation, ExtrapolationSetup};

fn main() -> gapfill::Result<()> {
    let setup = ExtrapolationSetup::default();
    println!(
        "train on [{}, {}]^2, test on [{}, {}]^2",
        setup.train_range.0, setup.train_range.1, setup.test_range.0, setup.test_range.1
    );
    println!("seed  nalu train  nalu test   tanh train  tanh test");
    for seed in 1..=5 {
        let r = compare_extrapolation(seed, &setup)?;
        println!(
            "{seed:>4}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.1}",
            r.nalu_train_mse, r.nalu_test_mse, r.tanh_train_mse, r.tanh_test_mse
        );
    }
    Ok(())
}
