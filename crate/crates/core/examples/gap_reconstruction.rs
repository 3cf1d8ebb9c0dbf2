//! Full pipeline on synthetic drives: simulate, train on the valid spans,
//! fill the 40 s outage with every method and score against the truth.
//!
//! `cargo run --release --example gap_reconstruction -- right_angle_turn 3`

use gapfill::experiment::run_scenario;
use gapfill::recon::{Method, ReconConfig};
use gapfill::simgen::{ScenarioConfig, ScenarioKind};

fn main() -> gapfill::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: ScenarioKind = args.next().as_deref().unwrap_or("right_angle_turn").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let scenario = ScenarioConfig::preset(kind, seed);
    let mut recon = ReconConfig::default();
    recon.train.seed = seed;
    let run = run_scenario(&scenario, &recon, &Method::ALL)?;

    println!(
        "{kind:?} seed {seed}: trained {} epochs, loss {:.4} -> {:.4}",
        run.loss_history.len(),
        run.loss_history[0],
        run.loss_history[run.loss_history.len() - 1]
    );
    println!(
        "{:<13} {:>9} {:>12} {:>9}",
        "method", "rmse (m)", "midpoint (m)", "max (m)"
    );
    for (m, mm) in &run.metrics.methods {
        let max = mm.per_point.iter().copied().fold(0.0, f64::max);
        println!(
            "{:<13} {:>9.2} {:>12.2} {:>9.2}",
            m.as_str(),
            mm.rmse,
            mm.midpoint[0],
            max
        );
    }
    Ok(())
}
