//! Link prediction between users: dwell-grid features, a signed hash sketch,
//! cosine scores and a calibrated threshold.

use gapfill::similarity::{evaluate_pairs, synthetic_population, SimilarityConfig};

fn main() -> gapfill::Result<()> {
    let (trajs, labels) = synthetic_population(6, 4, 11)?;
    println!("{} trajectories, {} labeled pairs", trajs.len(), labels.len());

    let report = evaluate_pairs(&trajs, &labels, &SimilarityConfig::default())?;
    let cm = report.confusion;
    println!(
        "threshold {:.3} (from {} calibration pairs)",
        report.threshold, report.calibration_pairs
    );
    println!("tp {}  fp {}  tn {}  fn {}", cm.tp, cm.fp, cm.tn, cm.fn_);
    if let Some(tnr) = report.tnr {
        println!("true negative rate {tnr:.3}");
    }
    for s in report.scores.iter().take(6) {
        println!("{:>6} {:>6}  {:.3}  linked={}", s.id_a, s.id_b, s.score, s.linked);
    }
    Ok(())
}
