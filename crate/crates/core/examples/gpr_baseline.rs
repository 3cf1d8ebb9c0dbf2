//! The GPR baseline on its own: fine near the anchors, back to the zero
//! prior mean in the middle of a long gap.

use gapfill::geo::detect_outages;
use gapfill::recon::{gpr_reconstruct, linear_interp, GprConfig};
use gapfill::simgen::{corrupt, gen_scenario, ScenarioConfig, ScenarioKind};

fn main() -> gapfill::Result<()> {
    let sc = ScenarioConfig::preset(ScenarioKind::Curve, 5);
    let truth = gen_scenario(&sc)?.truth;
    let measured = corrupt(&truth, &sc)?;
    let seg = detect_outages(&measured)[0];

    let gpr = gpr_reconstruct(&measured, &seg, &GprConfig::default(), 30)?;
    let lin = linear_interp(&seg, &measured)?;
    println!(" idx   gpr err  linear err");
    for (i, k) in seg.indices().enumerate().step_by(4) {
        let t = measured.project(truth.points()[k].geo.unwrap())?;
        println!(
            "{k:>4}  {:>8.1}  {:>10.1}",
            gpr.points[i].distance(&t),
            lin.points[i].distance(&t)
        );
    }
    Ok(())
}
