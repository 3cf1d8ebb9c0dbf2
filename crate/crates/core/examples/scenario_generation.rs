//! Simulated drives with noisy sensors and an injected GNSS outage, written
//! in the trajectory CSV format.

use gapfill::geo::{detect_outages, write_trajectory_log};
use gapfill::simgen::{corrupt, gen_scenario, ScenarioConfig, ScenarioKind};

fn main() -> gapfill::Result<()> {
    for kind in [
        ScenarioKind::Straight,
        ScenarioKind::RightAngleTurn,
        ScenarioKind::Curve,
    ] {
        let sc = ScenarioConfig::preset(kind, 7);
        let s = gen_scenario(&sc)?;
        let measured = corrupt(&s.truth, &sc)?;
        let gaps = detect_outages(&measured);
        println!(
            "{kind:?}: {} samples, {:.0} m driven, final heading {:.3} rad, {} outage(s) of {} points",
            s.truth.len(),
            s.distance[s.distance.len() - 1],
            s.headings[s.headings.len() - 1],
            gaps.len(),
            gaps.iter().map(|g| g.len()).sum::<usize>()
        );
    }
    let sc = ScenarioConfig::preset(ScenarioKind::Straight, 7);
    let csv = write_trajectory_log(&corrupt(&gen_scenario(&sc)?.truth, &sc)?);
    for line in csv.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
