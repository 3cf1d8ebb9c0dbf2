//! Dead reckoning from speed and yaw rate, forward and back again.

use gapfill::deadreck::{dead_reckon, dead_reckon_states, AnchorState, Direction};
use gapfill::geo::{PlanarPoint, SensorSample};

fn main() -> gapfill::Result<()> {
    // 10 m/s with a gentle left turn; the circle has radius v/w = 100 m.
    let samples: Vec<SensorSample> = (1..=30)
        .map(|i| SensorSample {
            t: i as f64,
            speed: 10.0,
            yaw_rate: 0.1,
        })
        .collect();
    let start = SensorSample {
        t: 0.0,
        speed: 10.0,
        yaw_rate: 0.1,
    };
    let anchor = AnchorState::new(PlanarPoint::ORIGIN, 0.0, start)?;

    let fwd = dead_reckon_states(&anchor, &samples, Direction::Forward)?;
    let centre = PlanarPoint::new(0.0, 100.0);
    for (s, st) in samples.iter().zip(&fwd).step_by(5) {
        println!(
            "t={:>4.1}  x={:>8.3}  y={:>8.3}  heading={:>6.3}  off-circle={:.4} m",
            s.t,
            st.pos.x,
            st.pos.y,
            st.heading,
            (st.pos.distance(&centre) - 100.0).abs()
        );
    }

    // Walk back from the last state to the anchor.
    let end = fwd[fwd.len() - 1];
    let back_anchor = AnchorState::new(end.pos, end.heading, samples[samples.len() - 1])?;
    let mut back: Vec<SensorSample> = samples[..samples.len() - 1].iter().rev().copied().collect();
    back.push(start);
    let back = dead_reckon(&back_anchor, &back, Direction::Backward)?;
    println!(
        "round trip error: {:.2e} m",
        back[back.len() - 1].distance(&anchor.pos)
    );
    Ok(())
}
