//! Dead reckoning from OBD speed and yaw rate (the DR-OBD baseline).
//!
//! Each step moves `speed * dt` along the heading at the middle of the
//! interval, which is the chord direction of a constant-rate turn:
//!
//! ```text
//! pos[k]     = pos[k-1] + speed[k] * dt[k] * (cos h, sin h),  h = heading[k-1] + yaw_rate[k] * dt[k] / 2
//! heading[k] = heading[k-1] + yaw_rate[k] * dt[k]
//! ```
//!
//! where sample `k` describes the interval that ends at its timestamp.
//! Backward integration runs this recurrence in reverse so that it is the
//! exact inverse of the forward pass.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{PlanarPoint, SensorSample};

/// Minimum separation for a two-fix heading estimate, meters.
pub const MIN_HEADING_BASELINE_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Position, heading and sensor reading at the point integration starts from.
///
/// `sample.t` is the anchor time. Backward integration also needs the
/// anchor's own speed and yaw rate, since they describe the interval that
/// ends at the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorState {
    pub pos: PlanarPoint,
    /// Radians, east = 0, counter-clockwise positive, in (-pi, pi].
    pub heading: f64,
    pub sample: SensorSample,
}

impl AnchorState {
    pub fn new(pos: PlanarPoint, heading: f64, sample: SensorSample) -> Result<Self> {
        if !heading.is_finite() {
            return Err(Error::NumericInput(format!("anchor heading {heading}")));
        }
        Ok(AnchorState {
            pos,
            heading: normalize_angle(heading),
            sample,
        })
    }
}

/// One integrated state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrState {
    pub pos: PlanarPoint,
    /// Unwrapped heading, radians.
    pub heading: f64,
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Heading of travel from `p_prev` to `p_curr`.
pub fn estimate_heading(p_prev: PlanarPoint, p_curr: PlanarPoint) -> Result<f64> {
    let d = p_prev.distance(&p_curr);
    if !(d >= MIN_HEADING_BASELINE_M) {
        return Err(Error::InsufficientMotion { distance: d });
    }
    Ok((p_curr.y - p_prev.y).atan2(p_curr.x - p_prev.x))
}

/// Which end of a run of fixes the heading is wanted at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixEnd {
    First,
    Last,
}

/// Heading at one end of a run of consecutive valid fixes.
///
/// Every displacement between consecutive fixes is rotated by the yaw
/// integrated between its midpoint and the requested end, and the heading is
/// the direction of their vector sum. With two fixes and no yaw this is
/// exactly [`estimate_heading`]; longer runs average GNSS noise down.
pub fn estimate_anchor_heading(fixes: &[PlanarPoint], samples: &[SensorSample], end: FixEnd) -> Result<f64> {
    if fixes.len() != samples.len() {
        return Err(Error::Dimension(format!(
            "{} fixes but {} sensor samples",
            fixes.len(),
            samples.len()
        )));
    }
    if fixes.len() < 2 {
        return Err(Error::InsufficientMotion { distance: 0.0 });
    }
    let n = fixes.len();
    // rel[k]: heading at fix k minus heading at fix 0.
    let mut rel = vec![0.0; n];
    for k in 1..n {
        let dt = samples[k].t - samples[k - 1].t;
        if !(dt > 0.0) {
            return Err(Error::Ordering(format!(
                "fix times {} then {}",
                samples[k - 1].t,
                samples[k].t
            )));
        }
        rel[k] = rel[k - 1] + samples[k].yaw_rate * dt;
    }
    let reference = match end {
        FixEnd::First => 0.0,
        FixEnd::Last => rel[n - 1],
    };
    let (mut sx, mut sy) = (0.0, 0.0);
    for k in 1..n {
        let dx = fixes[k].x - fixes[k - 1].x;
        let dy = fixes[k].y - fixes[k - 1].y;
        let mid = 0.5 * (rel[k - 1] + rel[k]);
        let (s, c) = (reference - mid).sin_cos();
        sx += c * dx - s * dy;
        sy += s * dx + c * dy;
    }
    let norm = sx.hypot(sy);
    if !(norm >= MIN_HEADING_BASELINE_M) {
        return Err(Error::InsufficientMotion { distance: norm });
    }
    Ok(sy.atan2(sx))
}

/// Integrates speed and yaw rate from `anchor`, one output point per sample.
///
/// Forward: `samples` ascend in time, all after the anchor. Backward:
/// `samples` descend in time, all before the anchor, and the returned points
/// sit at the sample times walking back toward earlier time.
pub fn dead_reckon(
    anchor: &AnchorState,
    samples: &[SensorSample],
    direction: Direction,
) -> Result<Vec<PlanarPoint>> {
    Ok(dead_reckon_states(anchor, samples, direction)?
        .into_iter()
        .map(|s| s.pos)
        .collect())
}

/// [`dead_reckon`] that also reports the heading at each output point.
pub fn dead_reckon_states(
    anchor: &AnchorState,
    samples: &[SensorSample],
    direction: Direction,
) -> Result<Vec<DrState>> {
    let mut pos = anchor.pos;
    let mut heading = anchor.heading;
    let mut prev_t = anchor.sample.t;
    let mut out = Vec::with_capacity(samples.len());
    match direction {
        Direction::Forward => {
            for s in samples {
                let dt = s.t - prev_t;
                if !(dt > 0.0) {
                    return Err(Error::Ordering(format!(
                        "forward integration needs ascending times, got {} after {}",
                        s.t, prev_t
                    )));
                }
                let (sin, cos) = (heading + 0.5 * s.yaw_rate * dt).sin_cos();
                pos.x += s.speed * dt * cos;
                pos.y += s.speed * dt * sin;
                heading += s.yaw_rate * dt;
                out.push(DrState { pos, heading });
                prev_t = s.t;
            }
        }
        Direction::Backward => {
            let (mut speed, mut yaw_rate) = (anchor.sample.speed, anchor.sample.yaw_rate);
            for s in samples {
                let dt = prev_t - s.t;
                if !(dt > 0.0) {
                    return Err(Error::Ordering(format!(
                        "backward integration needs descending times, got {} after {}",
                        s.t, prev_t
                    )));
                }
                let (sin, cos) = (heading - 0.5 * yaw_rate * dt).sin_cos();
                pos.x -= speed * dt * cos;
                pos.y -= speed * dt * sin;
                heading -= yaw_rate * dt;
                out.push(DrState { pos, heading });
                speed = s.speed;
                yaw_rate = s.yaw_rate;
                prev_t = s.t;
            }
        }
    }
    Ok(out)
}
