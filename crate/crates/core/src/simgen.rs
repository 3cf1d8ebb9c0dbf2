//! Synthetic drive scenarios with sensor noise and GNSS outage injection.
//!
//! The ground truth is integrated exactly from a piecewise-constant speed and
//! yaw-rate program, so every geometric property of a scenario is known in
//! closed form. A sensor sample at time `t` reports the program value over
//! the interval ending at `t`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{from_local_enu, GeoPoint, PlanarPoint, TrackPoint, Trajectory};

/// Length of the turn in the right-angle scenario, seconds.
pub const TURN_DURATION_S: f64 = 10.0;
/// Total heading change over the middle third of the curve scenario.
pub const CURVE_ANGLE_RAD: f64 = PI / 3.0;
pub const DEFAULT_OUTAGE_S: f64 = 40.0;
pub const DEFAULT_DURATION_S: f64 = 160.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Straight,
    RightAngleTurn,
    Curve,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(ScenarioKind::Straight),
            "right_angle_turn" => Ok(ScenarioKind::RightAngleTurn),
            "curve" => Ok(ScenarioKind::Curve),
            other => Err(Error::Config(format!("unknown scenario kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub speed_sigma: f64,
    pub yaw_sigma: f64,
    pub yaw_bias: f64,
    pub gnss_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            speed_sigma: 0.3,
            yaw_sigma: 0.01,
            yaw_bias: 0.002,
            gnss_sigma: 3.0,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig {
            speed_sigma: 0.0,
            yaw_sigma: 0.0,
            yaw_bias: 0.0,
            gnss_sigma: 0.0,
        }
    }
}

/// Speed from `start` (seconds) until the next segment begins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSegment {
    pub start: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageWindow {
    pub start: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub duration: f64,
    /// Hz.
    pub rate: f64,
    pub speed_profile: Vec<SpeedSegment>,
    pub noise: NoiseConfig,
    pub outage: Option<OutageWindow>,
    pub seed: u64,
    pub origin: GeoPoint,
    /// Radians, east = 0.
    pub initial_heading: f64,
}

impl ScenarioConfig {
    /// Default scenario of the given kind: 160 s at 1 Hz with a 40 s outage
    /// centred on the middle of the drive.
    pub fn preset(kind: ScenarioKind, seed: u64) -> Self {
        let duration = DEFAULT_DURATION_S;
        let mid = duration / 2.0;
        let seg = |start: f64, speed: f64| SpeedSegment { start, speed };
        let speed_profile = match kind {
            ScenarioKind::Straight => vec![seg(0.0, 10.0), seg(50.0, 12.0), seg(110.0, 10.0)],
            // Slow into the corner, accelerate away after it.
            ScenarioKind::RightAngleTurn => vec![
                seg(0.0, 6.0),
                seg(mid + TURN_DURATION_S / 2.0, 9.0),
                seg(mid + TURN_DURATION_S / 2.0 + 10.0, 12.0),
            ],
            ScenarioKind::Curve => vec![seg(0.0, 10.0)],
        };
        ScenarioConfig {
            kind,
            duration,
            rate: 1.0,
            speed_profile,
            noise: NoiseConfig::default(),
            outage: Some(OutageWindow {
                start: mid - DEFAULT_OUTAGE_S / 2.0,
                length: DEFAULT_OUTAGE_S,
            }),
            seed,
            origin: GeoPoint {
                lat: 30.52,
                lon: 114.31,
            },
            initial_heading: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!("duration {}", self.duration)));
        }
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::Config(format!("rate {}", self.rate)));
        }
        if (self.duration * self.rate).round() < 2.0 {
            return Err(Error::Config("scenario yields fewer than 2 samples".into()));
        }
        let n = &self.noise;
        for (name, v) in [
            ("speed_sigma", n.speed_sigma),
            ("yaw_sigma", n.yaw_sigma),
            ("gnss_sigma", n.gnss_sigma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !n.yaw_bias.is_finite() {
            return Err(Error::Config("yaw_bias must be finite".into()));
        }
        if self.speed_profile.is_empty() {
            return Err(Error::Config("speed profile is empty".into()));
        }
        for w in self.speed_profile.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::Config("speed profile starts must increase".into()));
            }
        }
        if self
            .speed_profile
            .iter()
            .any(|s| !(s.speed >= 0.0) || !s.speed.is_finite() || !s.start.is_finite())
        {
            return Err(Error::Config("speeds must be finite and >= 0".into()));
        }
        if let Some(o) = self.outage {
            if !(o.start > 0.0 && o.length > 0.0 && o.start + o.length < self.duration) {
                return Err(Error::Config(format!(
                    "outage [{}, {}) must lie strictly inside (0, {})",
                    o.start,
                    o.start + o.length,
                    self.duration
                )));
            }
        }
        if self.kind == ScenarioKind::RightAngleTurn && self.duration < TURN_DURATION_S {
            return Err(Error::Config("right-angle turn needs at least 10 s".into()));
        }
        self.origin.validate()?;
        if !self.initial_heading.is_finite() {
            return Err(Error::Config("initial heading must be finite".into()));
        }
        Ok(())
    }

    /// Speed in force just before `t`.
    fn speed_before(&self, t: f64) -> f64 {
        self.speed_profile
            .iter()
            .take_while(|s| s.start < t)
            .last()
            .unwrap_or(&self.speed_profile[0])
            .speed
    }

    /// Yaw-rate program as `(start, end, rate)` windows; zero elsewhere.
    fn yaw_windows(&self) -> Vec<(f64, f64, f64)> {
        match self.kind {
            ScenarioKind::Straight => vec![],
            ScenarioKind::RightAngleTurn => {
                let mid = self.duration / 2.0;
                let half = TURN_DURATION_S / 2.0;
                vec![(mid - half, mid + half, (PI / 2.0) / TURN_DURATION_S)]
            }
            ScenarioKind::Curve => {
                // Snapped to the sample grid so each sample sees one yaw rate.
                let third = (self.duration * self.rate / 3.0).round() / self.rate;
                vec![(third, 2.0 * third, CURVE_ANGLE_RAD / third)]
            }
        }
    }

    fn yaw_before(&self, t: f64) -> f64 {
        self.yaw_windows()
            .into_iter()
            .find(|&(a, b, _)| t > a && t <= b)
            .map_or(0.0, |(_, _, w)| w)
    }
}

/// Ground truth of a generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// All points valid, clean sensors.
    pub truth: Trajectory,
    /// Positions in the frame of `config.origin` (the position at t = 0).
    pub planar: Vec<PlanarPoint>,
    /// True heading at each sample time.
    pub headings: Vec<f64>,
    /// Arc length driven up to each sample time.
    pub distance: Vec<f64>,
}

/// Advances `(pos, heading)` by `dt` at constant speed and yaw rate.
fn advance(pos: PlanarPoint, heading: f64, speed: f64, yaw_rate: f64, dt: f64) -> (PlanarPoint, f64) {
    let end = heading + yaw_rate * dt;
    let (dx, dy) = if (yaw_rate * dt).abs() < 1e-12 {
        let (s, c) = heading.sin_cos();
        (speed * dt * c, speed * dt * s)
    } else {
        let r = speed / yaw_rate;
        (r * (end.sin() - heading.sin()), r * (heading.cos() - end.cos()))
    };
    (PlanarPoint::new(pos.x + dx, pos.y + dy), end)
}

/// Generates the noise-free ground truth of `cfg`.
pub fn gen_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let n = (cfg.duration * cfg.rate).round() as usize;
    let times: Vec<f64> = (1..=n).map(|k| k as f64 / cfg.rate).collect();

    // Breakpoints where the program changes, so each piece is a clean arc.
    let mut breaks: Vec<f64> = cfg.speed_profile.iter().map(|s| s.start).collect();
    for (a, b, _) in cfg.yaw_windows() {
        breaks.push(a);
        breaks.push(b);
    }
    breaks.retain(|&b| b > 0.0 && b < cfg.duration);
    breaks.extend_from_slice(&times);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut pos = PlanarPoint::ORIGIN;
    let mut heading = cfg.initial_heading;
    let mut dist = 0.0;
    let mut prev = 0.0;
    let mut planar = Vec::with_capacity(n);
    let mut headings = Vec::with_capacity(n);
    let mut distance = Vec::with_capacity(n);
    let mut next_sample = 0;
    for &b in &breaks {
        if next_sample >= n {
            break;
        }
        let dt = b - prev;
        if dt > 0.0 {
            // Program values are constant on (prev, b].
            let v = cfg.speed_before(b);
            let w = cfg.yaw_before(b);
            (pos, heading) = advance(pos, heading, v, w, dt);
            dist += v * dt;
            prev = b;
        }
        if b == times[next_sample] {
            planar.push(pos);
            headings.push(heading);
            distance.push(dist);
            next_sample += 1;
        }
    }

    let points = times
        .iter()
        .zip(&planar)
        .map(|(&t, &p)| {
            let geo = from_local_enu(p, cfg.origin)?;
            Ok(TrackPoint::fix(t, geo, cfg.speed_before(t), cfg.yaw_before(t)))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = Trajectory::new(format!("{:?}-{}", cfg.kind, cfg.seed).to_lowercase(), points)?;
    Ok(Scenario {
        truth,
        planar,
        headings,
        distance,
    })
}

/// Adds sensor and GNSS noise drawn from `cfg.seed` and removes the fixes
/// inside the outage window. Timestamps are left untouched.
pub fn corrupt(truth: &Trajectory, cfg: &ScenarioConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = cfg.noise;
    let mut points = Vec::with_capacity(truth.len());
    for p in truth.points() {
        let (e_speed, e_yaw, e_x, e_y): (f64, f64, f64, f64) = (
            unit.sample(&mut rng),
            unit.sample(&mut rng),
            unit.sample(&mut rng),
            unit.sample(&mut rng),
        );
        let speed = (p.sensor.speed + noise.speed_sigma * e_speed).max(0.0);
        let yaw_rate = p.sensor.yaw_rate + noise.yaw_bias + noise.yaw_sigma * e_yaw;
        let in_outage = cfg
            .outage
            .is_some_and(|o| p.t >= o.start && p.t < o.start + o.length);
        let point = match p.geo {
            Some(geo) if p.gnss_valid && !in_outage => {
                let geo = if noise.gnss_sigma > 0.0 {
                    let q = truth.project(geo)?;
                    let noisy = PlanarPoint::new(q.x + noise.gnss_sigma * e_x, q.y + noise.gnss_sigma * e_y);
                    truth.unproject(noisy)?
                } else {
                    geo
                };
                TrackPoint::fix(p.t, geo, speed, yaw_rate)
            }
            _ => TrackPoint::outage(p.t, speed, yaw_rate),
        };
        points.push(point);
    }
    Trajectory::new(truth.id(), points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::detect_outages;

    fn quiet(kind: ScenarioKind) -> ScenarioConfig {
        ScenarioConfig {
            noise: NoiseConfig::none(),
            outage: None,
            ..ScenarioConfig::preset(kind, 3)
        }
    }

    #[test]
    fn straight_closed_form() {
        let cfg = ScenarioConfig {
            duration: 60.0,
            speed_profile: vec![SpeedSegment {
                start: 0.0,
                speed: 10.0,
            }],
            outage: None,
            initial_heading: 0.7,
            ..ScenarioConfig::preset(ScenarioKind::Straight, 1)
        };
        let sc = gen_scenario(&cfg).unwrap();
        assert_eq!(sc.truth.len(), 60);
        let end = sc.planar[59];
        assert!((end.x - 600.0 * 0.7f64.cos()).abs() < 1e-6);
        assert!((end.y - 600.0 * 0.7f64.sin()).abs() < 1e-6);
        // Same answer through the geodetic round trip.
        let via_geo = crate::geo::to_local_enu(sc.truth.points()[59].geo.unwrap(), cfg.origin).unwrap();
        assert!(via_geo.distance(&end) < 1e-6);
    }

    #[test]
    fn right_angle_turn_is_perpendicular() {
        let cfg = quiet(ScenarioKind::RightAngleTurn);
        let sc = gen_scenario(&cfg).unwrap();
        let first = sc.headings[0];
        let last = *sc.headings.last().unwrap();
        assert!((last - first - PI / 2.0).abs() < 1e-6);
        // And the final leg's chord really points that way.
        let n = sc.planar.len();
        let (a, b) = (sc.planar[n - 2], sc.planar[n - 1]);
        let chord = (b.y - a.y).atan2(b.x - a.x);
        assert!((chord - last).abs() < 1e-6);
    }

    #[test]
    fn path_length_matches_speed_integral() {
        for kind in [
            ScenarioKind::Straight,
            ScenarioKind::RightAngleTurn,
            ScenarioKind::Curve,
        ] {
            let cfg = quiet(kind);
            let sc = gen_scenario(&cfg).unwrap();
            // Integral of the piecewise-constant profile by hand.
            let mut integral = 0.0;
            for (i, seg) in cfg.speed_profile.iter().enumerate() {
                let end = cfg.speed_profile.get(i + 1).map_or(cfg.duration, |s| s.start);
                integral += seg.speed * (end.min(cfg.duration) - seg.start.max(0.0));
            }
            assert!((sc.distance.last().unwrap() - integral).abs() < 1e-6, "{kind:?}");
            // The sampled positions follow the arcs: chord sum never exceeds arc length.
            let chords: f64 = sc.planar.windows(2).map(|w| w[0].distance(&w[1])).sum::<f64>()
                + sc.planar[0].distance(&PlanarPoint::ORIGIN);
            assert!(chords <= integral + 1e-6);
            if kind == ScenarioKind::Straight {
                assert!((chords - integral).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::preset(ScenarioKind::Curve, 42);
        let a = corrupt(&gen_scenario(&cfg).unwrap().truth, &cfg).unwrap();
        let b = corrupt(&gen_scenario(&cfg).unwrap().truth, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_free_corrupt_is_identity() {
        let cfg = quiet(ScenarioKind::RightAngleTurn);
        let truth = gen_scenario(&cfg).unwrap().truth;
        assert_eq!(corrupt(&truth, &cfg).unwrap(), truth);
    }

    #[test]
    fn outage_free_corrupt_keeps_flags() {
        let cfg = ScenarioConfig {
            outage: None,
            ..ScenarioConfig::preset(ScenarioKind::Straight, 9)
        };
        let truth = gen_scenario(&cfg).unwrap().truth;
        let measured = corrupt(&truth, &cfg).unwrap();
        assert!(measured.points().iter().all(|p| p.gnss_valid));
    }

    #[test]
    fn forty_second_outage_at_one_hertz() {
        let cfg = ScenarioConfig::preset(ScenarioKind::Straight, 5);
        let truth = gen_scenario(&cfg).unwrap().truth;
        let measured = corrupt(&truth, &cfg).unwrap();
        let invalid: Vec<_> = measured.points().iter().filter(|p| !p.gnss_valid).collect();
        assert_eq!(invalid.len(), 40);
        assert!(invalid.iter().all(|p| p.geo.is_none()));
        assert_eq!(detect_outages(&measured).len(), 1);
        assert_eq!(
            measured.points().iter().map(|p| p.t).collect::<Vec<_>>(),
            truth.points().iter().map(|p| p.t).collect::<Vec<_>>()
        );
    }

    #[test]
    fn gnss_noise_has_configured_spread() {
        let cfg = ScenarioConfig {
            duration: 1000.0,
            outage: None,
            ..ScenarioConfig::preset(ScenarioKind::Straight, 12)
        };
        let truth = gen_scenario(&cfg).unwrap().truth;
        let measured = corrupt(&truth, &cfg).unwrap();
        let mut dx = Vec::new();
        for (m, t) in measured.points().iter().zip(truth.points()) {
            let a = truth.project(m.geo.unwrap()).unwrap();
            let b = truth.project(t.geo.unwrap()).unwrap();
            dx.push(a.x - b.x);
            dx.push(a.y - b.y);
        }
        let n = dx.len() as f64;
        let mean = dx.iter().sum::<f64>() / n;
        let std = (dx.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(
            (std - cfg.noise.gnss_sigma).abs() < 0.2 * cfg.noise.gnss_sigma,
            "std {std}"
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ScenarioConfig::preset(ScenarioKind::Straight, 0);
        cfg.outage = Some(OutageWindow {
            start: 150.0,
            length: 40.0,
        });
        assert!(matches!(gen_scenario(&cfg), Err(Error::Config(_))));
        let mut cfg = ScenarioConfig::preset(ScenarioKind::Straight, 0);
        cfg.rate = 0.0;
        assert!(gen_scenario(&cfg).is_err());
        let mut cfg = ScenarioConfig::preset(ScenarioKind::Straight, 0);
        cfg.noise.gnss_sigma = -1.0;
        assert!(gen_scenario(&cfg).is_err());
    }
}
