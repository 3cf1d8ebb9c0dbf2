//! Domain types, the local planar frame, trajectory log ingestion and
//! outage detection.
//!
//! Positions are carried as geodetic [`GeoPoint`]s and projected into a local
//! east/north frame ([`PlanarPoint`], meters) about a trajectory's anchor with
//! an equirectangular approximation. That is accurate to well below a meter
//! for the sub-kilometer spans a GNSS outage covers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseErrorKind, Result};

/// Mean Earth radius used by the local projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Exact header of the trajectory log CSV.
pub const CSV_HEADER: &str = "t,lat,lon,gnss_valid,speed,yaw_rate";

const COLUMNS: [&str; 6] = ["t", "lat", "lon", "gnss_valid", "speed", "yaw_rate"];

/// Geodetic position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "coordinate out of range: lat {}, lon {}",
                self.lat, self.lon
            )))
        }
    }
}

/// Local planar position: meters east (`x`) and north (`y`) of an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const ORIGIN: PlanarPoint = PlanarPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One tick of the on-board sensors: OBD speed and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    /// Seconds.
    pub t: f64,
    /// m/s, non-negative.
    pub speed: f64,
    /// rad/s, counter-clockwise positive.
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub geo: Option<GeoPoint>,
    pub gnss_valid: bool,
    pub sensor: SensorSample,
}

impl TrackPoint {
    /// A point with a valid GNSS fix.
    pub fn fix(t: f64, geo: GeoPoint, speed: f64, yaw_rate: f64) -> Self {
        TrackPoint {
            t,
            geo: Some(geo),
            gnss_valid: true,
            sensor: SensorSample { t, speed, yaw_rate },
        }
    }

    /// A point recorded during a GNSS outage (sensors only).
    pub fn outage(t: f64, speed: f64, yaw_rate: f64) -> Self {
        TrackPoint {
            t,
            geo: None,
            gnss_valid: false,
            sensor: SensorSample { t, speed, yaw_rate },
        }
    }
}

/// A time-ordered vehicle track with its local-frame anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    id: String,
    points: Vec<TrackPoint>,
    anchor: GeoPoint,
}

impl Trajectory {
    /// Validates the track invariants and picks the first valid fix as anchor.
    pub fn new(id: impl Into<String>, points: Vec<TrackPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "trajectory needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() || p.sensor.t != p.t {
                return Err(Error::InvalidInput(format!(
                    "point {i}: sensor time must equal point time"
                )));
            }
            if !(p.sensor.speed >= 0.0) || !p.sensor.yaw_rate.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "point {i}: invalid sensor sample (speed {}, yaw rate {})",
                    p.sensor.speed, p.sensor.yaw_rate
                )));
            }
            match (p.gnss_valid, p.geo) {
                (true, None) => {
                    return Err(Error::InvalidInput(format!(
                        "point {i}: valid fix without coordinates"
                    )))
                }
                (_, Some(g)) => g.validate()?,
                _ => {}
            }
            if i > 0 && !(p.t > points[i - 1].t) {
                return Err(Error::Ordering(format!(
                    "point {i}: timestamp {} does not increase over {}",
                    p.t,
                    points[i - 1].t
                )));
            }
        }
        let anchor = points
            .iter()
            .find(|p| p.gnss_valid)
            .and_then(|p| p.geo)
            .ok_or_else(|| Error::InvalidInput("trajectory has no valid fix".into()))?;
        Ok(Trajectory {
            id: id.into(),
            points,
            anchor,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn anchor(&self) -> GeoPoint {
        self.anchor
    }

    pub fn duration(&self) -> f64 {
        self.points[self.points.len() - 1].t - self.points[0].t
    }

    pub fn validity_mask(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.gnss_valid).collect()
    }

    /// Planar position of point `idx` in this trajectory's frame, if it has a fix.
    pub fn planar(&self, idx: usize) -> Option<PlanarPoint> {
        let p = self.points.get(idx)?;
        if !p.gnss_valid {
            return None;
        }
        p.geo.and_then(|g| to_local_enu(g, self.anchor).ok())
    }

    /// Planar position of an arbitrary geodetic point in this trajectory's frame.
    pub fn project(&self, geo: GeoPoint) -> Result<PlanarPoint> {
        to_local_enu(geo, self.anchor)
    }

    pub fn unproject(&self, p: PlanarPoint) -> Result<GeoPoint> {
        from_local_enu(p, self.anchor)
    }
}

/// Maximal run of invalid points `[start_idx, end_idx]` bracketed by the
/// valid anchors `pre_anchor_idx` and `post_anchor_idx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutageSegment {
    pub start_idx: usize,
    pub end_idx: usize,
    pub pre_anchor_idx: usize,
    pub post_anchor_idx: usize,
}

impl OutageSegment {
    /// Number of missing points.
    pub fn len(&self) -> usize {
        self.end_idx - self.start_idx + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start_idx..=self.end_idx
    }
}

/// Projects `p` into the east/north frame centred on `anchor`.
pub fn to_local_enu(p: GeoPoint, anchor: GeoPoint) -> Result<PlanarPoint> {
    p.validate()?;
    anchor.validate()?;
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let x = k * (p.lon - anchor.lon) * anchor.lat.to_radians().cos();
    let y = k * (p.lat - anchor.lat);
    Ok(PlanarPoint { x, y })
}

/// Inverse of [`to_local_enu`] at the same anchor.
pub fn from_local_enu(p: PlanarPoint, anchor: GeoPoint) -> Result<GeoPoint> {
    if !p.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite planar point ({}, {})",
            p.x, p.y
        )));
    }
    anchor.validate()?;
    if anchor.lat.abs() >= 90.0 {
        return Err(Error::DegenerateAnchor { lat: anchor.lat });
    }
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let lat = anchor.lat + p.y / k;
    let lon = anchor.lon + p.x / (k * anchor.lat.to_radians().cos());
    Ok(GeoPoint { lat, lon })
}

/// Outcome of ingesting a log: the trajectory plus how many unbracketable
/// invalid rows were dropped from either end.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub trajectory: Trajectory,
    pub trimmed_leading: usize,
    pub trimmed_trailing: usize,
}

impl ParsedLog {
    pub fn trimmed(&self) -> bool {
        self.trimmed_leading + self.trimmed_trailing > 0
    }
}

/// Parses a `t,lat,lon,gnss_valid,speed,yaw_rate` log.
///
/// Rows are numbered from 1 (the first data row) in errors. Invalid rows
/// before the first or after the last valid fix are trimmed and counted in
/// the returned [`ParsedLog`].
pub fn parse_trajectory_log(text: &str) -> Result<ParsedLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            kind: ParseErrorKind::Header(e.to_string()),
        })?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != COLUMNS {
        if let Some(missing) = COLUMNS.iter().find(|c| !names.contains(c)) {
            return Err(Error::Parse {
                row: 0,
                kind: ParseErrorKind::MissingColumn(missing),
            });
        }
        return Err(Error::Parse {
            row: 0,
            kind: ParseErrorKind::Header(names.join(",")),
        });
    }

    let mut points: Vec<TrackPoint> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            kind: ParseErrorKind::BadValue {
                column: "t",
                value: e.to_string(),
            },
        })?;
        if record.len() < COLUMNS.len() {
            return Err(Error::Parse {
                row,
                kind: ParseErrorKind::MissingColumn(COLUMNS[record.len()]),
            });
        }
        let field = |col: usize| record.get(col).unwrap_or("");
        let num = |col: usize| -> Result<f64> {
            let raw = field(col);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    kind: ParseErrorKind::BadValue {
                        column: COLUMNS[col],
                        value: raw.to_string(),
                    },
                })
        };

        let t = num(0)?;
        let gnss_valid = match field(3) {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    row,
                    kind: ParseErrorKind::BadValue {
                        column: "gnss_valid",
                        value: other.to_string(),
                    },
                })
            }
        };
        let speed = num(4)?;
        let yaw_rate = num(5)?;
        if speed < 0.0 {
            return Err(Error::Parse {
                row,
                kind: ParseErrorKind::NegativeSpeed(speed),
            });
        }
        if let Some(prev) = points.last() {
            if t <= prev.t {
                return Err(Error::Parse {
                    row,
                    kind: ParseErrorKind::NonMonotoneTimestamp { t, prev: prev.t },
                });
            }
        }
        let point = if gnss_valid {
            let (lat, lon) = (num(1)?, num(2)?);
            let geo = GeoPoint { lat, lon };
            if !geo.is_valid() {
                return Err(Error::Parse {
                    row,
                    kind: ParseErrorKind::OutOfRange { lat, lon },
                });
            }
            TrackPoint::fix(t, geo, speed, yaw_rate)
        } else {
            TrackPoint::outage(t, speed, yaw_rate)
        };
        points.push(point);
    }

    if points.len() < 2 {
        return Err(Error::Parse {
            row: points.len(),
            kind: ParseErrorKind::TooFewRows(points.len()),
        });
    }

    let total = points.len();
    let first = points.iter().position(|p| p.gnss_valid);
    let last = points.iter().rposition(|p| p.gnss_valid);
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) => (f, l),
        _ => {
            return Err(Error::Parse {
                row: total,
                kind: ParseErrorKind::NoValidFix,
            })
        }
    };
    let kept: Vec<TrackPoint> = points[first..=last].to_vec();
    if kept.len() < 2 {
        return Err(Error::Parse {
            row: last + 1,
            kind: ParseErrorKind::TooFewRows(kept.len()),
        });
    }
    Ok(ParsedLog {
        trajectory: Trajectory::new("trajectory", kept)?,
        trimmed_leading: first,
        trimmed_trailing: total - 1 - last,
    })
}

/// Serializes a trajectory in the log schema. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_trajectory_log(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(48 * (traj.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in traj.points() {
        match (p.gnss_valid, p.geo) {
            (true, Some(g)) => {
                let _ = writeln!(
                    out,
                    "{},{},{},1,{},{}",
                    p.t, g.lat, g.lon, p.sensor.speed, p.sensor.yaw_rate
                );
            }
            _ => {
                let _ = writeln!(out, "{},,,0,{},{}", p.t, p.sensor.speed, p.sensor.yaw_rate);
            }
        }
    }
    out
}

/// Finds the maximal runs of invalid points together with their bracketing
/// valid anchors. Runs touching either end of the track cannot be bracketed
/// and are skipped; ingestion trims them away in any case.
pub fn detect_outages(traj: &Trajectory) -> Vec<OutageSegment> {
    outages_from_mask(&traj.validity_mask())
}

pub(crate) fn outages_from_mask(mask: &[bool]) -> Vec<OutageSegment> {
    let mut segments = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < mask.len() && !mask[i] {
            i += 1;
        }
        let end = i - 1;
        if start > 0 && i < mask.len() {
            segments.push(OutageSegment {
                start_idx: start,
                end_idx: end,
                pre_anchor_idx: start - 1,
                post_anchor_idx: i,
            });
        }
    }
    segments
}
