//! End-to-end runs: generate a scenario, train the gap model on the
//! measured track, reconstruct every outage with each method and score the
//! results against the ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{detect_outages, GeoPoint, OutageSegment, PlanarPoint, Trajectory};
use crate::neural::RnnNaluModel;
use crate::recon::{fit_gap_model, reconstruct_methods, Method, ReconConfig, ReconstructedGap};
use crate::simgen::{corrupt, gen_scenario, ScenarioConfig};
use crate::similarity::{error_series, SimilarityReport};

pub const METRICS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub rmse: f64,
    /// Per-point errors of every gap, concatenated in time order.
    pub per_point: Vec<f64>,
    /// Error at the middle point of each gap.
    pub midpoint: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub segments: Vec<OutageSegment>,
    pub methods: BTreeMap<Method, MethodMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<SimilarityReport>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "metrics report".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: MetricsReport = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "metrics report".into(),
            source,
        })?;
        if r.version != METRICS_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "metrics version {} (expected {METRICS_FORMAT_VERSION})",
                r.version
            )));
        }
        Ok(r)
    }

    pub fn rmse(&self, m: Method) -> Option<f64> {
        self.methods.get(&m).map(|x| x.rmse)
    }
}

/// A reconstructed point as absolute coordinates, keyed by timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedGeo {
    pub t: f64,
    pub geo: GeoPoint,
}

/// Converts a gap from the trajectory frame to timestamped coordinates.
pub fn gap_to_geo(gap: &ReconstructedGap, traj: &Trajectory) -> Result<Vec<TimedGeo>> {
    let pts = traj.points();
    gap.segment
        .indices()
        .zip(&gap.points)
        .map(|(k, p)| {
            Ok(TimedGeo {
                t: pts[k].t,
                geo: traj.unproject(*p)?,
            })
        })
        .collect()
}

pub const GAP_CSV_HEADER: &str = "t,lat,lon";

pub fn write_gap_csv(points: &[TimedGeo]) -> String {
    let mut s = format!("{GAP_CSV_HEADER}\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.t, p.geo.lat, p.geo.lon));
    }
    s
}

pub fn parse_gap_csv(text: &str) -> Result<Vec<TimedGeo>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("gap csv header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != GAP_CSV_HEADER {
        return Err(Error::InvalidInput(format!(
            "gap csv header must be `{GAP_CSV_HEADER}`, found `{header}`"
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::InvalidInput(format!("gap csv row {row}: {e}")))?;
        let num = |c: usize, name: &str| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("gap csv row {row}: bad `{name}`")))
        };
        out.push(TimedGeo {
            t: num(0, "t")?,
            geo: GeoPoint::new(num(1, "lat")?, num(2, "lon")?)?,
        });
    }
    Ok(out)
}

/// Splits timestamped points back into runs of consecutive truth indices,
/// one per outage segment.
fn locate(points: &[TimedGeo], truth: &Trajectory) -> Result<Vec<(usize, PlanarPoint)>> {
    let tp = truth.points();
    points
        .iter()
        .map(|p| {
            let idx = tp
                .binary_search_by(|q| q.t.total_cmp(&p.t))
                .map_err(|_| Error::InvalidInput(format!("no ground-truth sample at t = {}", p.t)))?;
            Ok((idx, truth.project(p.geo)?))
        })
        .collect()
}

/// Scores timestamped reconstructions against a fully valid truth track.
/// Errors are measured in the truth track's planar frame.
pub fn evaluate_geo(recons: &BTreeMap<Method, Vec<TimedGeo>>, truth: &Trajectory) -> Result<MetricsReport> {
    let mut methods = BTreeMap::new();
    let mut segments: Option<Vec<OutageSegment>> = None;
    for (&m, pts) in recons {
        let located = locate(pts, truth)?;
        // Group consecutive indices into gaps.
        let mut groups: Vec<Vec<(usize, PlanarPoint)>> = Vec::new();
        for item in located {
            match groups.last_mut() {
                Some(g) if g.last().unwrap().0 + 1 == item.0 => g.push(item),
                _ => groups.push(vec![item]),
            }
        }
        let mut per_point = Vec::new();
        let mut midpoint = Vec::new();
        let mut segs = Vec::new();
        for g in &groups {
            let est: Vec<PlanarPoint> = g.iter().map(|x| x.1).collect();
            let tru = g
                .iter()
                .map(|&(i, _)| {
                    truth
                        .planar(i)
                        .ok_or_else(|| Error::InvalidInput(format!("ground truth has no fix at index {i}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let e = error_series(&est, &tru)?;
            midpoint.push(e.per_point[(e.per_point.len() - 1) / 2]);
            per_point.extend(e.per_point);
            let (s, l) = (g[0].0, g.last().unwrap().0);
            segs.push(OutageSegment {
                start_idx: s,
                end_idx: l,
                pre_anchor_idx: s.saturating_sub(1),
                post_anchor_idx: l + 1,
            });
        }
        if per_point.is_empty() {
            return Err(Error::Metric(format!("method {m} has no reconstructed points")));
        }
        match &segments {
            None => segments = Some(segs),
            Some(prev) if *prev != segs => {
                return Err(Error::Metric(format!("method {m} covers different gaps")));
            }
            _ => {}
        }
        let rmse = (per_point.iter().map(|e| e * e).sum::<f64>() / per_point.len() as f64).sqrt();
        methods.insert(
            m,
            MethodMetrics {
                rmse,
                per_point,
                midpoint,
            },
        );
    }
    Ok(MetricsReport {
        version: METRICS_FORMAT_VERSION,
        segments: segments.unwrap_or_default(),
        methods,
        similarity: None,
    })
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub truth: Trajectory,
    pub measured: Trajectory,
    pub model: RnnNaluModel,
    pub loss_history: Vec<f64>,
    pub gaps: Vec<ReconstructedGap>,
    pub metrics: MetricsReport,
}

/// Reconstructs every outage of `measured` with each method.
pub fn reconstruct_all(
    measured: &Trajectory,
    model: Option<&RnnNaluModel>,
    methods: &[Method],
    cfg: &ReconConfig,
) -> Result<Vec<ReconstructedGap>> {
    let segments = detect_outages(measured);
    if segments.is_empty() {
        return Err(Error::InvalidInput(format!(
            "track `{}` has no bracketed outage",
            measured.id()
        )));
    }
    let mut out = Vec::new();
    for seg in &segments {
        out.extend(reconstruct_methods(
            methods,
            model,
            measured,
            seg,
            &cfg.gpr,
            cfg.gpr_context,
        )?);
    }
    Ok(out)
}

/// Collects gaps per method as timestamped coordinates.
pub fn gaps_by_method(
    gaps: &[ReconstructedGap],
    traj: &Trajectory,
) -> Result<BTreeMap<Method, Vec<TimedGeo>>> {
    let mut map: BTreeMap<Method, Vec<TimedGeo>> = BTreeMap::new();
    for g in gaps {
        map.entry(g.method).or_default().extend(gap_to_geo(g, traj)?);
    }
    Ok(map)
}

/// Full pipeline on one synthetic scenario.
pub fn run_scenario(
    scenario: &ScenarioConfig,
    recon: &ReconConfig,
    methods: &[Method],
) -> Result<ScenarioRun> {
    let truth = gen_scenario(scenario)?.truth;
    let measured = corrupt(&truth, scenario)?;
    let (model, loss_history) = fit_gap_model(std::slice::from_ref(&measured), recon)?;
    let gaps = reconstruct_all(&measured, Some(&model), methods, recon)?;
    let metrics = evaluate_geo(&gaps_by_method(&gaps, &measured)?, &truth)?;
    Ok(ScenarioRun {
        truth,
        measured,
        model,
        loss_history,
        gaps,
        metrics,
    })
}
