//! Gap reconstruction: neural rollouts from either anchor, their weighted
//! fusion, dead reckoning, and the linear and Gaussian-process baselines.
//!
//! All positions live in the trajectory's own planar frame.
//!
//! The network predicts each step's displacement in the vehicle frame
//! (along-track, cross-track) relative to the mid-interval heading. The
//! rollout carries the heading itself by integrating yaw rate from the
//! anchor, so one set of weights serves any direction of travel.

mod gpr;
mod training;

pub use gpr::{gpr_fit, gpr_predict, gpr_reconstruct, gram_matrix, GprConfig, GprPosterior, MAX_JITTER};
pub use training::{fit_gap_model, training_sequences, ReconConfig};

use serde::{Deserialize, Serialize};

use crate::deadreck::{dead_reckon, estimate_anchor_heading, AnchorState, Direction, FixEnd};
use crate::error::{Error, Result};
use crate::geo::{OutageSegment, PlanarPoint, SensorSample, TrackPoint, Trajectory};
use crate::neural::{Displacement, RnnNaluModel, StepFeatures};

/// Fixes used to estimate the heading at an anchor.
pub const HEADING_FIXES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DrObd,
    RnnForward,
    RnnBackward,
    BiRnnNalu,
    Linear,
    Gpr,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::DrObd,
        Method::RnnForward,
        Method::RnnBackward,
        Method::BiRnnNalu,
        Method::Linear,
        Method::Gpr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::DrObd => "dr_obd",
            Method::RnnForward => "rnn_forward",
            Method::RnnBackward => "rnn_backward",
            Method::BiRnnNalu => "bi_rnn_nalu",
            Method::Linear => "linear",
            Method::Gpr => "gpr",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Method::RnnForward | Method::RnnBackward | Method::BiRnnNalu)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedGap {
    pub method: Method,
    /// One point per missing index, in forward time order.
    pub points: Vec<PlanarPoint>,
    pub segment: OutageSegment,
}

impl ReconstructedGap {
    pub fn new(method: Method, points: Vec<PlanarPoint>, segment: OutageSegment) -> Result<Self> {
        if points.len() != segment.len() {
            return Err(Error::Dimension(format!(
                "{} points for a gap of {}",
                points.len(),
                segment.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::NumericInput(format!(
                "{method} produced ({}, {})",
                p.x, p.y
            )));
        }
        Ok(ReconstructedGap {
            method,
            points,
            segment,
        })
    }
}

/// Anything that maps per-step sensor features to vehicle-frame displacements.
pub trait StepModel {
    fn step_displacements(&self, inputs: &[StepFeatures]) -> Result<Vec<Displacement>>;
}

/// The kinematic step `v dt` straight ahead.
pub fn kinematic_step(f: &StepFeatures) -> Displacement {
    [f[0] * f[2], 0.0]
}

/// The network predicts the correction to [`kinematic_step`].
impl StepModel for RnnNaluModel {
    fn step_displacements(&self, inputs: &[StepFeatures]) -> Result<Vec<Displacement>> {
        let residual = self.predict(inputs)?;
        Ok(inputs
            .iter()
            .zip(residual)
            .map(|(f, r)| {
                let k = kinematic_step(f);
                [k[0] + r[0], k[1] + r[1]]
            })
            .collect())
    }
}

/// Features of the step ending at index `k`: the sample at `k` covers
/// `(t[k-1], t[k]]`.
pub fn step_features(points: &[TrackPoint], k: usize) -> StepFeatures {
    let s = points[k].sensor;
    [s.speed, s.yaw_rate, points[k].t - points[k - 1].t]
}

/// Rotates a vehicle-frame displacement into the planar frame.
pub fn rotate(d: Displacement, heading: f64) -> Displacement {
    let (s, c) = heading.sin_cos();
    [c * d[0] - s * d[1], s * d[0] + c * d[1]]
}

fn anchor_pos(traj: &Trajectory, idx: usize) -> Result<PlanarPoint> {
    traj.planar(idx)
        .ok_or_else(|| Error::InvalidInput(format!("anchor index {idx} has no valid fix")))
}

/// Heading at the pre-gap (`Forward`) or post-gap (`Backward`) anchor, fitted
/// over up to [`HEADING_FIXES`] consecutive fixes on that side.
pub fn anchor_heading(traj: &Trajectory, seg: &OutageSegment, direction: Direction) -> Result<f64> {
    let pts = traj.points();
    let run: Vec<usize> = match direction {
        Direction::Forward => {
            let mut v: Vec<usize> = (0..=seg.pre_anchor_idx)
                .rev()
                .take_while(|&i| pts[i].gnss_valid)
                .take(HEADING_FIXES)
                .collect();
            v.reverse();
            v
        }
        Direction::Backward => (seg.post_anchor_idx..pts.len())
            .take_while(|&i| pts[i].gnss_valid)
            .take(HEADING_FIXES)
            .collect(),
    };
    let fixes = run
        .iter()
        .map(|&i| anchor_pos(traj, i))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<SensorSample> = run.iter().map(|&i| pts[i].sensor).collect();
    let end = match direction {
        Direction::Forward => FixEnd::Last,
        Direction::Backward => FixEnd::First,
    };
    estimate_anchor_heading(&fixes, &samples, end)
}

/// Forward rollout from the pre-gap anchor with an explicit anchor heading.
pub fn reconstruct_forward_with<M: StepModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    seg: &OutageSegment,
    heading: f64,
) -> Result<ReconstructedGap> {
    let pts = traj.points();
    let inputs: Vec<StepFeatures> = seg.indices().map(|k| step_features(pts, k)).collect();
    let body = model.step_displacements(&inputs)?;
    check_len(&body, inputs.len())?;
    let mut pos = anchor_pos(traj, seg.pre_anchor_idx)?;
    let mut psi = heading;
    let mut out = Vec::with_capacity(inputs.len());
    for (f, b) in inputs.iter().zip(body) {
        let turn = f[1] * f[2];
        let d = rotate(b, psi + 0.5 * turn);
        pos = PlanarPoint::new(pos.x + d[0], pos.y + d[1]);
        psi += turn;
        out.push(pos);
    }
    ReconstructedGap::new(Method::RnnForward, out, *seg)
}

/// Backward rollout from the post-gap anchor: the steps are fed in reverse
/// time order and integrated with negated sign. Output is in forward order.
pub fn reconstruct_backward_with<M: StepModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    seg: &OutageSegment,
    heading: f64,
) -> Result<ReconstructedGap> {
    let pts = traj.points();
    let inputs: Vec<StepFeatures> = (seg.start_idx + 1..=seg.post_anchor_idx)
        .rev()
        .map(|k| step_features(pts, k))
        .collect();
    let body = model.step_displacements(&inputs)?;
    check_len(&body, inputs.len())?;
    let mut pos = anchor_pos(traj, seg.post_anchor_idx)?;
    let mut psi = heading;
    let mut out = Vec::with_capacity(inputs.len());
    for (f, b) in inputs.iter().zip(body) {
        let turn = f[1] * f[2];
        let d = rotate(b, psi - 0.5 * turn);
        pos = PlanarPoint::new(pos.x - d[0], pos.y - d[1]);
        psi -= turn;
        out.push(pos);
    }
    out.reverse();
    ReconstructedGap::new(Method::RnnBackward, out, *seg)
}

fn check_len(body: &[Displacement], n: usize) -> Result<()> {
    if body.len() != n {
        return Err(Error::Dimension(format!(
            "model returned {} steps for {n}",
            body.len()
        )));
    }
    Ok(())
}

pub fn reconstruct_forward<M: StepModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    seg: &OutageSegment,
) -> Result<ReconstructedGap> {
    let heading = anchor_heading(traj, seg, Direction::Forward)?;
    reconstruct_forward_with(model, traj, seg, heading)
}

pub fn reconstruct_backward<M: StepModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    seg: &OutageSegment,
) -> Result<ReconstructedGap> {
    let heading = anchor_heading(traj, seg, Direction::Backward)?;
    reconstruct_backward_with(model, traj, seg, heading)
}

/// Weight of the backward rollout at gap index `i` of `len`.
pub fn fusion_weight(i: usize, len: usize) -> f64 {
    (i + 1) as f64 / (len + 1) as f64
}

pub fn fuse_bidirectional(fwd: &ReconstructedGap, bwd: &ReconstructedGap) -> Result<ReconstructedGap> {
    if fwd.points.len() != bwd.points.len() {
        return Err(Error::Fusion(format!(
            "forward has {} points, backward {}",
            fwd.points.len(),
            bwd.points.len()
        )));
    }
    if fwd.segment != bwd.segment {
        return Err(Error::Fusion("rollouts cover different segments".into()));
    }
    let len = fwd.points.len();
    let points = fwd
        .points
        .iter()
        .zip(&bwd.points)
        .enumerate()
        .map(|(i, (f, b))| {
            let a = fusion_weight(i, len);
            PlanarPoint::new((1.0 - a) * f.x + a * b.x, (1.0 - a) * f.y + a * b.y)
        })
        .collect();
    ReconstructedGap::new(Method::BiRnnNalu, points, fwd.segment)
}

/// Forward, backward and fused reconstructions, in that order.
pub fn reconstruct_bidirectional<M: StepModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    seg: &OutageSegment,
) -> Result<[ReconstructedGap; 3]> {
    let fwd = reconstruct_forward(model, traj, seg)?;
    let bwd = reconstruct_backward(model, traj, seg)?;
    let fused = fuse_bidirectional(&fwd, &bwd)?;
    Ok([fwd, bwd, fused])
}

/// Dead reckoning forward from the pre-gap anchor.
pub fn dr_obd(traj: &Trajectory, seg: &OutageSegment) -> Result<ReconstructedGap> {
    let heading = anchor_heading(traj, seg, Direction::Forward)?;
    let pts = traj.points();
    let anchor = AnchorState::new(
        anchor_pos(traj, seg.pre_anchor_idx)?,
        heading,
        pts[seg.pre_anchor_idx].sensor,
    )?;
    let samples: Vec<SensorSample> = seg.indices().map(|k| pts[k].sensor).collect();
    let path = dead_reckon(&anchor, &samples, Direction::Forward)?;
    ReconstructedGap::new(Method::DrObd, path, *seg)
}

pub fn linear_interp(seg: &OutageSegment, traj: &Trajectory) -> Result<ReconstructedGap> {
    let pts = traj.points();
    let (a, b) = (
        anchor_pos(traj, seg.pre_anchor_idx)?,
        anchor_pos(traj, seg.post_anchor_idx)?,
    );
    let (t0, t1) = (pts[seg.pre_anchor_idx].t, pts[seg.post_anchor_idx].t);
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::Degenerate(format!("anchors at t = {t0} and {t1}")));
    }
    let points = seg
        .indices()
        .map(|k| {
            let u = (pts[k].t - t0) / span;
            PlanarPoint::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y))
        })
        .collect();
    ReconstructedGap::new(Method::Linear, points, *seg)
}

/// Runs each requested method on one gap. Neural methods need `model`.
pub fn reconstruct_methods(
    methods: &[Method],
    model: Option<&RnnNaluModel>,
    traj: &Trajectory,
    seg: &OutageSegment,
    gpr_cfg: &GprConfig,
    gpr_context: usize,
) -> Result<Vec<ReconstructedGap>> {
    let mut neural: Option<[ReconstructedGap; 3]> = None;
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let gap = match m {
            Method::DrObd => dr_obd(traj, seg)?,
            Method::Linear => linear_interp(seg, traj)?,
            Method::Gpr => gpr_reconstruct(traj, seg, gpr_cfg, gpr_context)?,
            Method::RnnForward | Method::RnnBackward | Method::BiRnnNalu => {
                if neural.is_none() {
                    let model = model
                        .ok_or_else(|| Error::InvalidInput(format!("method {m} needs a trained model")))?;
                    neural = Some(reconstruct_bidirectional(model, traj, seg)?);
                }
                let [f, b, fused] = neural.as_ref().unwrap();
                match m {
                    Method::RnnForward => f.clone(),
                    Method::RnnBackward => b.clone(),
                    _ => fused.clone(),
                }
            }
        };
        out.push(gap);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::detect_outages;
    use crate::simgen::{corrupt, gen_scenario, NoiseConfig, ScenarioConfig, ScenarioKind};
    use proptest::prelude::*;

    struct Zero;
    impl StepModel for Zero {
        fn step_displacements(&self, inputs: &[StepFeatures]) -> Result<Vec<Displacement>> {
            Ok(vec![[0.0, 0.0]; inputs.len()])
        }
    }

    /// Answers with pre-computed vehicle-frame steps: forward on the first
    /// call, backward on the second. Matching on inputs would not work since
    /// a straight constant-speed gap feeds identical sequences both ways.
    struct Oracle {
        calls: std::cell::Cell<usize>,
        fwd: Vec<Displacement>,
        bwd: Vec<Displacement>,
    }
    impl StepModel for Oracle {
        fn step_displacements(&self, _: &[StepFeatures]) -> Result<Vec<Displacement>> {
            let n = self.calls.replace(self.calls.get() + 1);
            Ok(if n.is_multiple_of(2) {
                self.fwd.clone()
            } else {
                self.bwd.clone()
            })
        }
    }

    /// Kinematic model: pure dead reckoning expressed as a step model.
    struct Kinematic;
    impl StepModel for Kinematic {
        fn step_displacements(&self, inputs: &[StepFeatures]) -> Result<Vec<Displacement>> {
            Ok(inputs.iter().map(|f| [f[0] * f[2], 0.0]).collect())
        }
    }

    fn outage_case(kind: ScenarioKind, noise: NoiseConfig) -> (Trajectory, Trajectory, OutageSegment) {
        let cfg = ScenarioConfig {
            noise,
            ..ScenarioConfig::preset(kind, 4)
        };
        let truth = gen_scenario(&cfg).unwrap().truth;
        let measured = corrupt(&truth, &cfg).unwrap();
        let seg = detect_outages(&measured)[0];
        (truth, measured, seg)
    }

    fn truth_points(
        truth: &Trajectory,
        measured: &Trajectory,
        idx: impl Iterator<Item = usize>,
    ) -> Vec<PlanarPoint> {
        idx.map(|i| measured.project(truth.points()[i].geo.unwrap()).unwrap())
            .collect()
    }

    fn unrotate(d: [f64; 2], heading: f64) -> Displacement {
        let (s, c) = heading.sin_cos();
        [c * d[0] + s * d[1], -s * d[0] + c * d[1]]
    }

    fn exact_oracle(
        truth: &Trajectory,
        measured: &Trajectory,
        seg: &OutageSegment,
        h_fwd: f64,
        h_bwd: f64,
    ) -> Oracle {
        let pts = measured.points();
        let tp = truth_points(truth, measured, seg.pre_anchor_idx..=seg.post_anchor_idx);
        let fwd_inputs: Vec<StepFeatures> = seg.indices().map(|k| step_features(pts, k)).collect();
        let mut psi = h_fwd;
        let mut fwd = Vec::new();
        for (j, f) in fwd_inputs.iter().enumerate() {
            let d = [tp[j + 1].x - tp[j].x, tp[j + 1].y - tp[j].y];
            fwd.push(unrotate(d, psi + 0.5 * f[1] * f[2]));
            psi += f[1] * f[2];
        }
        let mut psi = h_bwd;
        let mut bwd = Vec::new();
        for j in (1..tp.len() - 1).rev() {
            let f = step_features(pts, seg.pre_anchor_idx + j + 1);
            let d = [tp[j + 1].x - tp[j].x, tp[j + 1].y - tp[j].y];
            bwd.push(unrotate(d, psi - 0.5 * f[1] * f[2]));
            psi -= f[1] * f[2];
        }
        Oracle {
            calls: std::cell::Cell::new(0),
            fwd,
            bwd,
        }
    }

    #[test]
    fn zero_model_sticks_to_anchors() {
        let (_, m, seg) = outage_case(ScenarioKind::Straight, NoiseConfig::default());
        let pre = m.planar(seg.pre_anchor_idx).unwrap();
        let post = m.planar(seg.post_anchor_idx).unwrap();
        let f = reconstruct_forward_with(&Zero, &m, &seg, 0.3).unwrap();
        let b = reconstruct_backward_with(&Zero, &m, &seg, 0.3).unwrap();
        assert!(f.points.iter().all(|p| *p == pre));
        assert!(b.points.iter().all(|p| *p == post));
        assert_eq!(f.points.len(), 40);
    }

    #[test]
    fn exact_model_reproduces_truth() {
        // Headings deliberately wrong: the oracle compensates, so the anchor
        // heading estimate plays no part in exactness.
        for kind in [
            ScenarioKind::Straight,
            ScenarioKind::RightAngleTurn,
            ScenarioKind::Curve,
        ] {
            let (truth, m, seg) = outage_case(kind, NoiseConfig::default());
            let oracle = exact_oracle(&truth, &m, &seg, 0.4, -1.1);
            let expect = truth_points(&truth, &m, seg.indices());
            let f = reconstruct_forward_with(&oracle, &m, &seg, 0.4).unwrap();
            let b = reconstruct_backward_with(&oracle, &m, &seg, -1.1).unwrap();
            let fused = fuse_bidirectional(&f, &b).unwrap();
            // Anchors are noisy fixes, so shift the truth to start from them.
            let pre = m.planar(seg.pre_anchor_idx).unwrap();
            let post = m.planar(seg.post_anchor_idx).unwrap();
            let tpre = truth_points(&truth, &m, std::iter::once(seg.pre_anchor_idx))[0];
            let tpost = truth_points(&truth, &m, std::iter::once(seg.post_anchor_idx))[0];
            for (i, e) in expect.iter().enumerate() {
                let ef = PlanarPoint::new(e.x - tpre.x + pre.x, e.y - tpre.y + pre.y);
                let eb = PlanarPoint::new(e.x - tpost.x + post.x, e.y - tpost.y + post.y);
                assert!(f.points[i].distance(&ef) < 1e-9, "{kind:?} fwd {i}");
                assert!(b.points[i].distance(&eb) < 1e-9, "{kind:?} bwd {i}");
            }
            assert_eq!(fused.points.len(), expect.len());
        }
    }

    #[test]
    fn exact_model_with_true_anchors_is_exact_everywhere() {
        let (truth, _, _) = outage_case(ScenarioKind::RightAngleTurn, NoiseConfig::none());
        let cfg = ScenarioConfig {
            noise: NoiseConfig::none(),
            ..ScenarioConfig::preset(ScenarioKind::RightAngleTurn, 4)
        };
        let m = corrupt(&truth, &cfg).unwrap();
        let seg = detect_outages(&m)[0];
        let hf = anchor_heading(&m, &seg, Direction::Forward).unwrap();
        let hb = anchor_heading(&m, &seg, Direction::Backward).unwrap();
        let oracle = exact_oracle(&truth, &m, &seg, hf, hb);
        let [f, b, fused] = reconstruct_bidirectional(&oracle, &m, &seg).unwrap();
        let expect = truth_points(&truth, &m, seg.indices());
        for gap in [&f, &b, &fused] {
            for (p, e) in gap.points.iter().zip(&expect) {
                assert!(p.distance(e) < 1e-9, "{:?}", gap.method);
            }
        }
    }

    #[test]
    fn forward_points_are_cumulative_rotated_steps() {
        let (_, m, seg) = outage_case(ScenarioKind::Curve, NoiseConfig::default());
        let pts = m.points();
        let heading = 0.25;
        let gap = reconstruct_forward_with(&Kinematic, &m, &seg, heading).unwrap();
        let mut sum = (0.0, 0.0);
        let mut psi = heading;
        let pre = m.planar(seg.pre_anchor_idx).unwrap();
        for (j, k) in seg.indices().enumerate() {
            let (v, w, dt) = (
                pts[k].sensor.speed,
                pts[k].sensor.yaw_rate,
                pts[k].t - pts[k - 1].t,
            );
            let mid = psi + w * dt / 2.0;
            sum.0 += v * dt * mid.cos();
            sum.1 += v * dt * mid.sin();
            psi += w * dt;
            let p = gap.points[j];
            assert!((p.x - pre.x - sum.0).abs() < 1e-9 && (p.y - pre.y - sum.1).abs() < 1e-9);
        }
    }

    #[test]
    fn kinematic_model_matches_dead_reckoning() {
        let (_, m, seg) = outage_case(ScenarioKind::RightAngleTurn, NoiseConfig::default());
        let dr = dr_obd(&m, &seg).unwrap();
        let k = reconstruct_forward(&Kinematic, &m, &seg).unwrap();
        for (a, b) in dr.points.iter().zip(&k.points) {
            assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn backward_output_is_in_forward_order() {
        let (_, m, seg) = outage_case(ScenarioKind::Straight, NoiseConfig::none());
        let b = reconstruct_backward(&Kinematic, &m, &seg).unwrap();
        let post = m.planar(seg.post_anchor_idx).unwrap();
        // Heading east: x increases along the gap and the last point is one step short of post.
        assert!(b.points.windows(2).all(|w| w[1].x > w[0].x));
        assert!(b.points.last().unwrap().x < post.x);
    }

    #[test]
    fn anchor_headings_on_clean_straight_track() {
        let (_, m, seg) = outage_case(ScenarioKind::Straight, NoiseConfig::none());
        assert!(anchor_heading(&m, &seg, Direction::Forward).unwrap().abs() < 1e-6);
        assert!(anchor_heading(&m, &seg, Direction::Backward).unwrap().abs() < 1e-6);
    }

    fn gap(points: Vec<PlanarPoint>) -> ReconstructedGap {
        let n = points.len();
        let seg = OutageSegment {
            start_idx: 1,
            end_idx: n,
            pre_anchor_idx: 0,
            post_anchor_idx: n + 1,
        };
        ReconstructedGap::new(Method::RnnForward, points, seg).unwrap()
    }

    #[test]
    fn fusion_examples() {
        let f = gap(vec![PlanarPoint::new(0.0, 0.0)]);
        let b = gap(vec![PlanarPoint::new(2.0, 0.0)]);
        assert_eq!(
            fuse_bidirectional(&f, &b).unwrap().points,
            vec![PlanarPoint::new(1.0, 0.0)]
        );

        let f = gap(vec![PlanarPoint::ORIGIN; 3]);
        let b = gap(vec![PlanarPoint::new(4.0, 0.0); 3]);
        let xs: Vec<f64> = fuse_bidirectional(&f, &b)
            .unwrap()
            .points
            .iter()
            .map(|p| p.x)
            .collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0]);
        assert_eq!(
            [fusion_weight(0, 3), fusion_weight(1, 3), fusion_weight(2, 3)],
            [0.25, 0.5, 0.75]
        );
    }

    #[test]
    fn fusion_length_mismatch() {
        let f = gap(vec![PlanarPoint::ORIGIN; 2]);
        let b = gap(vec![PlanarPoint::ORIGIN; 3]);
        assert!(matches!(fuse_bidirectional(&f, &b), Err(Error::Fusion(_))));
    }

    fn pts(n: usize) -> impl Strategy<Value = Vec<PlanarPoint>> {
        prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), n)
            .prop_map(|v| v.into_iter().map(|(x, y)| PlanarPoint::new(x, y)).collect())
    }

    proptest! {
        #[test]
        fn fusion_of_equal_rollouts_is_identity(p in pts(7)) {
            let fused = fuse_bidirectional(&gap(p.clone()), &gap(p.clone())).unwrap();
            for (a, b) in fused.points.iter().zip(&p) {
                prop_assert!(a.distance(b) < 1e-9);
            }
        }

        #[test]
        fn fusion_stays_near_the_anchored_ends((f, b) in (1usize..12).prop_flat_map(|n| (pts(n), pts(n)))) {
            let n = f.len();
            let fused = fuse_bidirectional(&gap(f.clone()), &gap(b.clone())).unwrap();
            let a0 = fusion_weight(0, n);
            prop_assert!(fused.points[0].distance(&f[0]) <= a0 * f[0].distance(&b[0]) + 1e-9);
            let al = fusion_weight(n - 1, n);
            prop_assert!(fused.points[n - 1].distance(&b[n - 1]) <= (1.0 - al) * f[n - 1].distance(&b[n - 1]) + 1e-9);
            for i in 1..n {
                prop_assert!(fusion_weight(i, n) > fusion_weight(i - 1, n));
            }
        }

        #[test]
        fn single_point_fusion_error_is_bounded(f in pts(1), b in pts(1), t in pts(1)) {
            let fused = fuse_bidirectional(&gap(f.clone()), &gap(b.clone())).unwrap();
            let e = fused.points[0].distance(&t[0]);
            prop_assert!(e <= f[0].distance(&t[0]).max(b[0].distance(&t[0])) + 1e-9);
        }
    }

    fn line_traj(times: &[f64], valid: &[bool], xs: &[f64]) -> Trajectory {
        let anchor = crate::geo::GeoPoint { lat: 10.0, lon: 20.0 };
        let points = times
            .iter()
            .zip(valid)
            .zip(xs)
            .map(|((&t, &v), &x)| {
                if v {
                    let g = crate::geo::from_local_enu(PlanarPoint::new(x, 0.0), anchor).unwrap();
                    TrackPoint::fix(t, g, 1.0, 0.0)
                } else {
                    TrackPoint::outage(t, 1.0, 0.0)
                }
            })
            .collect();
        Trajectory::new("line", points).unwrap()
    }

    #[test]
    fn linear_interp_examples() {
        let t = line_traj(
            &[0.0, 2.5, 5.0, 7.5, 10.0],
            &[true, false, false, false, true],
            &[0.0, 0.0, 0.0, 0.0, 10.0],
        );
        let seg = detect_outages(&t)[0];
        let g = linear_interp(&seg, &t).unwrap();
        for (p, want) in g.points.iter().zip([2.5, 5.0, 7.5]) {
            assert!((p.x - want).abs() < 1e-6, "{}", p.x);
            assert!(p.y.abs() < 1e-6);
        }
        // Same-position anchors.
        let t = line_traj(&[0.0, 1.0, 2.0], &[true, false, true], &[0.0, 0.0, 0.0]);
        let g = linear_interp(&detect_outages(&t)[0], &t).unwrap();
        assert!(g.points[0].distance(&PlanarPoint::ORIGIN) < 1e-9);
    }

    #[test]
    fn linear_points_are_collinear() {
        let (_, m, seg) = outage_case(ScenarioKind::Curve, NoiseConfig::default());
        let g = linear_interp(&seg, &m).unwrap();
        let a = m.planar(seg.pre_anchor_idx).unwrap();
        let b = m.planar(seg.post_anchor_idx).unwrap();
        let len = a.distance(&b);
        for p in &g.points {
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            assert!((cross / len).abs() < 1e-9);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("svr".parse::<Method>().is_err());
    }

    #[test]
    fn neural_methods_need_a_model() {
        let (_, m, seg) = outage_case(ScenarioKind::Straight, NoiseConfig::default());
        let r = reconstruct_methods(&[Method::BiRnnNalu], None, &m, &seg, &GprConfig::default(), 30);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        let r = reconstruct_methods(
            &[Method::Linear, Method::DrObd, Method::Gpr],
            None,
            &m,
            &seg,
            &GprConfig::default(),
            30,
        )
        .unwrap();
        assert_eq!(r.len(), 3);
    }
}
