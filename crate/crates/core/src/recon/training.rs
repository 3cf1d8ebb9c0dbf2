//! Self-supervised training data for the gap model: windows cut from the
//! valid GNSS spans, with targets in the vehicle frame.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{kinematic_step, rotate, step_features, GprConfig};
use crate::deadreck::{estimate_anchor_heading, FixEnd};
use crate::error::{Error, Result};
use crate::geo::{PlanarPoint, SensorSample, Trajectory};
use crate::neural::{train_with_rng, Normalization, RnnNaluModel, Sequence, TrainConfig, DEFAULT_HIDDEN};

/// Yaw rate normalization scale floor, rad/s. Valid spans are often nearly
/// straight, so the fitted std is sensor noise and a turn inside a gap would
/// otherwise arrive as a huge out-of-range input.
pub const YAW_STD_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    /// Steps per training window.
    pub window: usize,
    pub stride: usize,
    pub hidden: usize,
    pub train: TrainConfig,
    pub gpr: GprConfig,
    /// Valid fixes on each side of a gap used by GPR.
    pub gpr_context: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            window: 20,
            stride: 5,
            hidden: DEFAULT_HIDDEN,
            train: TrainConfig {
                weight_decay: 0.1,
                ..TrainConfig::default()
            },
            gpr: GprConfig::default(),
            gpr_context: 30,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.stride == 0 || self.hidden == 0 {
            return Err(Error::Config("window, stride and hidden must be positive".into()));
        }
        if self.gpr_context == 0 {
            return Err(Error::Config("gpr_context must be positive".into()));
        }
        self.train.validate()?;
        self.gpr.validate()
    }
}

/// Maximal runs of consecutive valid indices.
fn valid_spans(traj: &Trajectory) -> Vec<std::ops::Range<usize>> {
    let mask = traj.validity_mask();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let s = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        spans.push(s..i);
    }
    spans
}

/// Windows of `window` steps (`window + 1` fixes) every `stride` fixes, plus
/// each window reversed in time for the backward rollout. Targets are the
/// vehicle-frame displacement minus the kinematic step. Windows with too
/// little motion to fix a heading are skipped.
pub fn training_sequences(trajs: &[Trajectory], window: usize, stride: usize) -> Result<Vec<Sequence>> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("window and stride must be positive".into()));
    }
    let mut out = Vec::new();
    for traj in trajs {
        let pts = traj.points();
        for span in valid_spans(traj) {
            let mut s = span.start;
            while s + window < span.end {
                let idx = s..=s + window;
                let fixes: Vec<PlanarPoint> = idx.clone().filter_map(|i| traj.planar(i)).collect();
                let samples: Vec<SensorSample> = idx.clone().map(|i| pts[i].sensor).collect();
                s += stride;
                let Ok(heading) = estimate_anchor_heading(&fixes, &samples, FixEnd::First) else {
                    continue;
                };
                let mut inputs = Vec::with_capacity(window);
                let mut targets = Vec::with_capacity(window);
                let mut psi = heading;
                for j in 1..=window {
                    let f = step_features(pts, idx.start() + j);
                    let turn = f[1] * f[2];
                    let d = [fixes[j].x - fixes[j - 1].x, fixes[j].y - fixes[j - 1].y];
                    let b = rotate(d, -(psi + 0.5 * turn));
                    let k = kinematic_step(&f);
                    targets.push([b[0] - k[0], b[1] - k[1]]);
                    inputs.push(f);
                    psi += turn;
                }
                let reversed = (
                    inputs.iter().rev().copied().collect(),
                    targets.iter().rev().copied().collect(),
                );
                out.push((inputs, targets));
                out.push(reversed);
            }
        }
    }
    Ok(out)
}

/// Builds the training set from `trajs`, initializes a model from
/// `cfg.train.seed` and trains it. Returns the model and its loss history.
pub fn fit_gap_model(trajs: &[Trajectory], cfg: &ReconConfig) -> Result<(RnnNaluModel, Vec<f64>)> {
    cfg.validate()?;
    let data = training_sequences(trajs, cfg.window, cfg.stride)?;
    if data.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no valid span holds {} consecutive fixes with motion",
            cfg.window + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let mut model = RnnNaluModel::init(cfg.hidden, &mut rng);
    model.norm = Normalization::fit(&data).with_min_std([0.0, YAW_STD_FLOOR, 0.0]);
    train_with_rng(model, &data, &cfg.train, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{corrupt, gen_scenario, NoiseConfig, ScenarioConfig, ScenarioKind};

    fn clean(kind: ScenarioKind) -> Trajectory {
        let cfg = ScenarioConfig {
            noise: NoiseConfig::none(),
            ..ScenarioConfig::preset(kind, 2)
        };
        corrupt(&gen_scenario(&cfg).unwrap().truth, &cfg).unwrap()
    }

    #[test]
    fn window_count_and_reversal() {
        let t = clean(ScenarioKind::Straight);
        // Fixes at t = 1..59 and 100..160: spans of 59 and 61 fixes give 8
        // and 9 windows of 21 fixes.
        let data = training_sequences(&[t], 20, 5).unwrap();
        assert_eq!(data.len(), 2 * (8 + 9));
        let (fi, ft) = &data[0];
        let (ri, rt) = &data[1];
        assert_eq!(fi.len(), 20);
        assert_eq!(fi.first(), ri.last());
        assert_eq!(ft.first(), rt.last());
    }

    #[test]
    fn clean_straight_targets_are_along_track() {
        let t = clean(ScenarioKind::Straight);
        for (inputs, targets) in training_sequences(&[t], 20, 5).unwrap() {
            for (f, y) in inputs.iter().zip(&targets) {
                assert!(y[0].abs() < 1e-6, "{y:?} {f:?}");
                assert!(y[1].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn clean_curve_targets_match_chord_geometry() {
        // On an arc the mid-interval heading is parallel to the chord, so
        // the cross-track target vanishes and the along-track target is the
        // chord length 2 r sin(turn / 2).
        let t = clean(ScenarioKind::Curve);
        for (inputs, targets) in training_sequences(&[t], 20, 5).unwrap() {
            for (f, y) in inputs.iter().zip(&targets) {
                let turn = f[1] * f[2];
                let chord = if turn.abs() < 1e-12 {
                    f[0] * f[2]
                } else {
                    2.0 * (f[0] / f[1]) * (turn / 2.0).sin()
                };
                assert!((y[0] + f[0] * f[2] - chord).abs() < 1e-5, "{} vs {chord}", y[0]);
                assert!(y[1].abs() < 1e-5);
            }
        }
    }

    #[test]
    fn stationary_track_yields_no_windows() {
        let t = clean(ScenarioKind::Straight);
        let pts: Vec<_> = t
            .points()
            .iter()
            .take(30)
            .map(|p| crate::geo::TrackPoint::fix(p.t, t.anchor(), 0.0, 0.0))
            .collect();
        let still = Trajectory::new("still", pts).unwrap();
        assert!(training_sequences(std::slice::from_ref(&still), 20, 5)
            .unwrap()
            .is_empty());
        assert!(fit_gap_model(&[still], &ReconConfig::default()).is_err());
    }
}
