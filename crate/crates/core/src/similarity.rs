//! Reconstruction error metrics and the pairwise user-similarity pipeline:
//! dwell-weighted grid cells, signed feature hashing, cosine scores and
//! threshold classification.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{from_local_enu, GeoPoint, PlanarPoint, TrackPoint, Trajectory};

pub const DEFAULT_CELL_SIZE_M: f64 = 250.0;
pub const DEFAULT_SKETCH_WIDTH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub per_point: Vec<f64>,
    pub rmse: f64,
}

pub fn error_series(est: &[PlanarPoint], truth: &[PlanarPoint]) -> Result<ErrorSeries> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::Metric(format!(
            "need equal nonzero lengths, got {} estimated and {} true points",
            est.len(),
            truth.len()
        )));
    }
    let per_point: Vec<f64> = est.iter().zip(truth).map(|(a, b)| a.distance(b)).collect();
    let rmse = (per_point.iter().map(|e| e * e).sum::<f64>() / per_point.len() as f64).sqrt();
    Ok(ErrorSeries { per_point, rmse })
}

pub type CellKey = (i64, i64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFeatures {
    pub cell_size: f64,
    /// Dwell seconds per grid cell.
    pub counts: BTreeMap<CellKey, f64>,
}

impl CellFeatures {
    pub fn norm(&self) -> f64 {
        self.counts.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn total_dwell(&self) -> f64 {
        self.counts.values().sum()
    }
}

/// Grid cell holding `p`; points on a boundary belong to the cell above it.
pub fn cell_of(p: PlanarPoint, cell_size: f64) -> CellKey {
    ((p.x / cell_size).floor() as i64, (p.y / cell_size).floor() as i64)
}

/// Dwell features in the trajectory's own planar frame.
pub fn cell_features(traj: &Trajectory, cell_size: f64) -> Result<CellFeatures> {
    cell_features_in(traj, cell_size, traj.anchor())
}

/// Dwell features in the frame centred on `origin`; trajectories compared
/// with each other must share it.
///
/// Each valid point adds the time since the previous sample (the first
/// sample uses the time to the next one) to the cell containing it.
pub fn cell_features_in(traj: &Trajectory, cell_size: f64, origin: GeoPoint) -> Result<CellFeatures> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::InvalidInput(format!("cell size {cell_size}")));
    }
    let pts = traj.points();
    let mut counts = BTreeMap::new();
    for (i, p) in pts.iter().enumerate() {
        let Some(geo) = p.geo.filter(|_| p.gnss_valid) else {
            continue;
        };
        let dt = if i > 0 { p.t - pts[i - 1].t } else { pts[1].t - p.t };
        let q = crate::geo::to_local_enu(geo, origin)?;
        *counts.entry(cell_of(q, cell_size)).or_insert(0.0) += dt;
    }
    if counts.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    Ok(CellFeatures { cell_size, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchVector {
    pub width: usize,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SketchVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded bucket index and sign of a cell key.
pub fn cell_hash(key: CellKey, width: usize, seed: u64) -> (usize, f64) {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ key.0 as u64);
    h = splitmix64(h ^ key.1 as u64);
    let idx = (h as usize) & (width - 1);
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (idx, sign)
}

pub fn sketch(features: &CellFeatures, width: usize, seed: u64) -> Result<SketchVector> {
    if width < 2 || !width.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "sketch width {width} is not a power of two >= 2"
        )));
    }
    let mut values = vec![0.0; width];
    for (&key, &dwell) in &features.counts {
        let (i, s) = cell_hash(key, width, seed);
        values[i] += s * dwell;
    }
    Ok(SketchVector { width, values, seed })
}

fn finish_cosine(dot: f64, na: f64, nb: f64) -> Result<f64> {
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(a: &SketchVector, b: &SketchVector) -> Result<f64> {
    if a.width != b.width || a.seed != b.seed {
        return Err(Error::Dimension(format!(
            "sketches differ: width {}/{} seed {}/{}",
            a.width, b.width, a.seed, b.seed
        )));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    finish_cosine(dot, a.norm(), b.norm())
}

/// Exact cosine over the sparse features.
pub fn cosine_features(a: &CellFeatures, b: &CellFeatures) -> Result<f64> {
    if a.cell_size != b.cell_size {
        return Err(Error::Dimension(format!(
            "cell sizes {} and {}",
            a.cell_size, b.cell_size
        )));
    }
    let dot: f64 = a
        .counts
        .iter()
        .filter_map(|(k, v)| b.counts.get(k).map(|w| v * w))
        .sum();
    finish_cosine(dot, a.norm(), b.norm())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64, what: &str) -> Result<f64> {
    if den == 0 {
        return Err(Error::UndefinedRate(format!("{what}: denominator is zero")));
    }
    Ok(num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fp, "precision")
    }

    pub fn recall(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fn_, "recall")
    }

    pub fn accuracy(&self) -> Result<f64> {
        ratio(self.tp + self.tn, self.total(), "accuracy")
    }

    pub fn balanced_accuracy(&self) -> Result<f64> {
        Ok(0.5 * (self.recall()? + tnr(self)?))
    }
}

/// True negative rate `tn / (tn + fp)`.
pub fn tnr(cm: &ConfusionMatrix) -> Result<f64> {
    ratio(cm.tn, cm.tn + cm.fp, "tnr")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairId {
    pub id_a: String,
    pub id_b: String,
}

/// Predicts "linked" iff `score >= threshold`.
pub fn classify_pairs(scores: &[(PairId, f64)], labels: &[bool], threshold: f64) -> Result<ConfusionMatrix> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if !threshold.is_finite() {
        return Err(Error::InvalidInput(format!("threshold {threshold}")));
    }
    let mut cm = ConfusionMatrix::default();
    for ((_, s), &linked) in scores.iter().zip(labels) {
        match (*s >= threshold, linked) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Threshold among the observed scores that maximizes balanced accuracy;
/// ties go to the higher threshold. Falls back to plain accuracy when one
/// class is absent.
pub fn select_threshold(scores: &[(PairId, f64)], labels: &[bool]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no scored pairs to calibrate on".into()));
    }
    let mut candidates: Vec<f64> = scores.iter().map(|(_, s)| *s).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for &th in &candidates {
        let cm = classify_pairs(scores, labels, th)?;
        let score = cm.balanced_accuracy().or_else(|_| cm.accuracy())?;
        if score >= best.0 {
            best = (score, th);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLabel {
    pub id_a: String,
    pub id_b: String,
    pub linked: bool,
}

pub const PAIR_HEADER: &str = "id_a,id_b,linked";

/// Parses `id_a,id_b,linked` rows; `linked` is 0 or 1. Rows number from 1
/// after the header.
pub fn parse_pair_labels(text: &str) -> Result<Vec<PairLabel>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("pair labels header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != PAIR_HEADER {
        return Err(Error::InvalidInput(format!(
            "pair labels header must be `{PAIR_HEADER}`, found `{header}`"
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::InvalidInput(format!("pair labels row {row}: {e}")))?;
        let linked = match rec.get(2) {
            Some("1") => true,
            Some("0") => false,
            other => {
                return Err(Error::InvalidInput(format!(
                    "pair labels row {row}: linked must be 0 or 1, found {other:?}"
                )))
            }
        };
        let (a, b) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidInput(format!("pair labels row {row}: empty id")));
        }
        out.push(PairLabel {
            id_a: a.to_string(),
            id_b: b.to_string(),
            linked,
        });
    }
    Ok(out)
}

pub fn write_pair_labels(labels: &[PairLabel]) -> String {
    let mut s = format!("{PAIR_HEADER}\n");
    for l in labels {
        s.push_str(&format!("{},{},{}\n", l.id_a, l.id_b, u8::from(l.linked)));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    pub cell_size: f64,
    pub width: usize,
    pub seed: u64,
    /// Fixed threshold; calibrated on the labels when absent.
    pub threshold: Option<f64>,
    /// Fraction of pairs (taken in file order) used to calibrate the threshold.
    pub calibration_fraction: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            cell_size: DEFAULT_CELL_SIZE_M,
            width: DEFAULT_SKETCH_WIDTH,
            seed: 0,
            threshold: None,
            calibration_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub id_a: String,
    pub id_b: String,
    pub score: f64,
    pub linked: bool,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub threshold: f64,
    pub cell_size: f64,
    pub width: usize,
    pub seed: u64,
    /// Pairs used to pick the threshold; excluded from the counts below.
    pub calibration_pairs: usize,
    pub confusion: ConfusionMatrix,
    pub tnr: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub scores: Vec<PairScore>,
}

/// Sketches every trajectory in a shared frame, scores the labeled pairs and
/// classifies them. Without a fixed threshold the first
/// `calibration_fraction` of the pairs pick it and the rest are evaluated.
pub fn evaluate_pairs(
    trajs: &[Trajectory],
    labels: &[PairLabel],
    cfg: &SimilarityConfig,
) -> Result<SimilarityReport> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::InvalidInput("no trajectories to compare".into()))?;
    let origin = first.anchor();
    let mut sketches = BTreeMap::new();
    for t in trajs {
        let f = cell_features_in(t, cfg.cell_size, origin)?;
        if sketches
            .insert(t.id().to_string(), sketch(&f, cfg.width, cfg.seed)?)
            .is_some()
        {
            return Err(Error::InvalidInput(format!(
                "duplicate trajectory id `{}`",
                t.id()
            )));
        }
    }
    let mut scored = Vec::with_capacity(labels.len());
    for l in labels {
        let get = |id: &str| {
            sketches
                .get(id)
                .ok_or_else(|| Error::InvalidInput(format!("pair labels name unknown trajectory `{id}`")))
        };
        let s = cosine(get(&l.id_a)?, get(&l.id_b)?)?;
        scored.push((
            PairId {
                id_a: l.id_a.clone(),
                id_b: l.id_b.clone(),
            },
            s,
        ));
    }
    let linked: Vec<bool> = labels.iter().map(|l| l.linked).collect();
    let (threshold, n_cal) = match cfg.threshold {
        Some(th) => (th, 0),
        None => {
            if !(0.0..1.0).contains(&cfg.calibration_fraction) {
                return Err(Error::Config(format!(
                    "calibration_fraction {} must be in [0, 1)",
                    cfg.calibration_fraction
                )));
            }
            let n = ((labels.len() as f64 * cfg.calibration_fraction).round() as usize).max(1);
            if n >= labels.len() {
                return Err(Error::InvalidInput(
                    "too few pairs to calibrate and evaluate".into(),
                ));
            }
            (select_threshold(&scored[..n], &linked[..n])?, n)
        }
    };
    let confusion = classify_pairs(&scored[n_cal..], &linked[n_cal..], threshold)?;
    let scores = scored
        .iter()
        .zip(&linked)
        .map(|((id, s), &l)| PairScore {
            id_a: id.id_a.clone(),
            id_b: id.id_b.clone(),
            score: *s,
            linked: l,
            predicted: *s >= threshold,
        })
        .collect();
    Ok(SimilarityReport {
        threshold,
        cell_size: cfg.cell_size,
        width: cfg.width,
        seed: cfg.seed,
        calibration_pairs: n_cal,
        tnr: tnr(&confusion).ok(),
        precision: confusion.precision().ok(),
        recall: confusion.recall().ok(),
        accuracy: confusion.accuracy().ok(),
        confusion,
        scores,
    })
}

/// Synthetic users for the similarity pipeline: `groups` neighbourhoods of
/// `per_group` users each. Users in one group drive loops around the same
/// home, so pairs within a group are the linked ones.
pub fn synthetic_population(
    groups: usize,
    per_group: usize,
    seed: u64,
) -> Result<(Vec<Trajectory>, Vec<PairLabel>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = GeoPoint {
        lat: 30.52,
        lon: 114.31,
    };
    let mut trajs = Vec::new();
    for g in 0..groups {
        let home = PlanarPoint::new(
            rng.random_range(-8000.0..8000.0),
            rng.random_range(-8000.0..8000.0),
        );
        for u in 0..per_group {
            let radius = rng.random_range(300.0..900.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let centre = PlanarPoint::new(
                home.x + rng.random_range(-200.0..200.0),
                home.y + rng.random_range(-200.0..200.0),
            );
            let speed = rng.random_range(6.0..12.0);
            let w = speed / radius;
            let points = (0..600)
                .map(|k| {
                    let t = k as f64;
                    let a = phase + w * t;
                    let p = PlanarPoint::new(centre.x + radius * a.cos(), centre.y + radius * a.sin());
                    Ok(TrackPoint::fix(t, from_local_enu(p, origin)?, speed, w))
                })
                .collect::<Result<Vec<_>>>()?;
            trajs.push(Trajectory::new(format!("g{g}u{u}"), points)?);
        }
    }
    let mut labels = Vec::new();
    for i in 0..trajs.len() {
        for j in i + 1..trajs.len() {
            labels.push(PairLabel {
                id_a: trajs[i].id().to_string(),
                id_b: trajs[j].id().to_string(),
                linked: i / per_group == j / per_group,
            });
        }
    }
    // Interleave so calibration and evaluation both see both classes.
    let mut order: Vec<usize> = (0..labels.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let labels = order.into_iter().map(|i| labels[i].clone()).collect();
    Ok((trajs, labels))
}
