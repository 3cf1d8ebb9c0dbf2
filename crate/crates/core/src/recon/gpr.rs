//! Zero-mean Gaussian-process regression on time, one independent GP per axis.

use serde::{Deserialize, Serialize};

use super::{Method, ReconstructedGap};
use crate::error::{Error, Result};
use crate::geo::{OutageSegment, PlanarPoint, Trajectory};
use crate::linalg::{cholesky, cholesky_solve, dot, Matrix};

/// Jitter escalation stops after this value.
pub const MAX_JITTER: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GprConfig {
    /// Seconds.
    pub lengthscale: f64,
    /// m².
    pub signal_var: f64,
    /// m².
    pub noise_var: f64,
    pub jitter: f64,
}

impl Default for GprConfig {
    fn default() -> Self {
        GprConfig {
            lengthscale: 10.0,
            signal_var: 100.0,
            noise_var: 1.0,
            jitter: 1e-9,
        }
    }
}

impl GprConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lengthscale > 0.0
            && self.signal_var > 0.0
            && self.noise_var >= 0.0
            && self.jitter > 0.0
            && [self.lengthscale, self.signal_var, self.noise_var, self.jitter]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid GPR settings {self:?}")))
        }
    }

    fn kernel(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        self.signal_var * (-d * d / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprPosterior {
    pub cfg: GprConfig,
    pub times: Vec<f64>,
    /// Lower Cholesky factor of `K + (noise_var + jitter) I`.
    pub chol: Matrix,
    /// Jitter actually needed for the factorization.
    pub jitter: f64,
    pub alpha_x: Vec<f64>,
    pub alpha_y: Vec<f64>,
}

/// `K + (noise_var + jitter) I` over `times`.
pub fn gram_matrix(times: &[f64], cfg: &GprConfig, jitter: f64) -> Matrix {
    let n = times.len();
    Matrix::from_fn(n, n, |i, j| {
        let k = cfg.kernel(times[i], times[j]);
        if i == j {
            k + cfg.noise_var + jitter
        } else {
            k
        }
    })
}

pub fn gpr_fit(times: &[f64], positions: &[PlanarPoint], cfg: &GprConfig) -> Result<GprPosterior> {
    cfg.validate()?;
    if times.len() != positions.len() {
        return Err(Error::Dimension(format!(
            "{} times but {} positions",
            times.len(),
            positions.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::InvalidInput("GPR needs at least 2 training points".into()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("GPR training times must be distinct".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || positions.iter().any(|p| !p.is_finite()) {
        return Err(Error::NumericInput("GPR training data".into()));
    }

    let mut jitter = cfg.jitter;
    let chol = loop {
        if let Some(l) = cholesky(&gram_matrix(times, cfg, jitter)) {
            break l;
        }
        jitter *= 10.0;
        if jitter > MAX_JITTER * (1.0 + 1e-9) {
            return Err(Error::IllConditioned {
                jitter: jitter / 10.0,
            });
        }
    };
    let xs: Vec<f64> = positions.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = positions.iter().map(|p| p.y).collect();
    Ok(GprPosterior {
        cfg: *cfg,
        times: times.to_vec(),
        alpha_x: cholesky_solve(&chol, &xs),
        alpha_y: cholesky_solve(&chol, &ys),
        chol,
        jitter,
    })
}

/// Posterior mean `k*ᵀ α` per axis at each query time.
pub fn gpr_predict(post: &GprPosterior, times: &[f64]) -> Vec<PlanarPoint> {
    times
        .iter()
        .map(|&t| {
            let k: Vec<f64> = post.times.iter().map(|&s| post.cfg.kernel(t, s)).collect();
            PlanarPoint::new(dot(&k, &post.alpha_x), dot(&k, &post.alpha_y))
        })
        .collect()
}

/// GPR over up to `context` valid fixes on each side of the gap.
pub fn gpr_reconstruct(
    traj: &Trajectory,
    seg: &OutageSegment,
    cfg: &GprConfig,
    context: usize,
) -> Result<ReconstructedGap> {
    let pts = traj.points();
    let before = (0..seg.start_idx)
        .rev()
        .filter(|&i| pts[i].gnss_valid)
        .take(context);
    let after = (seg.end_idx + 1..pts.len())
        .filter(|&i| pts[i].gnss_valid)
        .take(context);
    let mut idx: Vec<usize> = before.chain(after).collect();
    idx.sort_unstable();
    let times: Vec<f64> = idx.iter().map(|&i| pts[i].t).collect();
    let positions = idx
        .iter()
        .map(|&i| {
            traj.planar(i)
                .ok_or_else(|| Error::InvalidInput(format!("index {i} has no fix")))
        })
        .collect::<Result<Vec<_>>>()?;
    let post = gpr_fit(&times, &positions, cfg)?;
    let query: Vec<f64> = seg.indices().map(|k| pts[k].t).collect();
    ReconstructedGap::new(Method::Gpr, gpr_predict(&post, &query), *seg)
}
