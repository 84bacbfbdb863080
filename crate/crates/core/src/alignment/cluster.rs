//! Rejection sampling of the two-sided walk that describes the shape of a
//! large-score cluster along its diagonal.

use rand::Rng;
use serde::Serialize;

use super::constants::{lundberg_band, replicate};
use super::lundberg::tilt;
use super::model::{IncrementLaw, ScoreModel};
use crate::error::{Error, Result};

/// Accepted two-sided path with `S_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkPath {
    /// `S_1, S_2, ..` up to the first exit below the band, all `<= 0`.
    pub forward: Vec<f64>,
    /// `S_{-1}, S_{-2}, ..` up to the first exit below the band, all `< 0`.
    pub backward: Vec<f64>,
    /// Rejected attempts before this path.
    pub rejections: usize,
}

impl WalkPath {
    /// `S_m` for `m` in the stored range (`S_0 = 0`).
    pub fn at(&self, m: i64) -> Option<f64> {
        match m {
            0 => Some(0.0),
            m if m > 0 => self.forward.get(m as usize - 1).copied(),
            m => self.backward.get((-m) as usize - 1).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSample {
    pub paths: Vec<WalkPath>,
    pub attempts: usize,
    pub acceptance: f64,
    pub acceptance_se: f64,
}

/// Forward walk under the product law; `None` once it rises above 0.
fn forward_leg<R: Rng + ?Sized>(law: &IncrementLaw, band: f64, rng: &mut R) -> Option<Vec<f64>> {
    let mut s = 0.0;
    let mut out = Vec::new();
    loop {
        s += law.sample(rng);
        if s > 0.0 {
            return None;
        }
        out.push(s);
        if s < -band {
            return Some(out);
        }
    }
}

/// Backward walk `S_{-k} = -(eps*_1 + .. + eps*_k)` under the tilted law;
/// `None` once it reaches 0 or above.
fn backward_leg<R: Rng + ?Sized>(law: &IncrementLaw, band: f64, rng: &mut R) -> Option<Vec<f64>> {
    let mut s = 0.0;
    let mut out = Vec::new();
    loop {
        s -= law.sample(rng);
        if s >= 0.0 {
            return None;
        }
        out.push(s);
        if s < -band {
            return Some(out);
        }
    }
}

/// Draws `count` accepted paths; path `k` retries on stream `k` of `seed`.
pub fn sample_cluster_q(
    model: &ScoreModel,
    theta_star: f64,
    tol: f64,
    count: usize,
    seed: u64,
) -> Result<ClusterSample> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon tolerance {tol} outside (0, 1)"
        )));
    }
    let fwd = model.increment_law();
    let bwd = tilt(model, theta_star).increment_law(model);
    let band = lundberg_band(theta_star, tol);
    let paths = replicate(count, seed, |r| {
        let mut rejections = 0usize;
        loop {
            // both legs are always drawn so the stream layout does not depend on outcomes
            let f = forward_leg(&fwd, band, r);
            let b = backward_leg(&bwd, band, r);
            if let (Some(forward), Some(backward)) = (f, b) {
                return WalkPath {
                    forward,
                    backward,
                    rejections,
                };
            }
            rejections += 1;
        }
    });
    let attempts = paths.iter().map(|p| p.rejections + 1).sum::<usize>();
    let acceptance = count as f64 / attempts as f64;
    // attempts per path are geometric; delta method on 1 / mean
    let acceptance_se = if count > 0 {
        acceptance * (1.0 - acceptance).max(0.0).sqrt() / (count as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(ClusterSample {
        paths,
        attempts,
        acceptance,
        acceptance_se,
    })
}
