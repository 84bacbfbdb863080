//! Anchoring functions, anchored extremal-index estimation, and the Palm
//! identity between the tail field and the typical cluster.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{cheb_ball, ClusterShape, LatticeWindow, MultiIndex};
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnchorKind {
    FirstExceedance,
    LastExceedance,
    FirstMax,
}

impl AnchorKind {
    pub const ALL: [AnchorKind; 3] = [
        AnchorKind::FirstExceedance,
        AnchorKind::LastExceedance,
        AnchorKind::FirstMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnchorKind::FirstExceedance => "first_exceedance",
            AnchorKind::LastExceedance => "last_exceedance",
            AnchorKind::FirstMax => "first_max",
        }
    }
}

impl fmt::Display for AnchorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnchorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnchorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown anchor kind `{s}`")))
    }
}

/// Anchor of a finite array under the lexicographic order.
pub fn anchor_index(values: &BTreeMap<MultiIndex, f64>, kind: AnchorKind) -> Result<MultiIndex> {
    anchor_of(values.iter().map(|(i, &v)| (i, v)), kind).cloned()
}

fn anchor_of<'a, I>(entries: I, kind: AnchorKind) -> Result<&'a MultiIndex>
where
    I: Iterator<Item = (&'a MultiIndex, f64)>,
{
    match kind {
        AnchorKind::FirstExceedance => {
            let mut it = entries;
            it.find(|(_, v)| v.abs() > 1.0)
                .map(|(i, _)| i)
                .ok_or(Error::NoExceedance)
        }
        AnchorKind::LastExceedance => entries
            .filter(|(_, v)| v.abs() > 1.0)
            .last()
            .map(|(i, _)| i)
            .ok_or(Error::NoExceedance),
        AnchorKind::FirstMax => {
            let mut best: Option<(&MultiIndex, f64)> = None;
            for (i, v) in entries {
                if best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((i, v.abs()));
                }
            }
            match best {
                Some((i, b)) if b > 0.0 => Ok(i),
                _ => Err(Error::DegenerateCluster),
            }
        }
    }
}

/// Anchored extremal-index estimate at one level and lag radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    pub kind: AnchorKind,
    pub level: f64,
    pub radius: usize,
    pub theta: f64,
    pub se: f64,
    pub n_centers: usize,
    pub n_anchored: usize,
    /// Mean exceedance count of the local clusters anchored at their center.
    pub mean_cluster_size: f64,
    /// `theta * mean_cluster_size` and its standard error.
    pub reciprocal: f64,
    pub reciprocal_se: f64,
}

/// Fraction of interior exceedance centers `i` that anchor their own local
/// cluster `{X_{i+j} / u : |j| <= m}`.
pub fn estimate_theta_anchored(
    window: &LatticeWindow,
    u: f64,
    m: usize,
    kind: AnchorKind,
) -> Result<ThetaEstimate> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::InvalidLevel(u));
    }
    if m == 0 {
        return Err(Error::InvalidArgument(
            "lag radius must be at least 1".into(),
        ));
    }
    let d = window.dim();
    let ball = cheb_ball(d, m as i64);
    let offsets: Vec<isize> = ball.iter().map(|j| window.linear_offset(j)).collect();
    let lo = vec![-(m as i64); d];
    let hi = vec![m as i64; d];
    let origin = MultiIndex::origin(d);
    let values = window.values();

    // (anchored, exceedances in the ball) per center, in lexicographic order
    let per_center: Vec<(bool, usize)> = (0..window.len())
        .into_par_iter()
        .filter(|&lin| values[lin].abs() > u)
        .filter_map(|lin| {
            if !window.box_inside(&window.position(lin), &lo, &hi) {
                return None;
            }
            let local = ball
                .iter()
                .zip(&offsets)
                .map(|(j, &off)| (j, values[(lin as isize + off) as usize] / u));
            let anchored = anchor_of(local, kind).expect("center exceeds the level") == &origin;
            let size = offsets
                .iter()
                .filter(|&&off| values[(lin as isize + off) as usize].abs() > u)
                .count();
            Some((anchored, size))
        })
        .collect();

    let n = per_center.len();
    if n == 0 {
        return Err(Error::InsufficientData(format!(
            "no interior exceedance of level {u}"
        )));
    }
    let n_anchored = per_center.iter().filter(|c| c.0).count();
    let theta = n_anchored as f64 / n as f64;
    let weights: Vec<f64> = per_center
        .iter()
        .map(|&(a, s)| if a { s as f64 } else { 0.0 })
        .collect();
    let (reciprocal, reciprocal_se) = stats::mean_se(&weights);
    let mean_cluster_size = if n_anchored > 0 {
        reciprocal / theta
    } else {
        f64::NAN
    };
    Ok(ThetaEstimate {
        kind,
        level: u,
        radius: m,
        theta,
        se: stats::binomial_se(theta, n),
        n_centers: n,
        n_anchored,
        mean_cluster_size,
        reciprocal,
        reciprocal_se,
    })
}

/// Monte Carlo estimates of both sides of the Palm identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PalmResult {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
}

/// Estimates `E[h(Y)]` and `theta E[h(Z) #{k : |Z_k| > 1}]` from `reps`
/// draws of each side. Replicate `k` of the tail side uses stream `2k` and of
/// the cluster side stream `2k + 1`.
pub fn palm_check<FY, FZ, H>(
    sample_y: FY,
    sample_z: FZ,
    theta: f64,
    h: H,
    reps: usize,
    seed: u64,
) -> PalmResult
where
    FY: Fn(&mut rng::Rng) -> ClusterShape + Sync,
    FZ: Fn(&mut rng::Rng) -> ClusterShape + Sync,
    H: Fn(&ClusterShape) -> f64 + Sync,
{
    let (lhs_terms, rhs_terms): (Vec<f64>, Vec<f64>) = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let y = sample_y(&mut rng::stream(seed, 2 * k));
            let z = sample_z(&mut rng::stream(seed, 2 * k + 1));
            (h(&y), h(&z) * z.count_above(1.0) as f64)
        })
        .unzip();
    let (lhs, lhs_se) = stats::mean_se(&lhs_terms);
    let (m, se) = stats::mean_se(&rhs_terms);
    PalmResult {
        lhs,
        lhs_se,
        rhs: theta * m,
        rhs_se: theta * se,
    }
}
