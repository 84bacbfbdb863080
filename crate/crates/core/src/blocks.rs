//! Block decomposition, block clusters, the block point-process intensity,
//! the anticlustering diagnostic and the Poisson-approximation error terms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{box_points, cheb_ball, ClusterShape, LatticeWindow, MultiIndex};
use crate::stats;

/// Partition of `{1..k r}^d` into `k^d` cubes of side `r`, with `k = n / r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    n: usize,
    r: usize,
    k: usize,
    d: usize,
}

pub fn make_blocks(n: usize, r: usize, d: usize) -> Result<BlockGrid> {
    if d == 0 {
        return Err(Error::InvalidBlocking(
            "dimension must be at least 1".into(),
        ));
    }
    if r == 0 || r > n {
        return Err(Error::InvalidBlocking(format!(
            "block side {r} must lie in 1..={n}"
        )));
    }
    Ok(BlockGrid { n, r, k: n / r, d })
}

impl BlockGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.r
    }

    pub fn per_axis(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `k^d`.
    pub fn num_blocks(&self) -> usize {
        self.k.pow(self.d as u32)
    }

    /// Block labels `i in {1..k}^d` in lexicographic order.
    pub fn blocks(&self) -> Vec<MultiIndex> {
        box_points(&vec![1; self.d], &vec![self.k as i64; self.d])
    }

    /// Lattice points `(i - 1) r + 1 <= j <= i r` of block `i`.
    pub fn block_points(&self, block: &MultiIndex) -> Vec<MultiIndex> {
        let r = self.r as i64;
        let lo: Vec<i64> = block.coords().iter().map(|&i| (i - 1) * r + 1).collect();
        let hi: Vec<i64> = block.coords().iter().map(|&i| i * r).collect();
        box_points(&lo, &hi)
    }

    /// Ordered neighbour pairs `(i, j)`, `j` lexicographically after `i` and
    /// within Chebyshev block distance `rho`.
    pub fn neighbour_pairs(&self, rho: usize) -> usize {
        forward_offsets(self.d, rho)
            .iter()
            .map(|o| {
                o.coords()
                    .iter()
                    .map(|&c| self.k.saturating_sub(c.unsigned_abs() as usize))
                    .product::<usize>()
            })
            .sum()
    }

    fn check_window(&self, window: &LatticeWindow) -> Result<()> {
        if window.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: window.dim(),
            });
        }
        if window.extent().iter().any(|&e| e < self.k * self.r) {
            return Err(Error::InvalidBlocking(format!(
                "window extent {:?} does not cover {} blocks of side {}",
                window.extent(),
                self.k,
                self.r
            )));
        }
        Ok(())
    }

    /// Block values in lexicographic order of the block's points.
    fn block_values(&self, window: &LatticeWindow, block: &MultiIndex) -> Vec<f64> {
        let strides = window.strides();
        let r = self.r;
        let corner: usize = block
            .coords()
            .iter()
            .zip(strides)
            .map(|(&i, &s)| (i as usize - 1) * r * s)
            .sum();
        let inner = box_points(&vec![0; self.d], &vec![r as i64 - 1; self.d]);
        inner
            .iter()
            .map(|p| {
                let off: usize = p
                    .coords()
                    .iter()
                    .zip(strides)
                    .map(|(&c, &s)| c as usize * s)
                    .sum();
                window.values()[corner + off]
            })
            .collect()
    }

    /// `max |X_j|` over each block, in block order.
    pub fn block_maxima(&self, window: &LatticeWindow) -> Result<Vec<f64>> {
        self.check_window(window)?;
        Ok(self
            .blocks()
            .par_iter()
            .map(|b| {
                self.block_values(window, b)
                    .iter()
                    .fold(0.0, |m, v| f64::max(m, v.abs()))
            })
            .collect())
    }
}

fn forward_offsets(d: usize, rho: usize) -> Vec<MultiIndex> {
    let origin = MultiIndex::origin(d);
    cheb_ball(d, rho as i64)
        .into_iter()
        .filter(|o| *o > origin)
        .collect()
}

/// A block whose maximum exceeds the level.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCluster {
    pub block: MultiIndex,
    /// Block label divided by `k`, a point of `(0, 1]^d`.
    pub position: Vec<f64>,
    /// Block values divided by the level, canonical form.
    pub shape: ClusterShape,
    /// Block values divided by the block maximum, canonical form.
    pub spectral: ClusterShape,
    pub block_max: f64,
}

pub fn extract_clusters(
    window: &LatticeWindow,
    grid: &BlockGrid,
    level: f64,
) -> Result<Vec<BlockCluster>> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::InvalidLevel(level));
    }
    grid.check_window(window)?;
    let extent = vec![grid.r; grid.d];
    grid.blocks()
        .par_iter()
        .filter_map(|b| {
            let vals = grid.block_values(window, b);
            let max = vals.iter().fold(0.0, |m, v| f64::max(m, v.abs()));
            if max <= level {
                return None;
            }
            let origin = MultiIndex::origin(grid.d);
            let make = |c: f64| {
                let scaled: Vec<f64> = vals.iter().map(|v| v / c).collect();
                ClusterShape::canonicalize_dense(&scaled, &extent, &origin)
            };
            Some((|| {
                Ok(BlockCluster {
                    block: b.clone(),
                    position: b
                        .coords()
                        .iter()
                        .map(|&i| i as f64 / grid.k as f64)
                        .collect(),
                    shape: make(level)?,
                    spectral: make(max)?,
                    block_max: max,
                })
            })())
        })
        .collect()
}

/// `k^d P(M_r > a_n u)` at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRow {
    pub u: f64,
    pub estimate: f64,
    pub se: f64,
    pub exceeding_blocks: usize,
    pub low_count: bool,
}

/// Estimates from block maxima of independent replicate windows: the
/// exceeding-block count divided by the number of windows.
pub fn empirical_intensity(
    maxima: &[Vec<f64>],
    grid: &BlockGrid,
    a_n: f64,
    ladder: &[f64],
) -> Result<Vec<IntensityRow>> {
    if maxima.is_empty() {
        return Err(Error::InsufficientData("no replicate windows".into()));
    }
    if !(a_n > 0.0 && a_n.is_finite()) {
        return Err(Error::InvalidLevel(a_n));
    }
    let kd = grid.num_blocks();
    if let Some(bad) = maxima.iter().find(|m| m.len() != kd) {
        return Err(Error::InvalidBlocking(format!(
            "expected {kd} block maxima per window, got {}",
            bad.len()
        )));
    }
    let total = (maxima.len() * kd) as f64;
    ladder
        .iter()
        .map(|&u| {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::InvalidLevel(u));
            }
            let level = a_n * u;
            let count: usize = maxima
                .iter()
                .map(|m| m.iter().filter(|&&x| x > level).count())
                .sum();
            let p = count as f64 / total;
            Ok(IntensityRow {
                u,
                estimate: kd as f64 * p,
                se: kd as f64 * stats::binomial_se(p, total as usize),
                exceeding_blocks: count,
                low_count: count < 10,
            })
        })
        .collect()
}

/// `P(max_{m < |i| <= r} |X_i| > a_n u | |X_0| > a_n u)` for one `(r, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnticlusteringRow {
    pub r: usize,
    pub m: usize,
    pub estimate: f64,
    pub se: f64,
    pub n_centers: usize,
}

/// Shell-maximum estimate over interior exceedance centers of all windows.
pub fn anticlustering_diagnostic(
    windows: &[LatticeWindow],
    level: f64,
    r_ladder: &[usize],
    m_ladder: &[usize],
) -> Result<Vec<AnticlusteringRow>> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::InvalidLevel(level));
    }
    for &r in r_ladder {
        for &m in m_ladder {
            if m >= r {
                return Err(Error::InvalidArgument(format!(
                    "inner radius {m} must be below block radius {r}"
                )));
            }
        }
    }
    let Some(r_max) = r_ladder.iter().copied().max() else {
        return Ok(Vec::new());
    };
    let Some(first) = windows.first() else {
        return Err(Error::InsufficientData("no windows".into()));
    };
    let d = first.dim();
    let ball = cheb_ball(d, r_max as i64);
    let lo = vec![-(r_max as i64); d];
    let hi = vec![r_max as i64; d];

    // per center: shell maxima s[t] = max_{|j| = t} |X_{i+j}|, t = 0..=r_max
    let mut shells: Vec<Vec<f64>> = Vec::new();
    for w in windows {
        if w.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w.dim(),
            });
        }
        let taps: Vec<(usize, isize)> = ball
            .iter()
            .map(|j| (j.cheb() as usize, w.linear_offset(j)))
            .collect();
        let vals = w.values();
        let found: Vec<Vec<f64>> = (0..w.len())
            .into_par_iter()
            .filter(|&lin| vals[lin].abs() > level && w.box_inside(&w.position(lin), &lo, &hi))
            .map(|lin| {
                let mut s = vec![0.0f64; r_max + 1];
                for &(t, off) in &taps {
                    s[t] = s[t].max(vals[(lin as isize + off) as usize].abs());
                }
                s
            })
            .collect();
        shells.extend(found);
    }
    let n = shells.len();
    if n < 30 {
        return Err(Error::InsufficientData(format!(
            "{n} interior exceedances, need at least 30"
        )));
    }
    let mut rows = Vec::new();
    for &r in r_ladder {
        for &m in m_ladder {
            let hits = shells
                .iter()
                .filter(|s| s[m + 1..=r].iter().any(|&v| v > level))
                .count();
            let p = hits as f64 / n as f64;
            rows.push(AnticlusteringRow {
                r,
                m,
                estimate: p,
                se: stats::binomial_se(p, n),
                n_centers: n,
            });
        }
    }
    Ok(rows)
}

/// Bounded test functions on `[0, 1]^d x` cluster shapes that vanish when
/// the shape norm is at most `eps`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `min(1, max(0, |x| / eps - 1))`.
    NormRamp { eps: f64 },
    /// The ramp multiplied by the mean position coordinate.
    PositionWeighted { eps: f64 },
}

impl TestFunction {
    pub fn support_level(&self) -> f64 {
        match self {
            TestFunction::NormRamp { eps } | TestFunction::PositionWeighted { eps } => *eps,
        }
    }

    pub fn bound(&self) -> f64 {
        1.0
    }

    /// Lipschitz constant in the sup distance on positions and shapes.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TestFunction::NormRamp { eps } => 1.0 / eps,
            TestFunction::PositionWeighted { eps } => 1.0 / eps + 1.0,
        }
    }

    pub fn eval(&self, position: &[f64], x: &ClusterShape) -> f64 {
        let eps = self.support_level();
        let ramp = (x.norm() / eps - 1.0).clamp(0.0, 1.0);
        match self {
            TestFunction::NormRamp { .. } => ramp,
            TestFunction::PositionWeighted { .. } => {
                let w = position.iter().map(|t| t.clamp(0.0, 1.0)).sum::<f64>()
                    / position.len().max(1) as f64;
                w * ramp
            }
        }
    }
}

/// Status of the dependence term of the Poisson-approximation bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum B3Status {
    /// Blocks outside the neighbourhood are at least `separation` apart,
    /// beyond the model's dependence range, so the term vanishes.
    ExactZero {
        dependence_range: usize,
        separation: usize,
    },
    NotComputed,
}

/// Poisson-approximation error terms at one localization level.
#[derive(Debug, Clone, PartialEq)]
pub struct AiRow {
    pub eps: f64,
    pub b1: f64,
    pub b1_se: f64,
    pub b2: f64,
    pub b2_se: f64,
    pub b3: B3Status,
    /// Mean over replicates of `sum_i f(i / k, X_block_i / a_n)`.
    pub f_sum: f64,
}

/// Estimates the neighbour-pair terms from independent replicate windows.
/// A block is localized at level `eps` when its maximum exceeds `eps a_n`.
pub fn ai_bounds(
    windows: &[LatticeWindow],
    grid: &BlockGrid,
    a_n: f64,
    eps_ladder: &[f64],
    f: &TestFunction,
    rho: usize,
    dependence_range: Option<usize>,
) -> Result<Vec<AiRow>> {
    if windows.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two replicate windows".into(),
        ));
    }
    if !(a_n > 0.0 && a_n.is_finite()) {
        return Err(Error::InvalidLevel(a_n));
    }
    let b3 = match dependence_range {
        Some(range) if rho * grid.r >= range => B3Status::ExactZero {
            dependence_range: range,
            separation: rho * grid.r + 1,
        },
        _ => B3Status::NotComputed,
    };
    let maxima: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| grid.block_maxima(w))
        .collect::<Result<_>>()?;
    let blocks = grid.blocks();
    let offsets = forward_offsets(grid.d, rho);
    let k = grid.k as i64;
    let strides: Vec<usize> = crate::lattice::strides_for(&vec![grid.k; grid.d]);
    let lin = |b: &MultiIndex| -> usize {
        b.coords()
            .iter()
            .zip(&strides)
            .map(|(&c, &s)| (c - 1) as usize * s)
            .sum()
    };
    let pairs = grid.neighbour_pairs(rho) as f64;
    let total_blocks = (windows.len() * grid.num_blocks()) as f64;

    let f_eps = f.support_level();
    let f_terms: Vec<f64> = windows
        .iter()
        .map(|w| {
            extract_clusters(w, grid, f_eps * a_n).map(|cl| {
                cl.iter()
                    .map(|c| f.eval(&c.position, &c.shape.scaled(f_eps).expect("positive level")))
                    .sum::<f64>()
            })
        })
        .collect::<Result<_>>()?;
    let f_sum = stats::mean_se(&f_terms).0;

    let mut rows = Vec::new();
    for &eps in eps_ladder {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidLevel(eps));
        }
        let level = eps * a_n;
        let hits: usize = maxima
            .iter()
            .map(|m| m.iter().filter(|&&x| x > level).count())
            .sum();
        let q = hits as f64 / total_blocks;
        let q_se = stats::binomial_se(q, total_blocks as usize);
        let joint: Vec<f64> = maxima
            .iter()
            .map(|m| {
                let mut c = 0usize;
                for b in &blocks {
                    if m[lin(b)] <= level {
                        continue;
                    }
                    for o in &offsets {
                        let j = b.add(o);
                        if j.coords().iter().all(|&x| x >= 1 && x <= k) && m[lin(&j)] > level {
                            c += 1;
                        }
                    }
                }
                c as f64
            })
            .collect();
        let (b2, b2_se) = stats::mean_se(&joint);
        rows.push(AiRow {
            eps,
            b1: q * q * pairs,
            b1_se: 2.0 * q * pairs * q_se,
            b2,
            b2_se,
            b3,
            f_sum,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn mi(c: &[i64]) -> MultiIndex {
        MultiIndex::new(c.to_vec())
    }

    #[test]
    fn block_examples() {
        let g = make_blocks(4, 2, 1).unwrap();
        let b = g.blocks();
        assert_eq!(g.block_points(&b[0]), vec![mi(&[1]), mi(&[2])]);
        assert_eq!(g.block_points(&b[1]), vec![mi(&[3]), mi(&[4])]);
        let g = make_blocks(5, 2, 1).unwrap();
        assert_eq!(g.per_axis(), 2);
        assert!(g
            .blocks()
            .iter()
            .all(|b| !g.block_points(b).contains(&mi(&[5]))));
        let g = make_blocks(4, 2, 2).unwrap();
        assert_eq!(g.blocks().len(), 4);
        assert!(g.blocks().iter().all(|b| g.block_points(b).len() == 4));
        assert!(matches!(
            make_blocks(3, 4, 1),
            Err(Error::InvalidBlocking(_))
        ));
        assert!(make_blocks(3, 0, 1).is_err());
    }

    #[test]
    fn blocks_partition_the_cube() {
        for (n, r, d) in [(7, 2, 1), (6, 3, 2), (5, 2, 3), (9, 4, 2)] {
            let g = make_blocks(n, r, d).unwrap();
            let mut seen = BTreeSet::new();
            for b in g.blocks() {
                for p in g.block_points(&b) {
                    assert!(seen.insert(p), "blocks overlap");
                }
            }
            let kr = (g.per_axis() * r) as i64;
            let all: BTreeSet<_> = box_points(&vec![1; d], &vec![kr; d]).into_iter().collect();
            assert_eq!(seen, all);
        }
    }

    #[test]
    fn neighbour_pairs_count() {
        let g = make_blocks(100, 10, 1).unwrap();
        assert_eq!(g.neighbour_pairs(1), 9);
        assert_eq!(g.neighbour_pairs(0), 0);
        let g = make_blocks(12, 3, 2).unwrap();
        // (k + 2(k-1))^2 - k^2, halved, with k = 4
        assert_eq!(g.neighbour_pairs(1), (100 - 16) / 2);
    }

    #[test]
    fn cluster_extraction() {
        let w = LatticeWindow::new(vec![6], vec![0.1, 0.2, 0.0, 3.0, 0.5, -0.1]).unwrap();
        let g = make_blocks(6, 3, 1).unwrap();
        assert!(extract_clusters(&w, &g, 5.0).unwrap().is_empty());
        let c = extract_clusters(&w, &g, 2.0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].block, mi(&[2]));
        assert_eq!(c[0].shape.value(&mi(&[0])), 1.5);
        assert_eq!(c[0].spectral.value(&mi(&[0])), 1.0);
        assert_eq!(c[0].spectral.value(&mi(&[1])), 0.5 / 3.0);
        assert_eq!(c[0].block_max, 3.0);
        let single = LatticeWindow::new(vec![3], vec![0.0, 4.0, 0.0]).unwrap();
        let c = extract_clusters(&single, &make_blocks(3, 3, 1).unwrap(), 2.0).unwrap();
        assert_eq!(c[0].shape.support().len(), 1);
        assert_eq!(c[0].shape.value(&mi(&[0])), 2.0);
    }

    #[test]
    fn intensity_counts_per_window() {
        let g = make_blocks(4, 2, 1).unwrap();
        let maxima = vec![vec![3.0, 0.5], vec![2.5, 4.0]];
        let rows = empirical_intensity(&maxima, &g, 1.0, &[1.0, 3.5]).unwrap();
        assert_eq!(rows[0].estimate, 1.5);
        assert_eq!(rows[1].estimate, 0.5);
        assert!(rows[1].low_count);
    }

    #[test]
    fn anticlustering_rejects_wide_inner_radius() {
        let w = LatticeWindow::new(vec![10], vec![2.0; 10]).unwrap();
        assert!(matches!(
            anticlustering_diagnostic(std::slice::from_ref(&w), 1.0, &[3], &[3]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            anticlustering_diagnostic(std::slice::from_ref(&w), 1.0, &[3], &[1]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn test_functions_vanish_below_eps() {
        let x = ClusterShape::canonicalize(1, vec![(mi(&[0]), 0.8), (mi(&[1]), 0.3)]).unwrap();
        let f = TestFunction::NormRamp { eps: 1.0 };
        assert_eq!(f.eval(&[0.5], &x), 0.0);
        let y = x.scaled(2.0).unwrap();
        assert!((f.eval(&[0.5], &y) - 0.6).abs() < 1e-15);
        let g = TestFunction::PositionWeighted { eps: 1.0 };
        assert!((g.eval(&[0.5], &y) - 0.3).abs() < 1e-15);
    }
}
