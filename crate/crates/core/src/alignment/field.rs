//! Local alignment score fields via the Lindley recursion, heatmap export and
//! the cluster-connectivity and off-diagonal scans.

use std::collections::HashMap;
use std::io::Write;

use rand::distr::Distribution;
use rand::Rng;

use super::model::ScoreModel;
use crate::error::{Error, Result};
use crate::lattice::LatticeWindow;
use crate::rng;

/// How the recursion is started on each diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldMode {
    /// Scores of segments inside the window: the recursion starts at 0.
    Truncated,
    /// Every diagonal runs `burn_in` extra steps before entering the window.
    Stationary { burn_in: usize },
}

impl FieldMode {
    pub fn burn_in(self) -> usize {
        match self {
            FieldMode::Truncated => 0,
            FieldMode::Stationary { burn_in } => burn_in,
        }
    }
}

/// Burn-in `L` with `exp(-theta* |drift| L / 2) < tol`.
pub fn burn_in_length(drift: f64, theta_star: f64, tol: f64) -> usize {
    (2.0 * (1.0 / tol).ln() / (theta_star * drift.abs())).ceil() as usize
}

/// Letter sequences and the score field they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    /// Letters `A_{1-L}, .., A_n` (burn-in prefix first).
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub burn_in: usize,
    /// `S_{i,j}` at position `(i, j)`, `1 <= i, j <= n`.
    pub window: LatticeWindow,
}

impl ScoreSample {
    /// Letter index of `A_i`, valid for `1 - L <= i <= n`.
    pub fn a_at(&self, i: i64) -> usize {
        self.a[(i + self.burn_in as i64 - 1) as usize]
    }

    pub fn b_at(&self, j: i64) -> usize {
        self.b[(j + self.burn_in as i64 - 1) as usize]
    }
}

struct Letters {
    a: Vec<usize>,
    b: Vec<usize>,
    burn: usize,
}

impl Letters {
    fn draw<R: Rng + ?Sized>(model: &ScoreModel, n: usize, burn: usize, rng: &mut R) -> Self {
        let (la, lb) = model.letter_laws();
        let a = (0..n + burn).map(|_| la.sample(rng)).collect();
        let b = (0..n + burn).map(|_| lb.sample(rng)).collect();
        Letters { a, b, burn }
    }

    fn a(&self, i: i64) -> usize {
        self.a[(i + self.burn as i64 - 1) as usize]
    }

    fn b(&self, j: i64) -> usize {
        self.b[(j + self.burn as i64 - 1) as usize]
    }

    /// Recursion state at boundary cell `(i, j)` (one of them 0) after the
    /// burn-in steps ending there.
    fn boundary(&self, model: &ScoreModel, i: i64, j: i64) -> f64 {
        let mut s = 0.0f64;
        for t in (0..self.burn as i64).rev() {
            s = (s + model.score(self.a(i - t), self.b(j - t))).max(0.0);
        }
        s
    }

    /// Runs the recursion row by row, handing each finished row to `sink`.
    fn sweep(&self, model: &ScoreModel, n: usize, mut sink: impl FnMut(usize, &[f64])) {
        let mut prev: Vec<f64> = (0..=n as i64).map(|j| self.boundary(model, 0, j)).collect();
        let mut cur = vec![0.0f64; n + 1];
        for i in 1..=n {
            cur[0] = self.boundary(model, i as i64, 0);
            let row = &model.scores()[self.a(i as i64)];
            let b = &self.b[self.burn..];
            for j in 1..=n {
                cur[j] = (prev[j - 1] + row[b[j - 1]]).max(0.0);
            }
            sink(i, &cur[1..]);
            std::mem::swap(&mut prev, &mut cur);
        }
    }
}

pub fn simulate_scores<R: Rng + ?Sized>(
    model: &ScoreModel,
    n: usize,
    mode: FieldMode,
    rng: &mut R,
) -> Result<ScoreSample> {
    if n == 0 {
        return Err(Error::InvalidWindow("score field needs n >= 1".into()));
    }
    let letters = Letters::draw(model, n, mode.burn_in(), rng);
    let mut values = Vec::with_capacity(n * n);
    letters.sweep(model, n, |_, row| values.extend_from_slice(row));
    let window = LatticeWindow::new(vec![n, n], values)?;
    Ok(ScoreSample {
        a: letters.a,
        b: letters.b,
        burn_in: letters.burn,
        window,
    })
}

/// Score field from stream 0 of `seed`.
pub fn score_field(
    model: &ScoreModel,
    n: usize,
    seed: u64,
    mode: FieldMode,
) -> Result<LatticeWindow> {
    Ok(simulate_scores(model, n, mode, &mut rng::stream(seed, 0))?.window)
}

/// `M_n = max S_{i,j}` without storing the field.
pub fn max_score<R: Rng + ?Sized>(
    model: &ScoreModel,
    n: usize,
    mode: FieldMode,
    rng: &mut R,
) -> f64 {
    let letters = Letters::draw(model, n, mode.burn_in(), rng);
    let mut m = 0.0f64;
    letters.sweep(model, n, |_, row| {
        m = row.iter().fold(m, |acc, &v| acc.max(v))
    });
    m
}

/// `(i, j, S_{i,j})` with `S_{i,j} > threshold`, in lexicographic order.
pub fn heatmap_export(window: &LatticeWindow, threshold: f64) -> Result<Vec<(usize, usize, f64)>> {
    if window.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: window.dim(),
        });
    }
    let n2 = window.extent()[1];
    Ok(window
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(lin, &v)| (lin / n2 + 1, lin % n2 + 1, v))
        .collect())
}

pub fn write_heatmap<W: Write>(out: W, triplets: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "score"])?;
    for (i, j, v) in triplets {
        w.write_record([i.to_string(), j.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// A connected group of heatmap cells (8-neighbour adjacency).
#[derive(Debug, Clone, PartialEq)]
pub struct CellCluster {
    pub size: usize,
    /// `max (i - j) - min (i - j)` over the cells.
    pub diagonal_spread: i64,
    pub max_score: f64,
}

pub fn connected_clusters(triplets: &[(usize, usize, f64)]) -> Vec<CellCluster> {
    let index: HashMap<(i64, i64), usize> = triplets
        .iter()
        .enumerate()
        .map(|(k, &(i, j, _))| ((i as i64, j as i64), k))
        .collect();
    let mut seen = vec![false; triplets.len()];
    let mut out = Vec::new();
    for start in 0..triplets.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let (mut size, mut lo, mut hi, mut max) = (0usize, i64::MAX, i64::MIN, f64::NEG_INFINITY);
        while let Some(k) = stack.pop() {
            let (i, j, v) = triplets[k];
            let (i, j) = (i as i64, j as i64);
            size += 1;
            lo = lo.min(i - j);
            hi = hi.max(i - j);
            max = max.max(v);
            for di in -1..=1 {
                for dj in -1..=1 {
                    if let Some(&nb) = index.get(&(i + di, j + dj)) {
                        if !seen[nb] {
                            seen[nb] = true;
                            stack.push(nb);
                        }
                    }
                }
            }
        }
        out.push(CellCluster {
            size,
            diagonal_spread: hi - lo,
            max_score: max,
        });
    }
    out
}

/// Conditional off-diagonal exceedance rates around large scores.
#[derive(Debug, Clone, PartialEq)]
pub struct OffDiagonalReport {
    pub level: f64,
    pub n_centers: usize,
    /// `P(S > level - 1)` over the whole window.
    pub unconditional: f64,
    /// `(di, dj, P(S_{i+di, j+dj} > level - 1 | S_{i,j} > level))`, `di != dj`.
    pub rates: Vec<(i64, i64, f64)>,
}

impl OffDiagonalReport {
    pub fn max_rate(&self) -> f64 {
        self.rates.iter().map(|r| r.2).fold(0.0, f64::max)
    }
}

pub fn offdiagonal_scan(
    window: &LatticeWindow,
    level: f64,
    radius: usize,
) -> Result<OffDiagonalReport> {
    if window.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: window.dim(),
        });
    }
    let (n1, n2) = (window.extent()[0] as i64, window.extent()[1] as i64);
    let r = radius as i64;
    let vals = window.values();
    let at = |i: i64, j: i64| vals[((i - 1) * n2 + (j - 1)) as usize];
    let near = level - 1.0;
    let unconditional = vals.iter().filter(|&&v| v > near).count() as f64 / vals.len() as f64;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|a| (-r..=r).map(move |b| (a, b)))
        .filter(|(a, b)| a != b)
        .collect();
    let mut hits = vec![0usize; offsets.len()];
    let mut centers = 0usize;
    for i in 1 + r..=n1 - r {
        for j in 1 + r..=n2 - r {
            if at(i, j) > level {
                centers += 1;
                for (h, &(a, b)) in hits.iter_mut().zip(&offsets) {
                    if at(i + a, j + b) > near {
                        *h += 1;
                    }
                }
            }
        }
    }
    if centers == 0 {
        return Err(Error::InsufficientData(format!(
            "no interior score above {level}"
        )));
    }
    let rates = offsets
        .iter()
        .zip(&hits)
        .map(|(&(a, b), &h)| (a, b, h as f64 / centers as f64))
        .collect();
    Ok(OffDiagonalReport {
        level,
        n_centers: centers,
        unconditional,
        rates,
    })
}
