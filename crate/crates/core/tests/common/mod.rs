//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls the estimators under test.

#![allow(dead_code)]

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `g[d] = P(walk started at -d never rises above 0)` for `d = 0..=depth`,
/// treating positions below `-depth` as safe.
pub fn never_above_zero(steps: &[(i64, f64)], depth: usize) -> Vec<f64> {
    let n = depth + 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for d in 0..n {
        a[d][d] = 1.0;
        for &(s, p) in steps {
            let next = -(d as i64) + s;
            if next > 0 {
                continue;
            }
            let nd = (-next) as usize;
            if nd > depth {
                b[d] += p;
            } else {
                a[d][nd] -= p;
            }
        }
    }
    solve_linear(a, b)
}

/// Extremal index `P(Gamma + max_{m>=1} S_m <= 0)` of an integer walk with
/// bounded steps, `Gamma ~ Exp(theta_star)`, by the absorbing chain.
pub fn theta_integer_walk(steps: &[(i64, f64)], theta_star: f64, depth: usize) -> f64 {
    let g = never_above_zero(steps, depth);
    let g_at = |d: i64| {
        if d as usize > depth {
            1.0
        } else {
            g[d as usize]
        }
    };
    // P(max_{m>=1} S_m <= -k)
    let f = |k: i64| -> f64 {
        steps
            .iter()
            .filter(|&&(s, _)| s <= -k)
            .map(|&(s, p)| p * g_at(-s - k))
            .sum()
    };
    let c = steps.iter().map(|&(s, _)| -s).max().unwrap();
    (1..=c)
        .map(|k| (f(k) - f(k + 1)) * (1.0 - (-theta_star * k as f64).exp()))
        .sum()
}

/// Law of `S_2` for the forward leg conditioned on `sup_{m>=1} S_m <= 0`.
pub fn conditioned_second_step(steps: &[(i64, f64)], depth: usize) -> Vec<(i64, f64)> {
    let g = never_above_zero(steps, depth);
    let g_at = |d: i64| {
        if d as usize > depth {
            1.0
        } else {
            g[d as usize]
        }
    };
    let mut out: Vec<(i64, f64)> = Vec::new();
    for &(a, pa) in steps {
        for &(b, pb) in steps {
            if a <= 0 && a + b <= 0 {
                let w = pa * pb * g_at(-(a + b));
                match out.iter_mut().find(|(v, _)| *v == a + b) {
                    Some(e) => e.1 += w,
                    None => out.push((a + b, w)),
                }
            }
        }
    }
    let total: f64 = out.iter().map(|e| e.1).sum();
    out.iter_mut().for_each(|e| e.1 /= total);
    out.sort_by_key(|e| e.0);
    out
}

/// Per-path estimate of `mean_u P(sup_{m <= horizon} S_m > u) e^{theta* u}`
/// over `grid`, from direct simulation of the untilted walk. A path stops
/// early once the next unreached level is more than `ln(1/tol)/theta*` above
/// it. Returns (mean, standard error).
pub fn brute_force_prefactor(
    values: &[f64],
    probs: &[f64],
    theta_star: f64,
    grid: &[f64],
    paths: usize,
    horizon: usize,
    tol: f64,
    seed: u64,
) -> (f64, f64) {
    let idx = WeightedIndex::new(probs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = (1.0 / tol).ln() / theta_star;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weights: Vec<f64> = sorted
        .iter()
        .map(|u| (theta_star * u).exp() / sorted.len() as f64)
        .collect();
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..paths {
        let (mut s, mut max) = (0.0f64, 0.0f64);
        let mut reached = 0usize;
        for _ in 0..horizon {
            s += values[idx.sample(&mut rng)];
            if s > max {
                max = s;
                while reached < sorted.len() && max > sorted[reached] {
                    reached += 1;
                }
                if reached == sorted.len() {
                    break;
                }
            }
            if sorted[reached] - s > band {
                break;
            }
        }
        let t: f64 = weights[..reached].iter().sum();
        sum += t;
        sum2 += t * t;
    }
    let n = paths as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `sum_i sum_{j after i, |j - i| <= rho} q^2` by direct enumeration of all
/// block pairs of `{1..k}^d`.
pub fn b1_double_sum(q: f64, k: usize, d: usize, rho: usize) -> f64 {
    let blocks: Vec<Vec<i64>> = (0..k.pow(d as u32))
        .map(|mut lin| {
            let mut c = vec![0i64; d];
            for axis in (0..d).rev() {
                c[axis] = (lin % k) as i64 + 1;
                lin /= k;
            }
            c
        })
        .collect();
    let mut total = 0.0;
    for i in &blocks {
        for j in &blocks {
            let after = j > i;
            let near = i
                .iter()
                .zip(j)
                .all(|(a, b)| (a - b).unsigned_abs() as usize <= rho);
            if after && near {
                total += q * q;
            }
        }
    }
    total
}
