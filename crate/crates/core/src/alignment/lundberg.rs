//! The Lundberg root, the exponentially tilted pair law, relative entropy,
//! and the entropy condition for off-diagonal independence.

use serde::Serialize;

use super::model::{IncrementLaw, ScoreModel};
use crate::error::{Error, Result};

/// Largest exponent `theta max(s)` tried while bracketing.
const OVERFLOW_GUARD: f64 = 700.0;

/// Unique positive root of `E[exp(theta s(A, B))] = 1`.
///
/// The model must have negative drift and some positive score.
pub fn lundberg_solve(model: &ScoreModel, tol: f64) -> Result<f64> {
    let s_max = model
        .pair_masses()
        .iter()
        .map(|(s, _)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    if s_max <= 0.0 {
        return Err(Error::NoPositiveScore);
    }
    let drift = model.drift();
    if drift >= 0.0 {
        return Err(Error::DriftViolation(drift));
    }
    let f = |t: f64| model.mgf_minus_one(t);

    let mut hi = 1.0 / s_max;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi * s_max > OVERFLOW_GUARD {
            return Err(Error::BracketFailure(hi));
        }
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // f is convex and increasing at the root, so Newton from the right
    // stays in the bracket
    let mut theta = hi;
    for _ in 0..4 {
        let step = f(theta) / model.mgf_derivative(theta);
        let next = theta - step;
        if !(next > lo && next <= hi) || f(next).abs() >= f(theta).abs() {
            break;
        }
        theta = next;
    }
    let resid = f(theta).abs();
    if resid > tol {
        return Err(Error::BracketFailure(theta));
    }
    Ok(theta)
}

/// Pair law `mu*(a, b) = exp(theta s(a, b)) mu_A(a) mu_B(b)` and its marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedModel {
    pub theta: f64,
    pub mu: Vec<Vec<f64>>,
    pub mu_a: Vec<f64>,
    pub mu_b: Vec<f64>,
}

pub fn tilt(model: &ScoreModel, theta: f64) -> TiltedModel {
    let k = model.size();
    let mu: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (theta * model.score(a, b)).exp() * model.mu_a()[a] * model.mu_b()[b])
                .collect()
        })
        .collect();
    let mu_a = mu.iter().map(|row| row.iter().sum()).collect();
    let mu_b = (0..k).map(|b| mu.iter().map(|row| row[b]).sum()).collect();
    TiltedModel {
        theta,
        mu,
        mu_a,
        mu_b,
    }
}

impl TiltedModel {
    pub fn total_mass(&self) -> f64 {
        self.mu.iter().flatten().sum()
    }

    /// `E_{mu*}[s]`.
    pub fn mean_score(&self, model: &ScoreModel) -> f64 {
        self.pairs(model).map(|(s, w)| s * w).sum()
    }

    /// Law of `s(A, B)` under the tilted pair law.
    pub fn increment_law(&self, model: &ScoreModel) -> IncrementLaw {
        IncrementLaw::new(self.pairs(model))
    }

    fn pairs<'a>(&'a self, model: &'a ScoreModel) -> impl Iterator<Item = (f64, f64)> + 'a {
        let k = model.size();
        (0..k).flat_map(move |a| (0..k).map(move |b| (model.score(a, b), self.mu[a][b])))
    }
}

/// `H(nu | mu) = sum nu log(nu / mu)` with `0 log 0 = 0`.
pub fn relative_entropy(nu: &[f64], mu: &[f64]) -> Result<f64> {
    if nu.len() != mu.len() {
        return Err(Error::SupportViolation(format!(
            "lengths {} and {} differ",
            nu.len(),
            mu.len()
        )));
    }
    let mut h = 0.0;
    for (k, (&n, &m)) in nu.iter().zip(mu).enumerate() {
        if n < 0.0 || m < 0.0 {
            return Err(Error::SupportViolation(format!("negative mass at {k}")));
        }
        if n > 0.0 {
            if m == 0.0 {
                return Err(Error::SupportViolation(format!(
                    "reference law vanishes at {k}"
                )));
            }
            h += n * (n / m).ln();
        }
    }
    Ok(h.max(0.0))
}

/// Both sides of the entropy condition and whether it holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EPrimeReport {
    pub holds: bool,
    /// `H(mu* | mu_A x mu_B)`.
    pub lhs: f64,
    /// `2 max(H(mu*_A | mu_A), H(mu*_B | mu_B))`.
    pub rhs: f64,
    pub margin: f64,
}

/// Evaluates the condition at the Lundberg root. Holds when the margin
/// exceeds `1e-12 max(1, lhs)`.
pub fn check_e_prime(model: &ScoreModel, tilted: &TiltedModel) -> Result<EPrimeReport> {
    let nu: Vec<f64> = tilted.mu.iter().flatten().copied().collect();
    let prod: Vec<f64> = model.pair_masses().iter().map(|(_, w)| *w).collect();
    let lhs = relative_entropy(&nu, &prod)?;
    let ha = relative_entropy(&tilted.mu_a, model.mu_a())?;
    let hb = relative_entropy(&tilted.mu_b, model.mu_b())?;
    let rhs = 2.0 * ha.max(hb);
    let margin = lhs - rhs;
    Ok(EPrimeReport {
        holds: margin > 1e-12 * lhs.max(1.0),
        lhs,
        rhs,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_letter_root() {
        let m = ScoreModel::match_mismatch(4, 1.0, -1.0).unwrap();
        let t = lundberg_solve(&m, 1e-12).unwrap();
        assert!((t - 3f64.ln()).abs() < 1e-12, "{t}");
    }

    #[test]
    fn golden_ratio_root() {
        let m = ScoreModel::match_mismatch(2, 1.0, -2.0).unwrap();
        let t = lundberg_solve(&m, 1e-12).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((t - phi.ln()).abs() < 1e-12, "{t}");
    }

    #[test]
    fn root_scales_inversely() {
        let m = ScoreModel::match_mismatch(4, 1.0, -1.0).unwrap();
        let t = lundberg_solve(&m, 1e-12).unwrap();
        for c in [0.01, 0.5, 7.0, 300.0] {
            let tc = lundberg_solve(&m.rescaled(c), 1e-12).unwrap();
            assert!((tc * c - t).abs() < 1e-10 * t, "c={c}");
        }
    }

    #[test]
    fn tilt_masses() {
        let m = ScoreModel::match_mismatch(4, 1.0, -1.0).unwrap();
        let tm = tilt(&m, 3f64.ln());
        assert!((tm.mu[0][0] - 3.0 / 16.0).abs() < 1e-15);
        assert!((tm.mu[0][1] - 1.0 / 48.0).abs() < 1e-15);
        assert!((tm.total_mass() - 1.0).abs() < 1e-12);
        assert!((tm.mean_score(&m) - 0.5).abs() < 1e-12);
        let id = tilt(&m, 0.0);
        assert_eq!(id.mu[1][2], 1.0 / 16.0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(relative_entropy(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert!((relative_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            relative_entropy(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::SupportViolation(_))
        ));
        assert!(relative_entropy(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn symmetric_model_satisfies_entropy_condition() {
        let m = ScoreModel::match_mismatch(4, 1.0, -1.0).unwrap();
        let t = lundberg_solve(&m, 1e-12).unwrap();
        let tm = tilt(&m, t);
        let r = check_e_prime(&m, &tm).unwrap();
        assert!(r.holds);
        assert!(r.rhs.abs() < 1e-15);
        assert_eq!(r.margin, r.lhs - r.rhs);
        assert!((r.lhs - t * tm.mean_score(&m)).abs() < 1e-12);
    }

    #[test]
    fn additive_scores_fail_entropy_condition() {
        // s(a, b) = g(a) + g(b) makes mu* a product with equal marginal entropies
        let g = [1.0, -1.5];
        let score = (0..2)
            .map(|a| (0..2).map(|b| g[a] + g[b]).collect())
            .collect();
        let m = ScoreModel::uniform(score).unwrap();
        let t = lundberg_solve(&m, 1e-12).unwrap();
        let r = check_e_prime(&m, &tilt(&m, t)).unwrap();
        assert!(!r.holds);
        assert!(r.margin.abs() < 1e-12);
    }

    #[test]
    fn overflow_guard_reports_bracket_failure() {
        // positive score has mass 1e-320, pushing the root past the guard
        let m = ScoreModel::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 1e-160],
            vec![1.0, 1e-160],
            vec![vec![-1.0, -1.0], vec![-1.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(
            lundberg_solve(&m, 1e-12),
            Err(Error::BracketFailure(_))
        ));
    }
}
