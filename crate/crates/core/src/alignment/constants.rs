//! Monte Carlo estimates of the extremal index and the Cramer-Lundberg
//! constant, the Gumbel parameter bundle, its validation, and p-values.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{max_score, FieldMode};
use super::lundberg::{lundberg_solve, tilt};
use super::model::{validate_model, IncrementLaw, ScoreModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

/// Default probability left undecided when a supremum is cut off.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Mean of i.i.d. replicate terms with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub reps: usize,
}

impl Estimate {
    fn from_terms(terms: &[f64]) -> Self {
        let (value, se) = stats::mean_se(terms);
        Estimate {
            value,
            se,
            reps: terms.len(),
        }
    }
}

/// Runs `f(stream)` for streams `0..reps` of `seed`, in stream order.
pub(crate) fn replicate<T, F>(reps: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut rng::Rng) -> T + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|k| f(&mut rng::stream(seed, k)))
        .collect()
}

/// Height above the running position beyond which the walk returns with
/// probability below `tol`.
pub fn lundberg_band(theta_star: f64, tol: f64) -> f64 {
    (1.0 / tol).ln() / theta_star
}

/// Whether `gamma + max_{m >= 1} S_m <= 0` for one forward walk, deciding
/// success once the walk sits more than `band` below `-gamma`.
fn anchored_once<R: Rng + ?Sized>(law: &IncrementLaw, gamma: f64, band: f64, rng: &mut R) -> bool {
    let ceiling = -gamma;
    let mut s = 0.0;
    loop {
        s += law.sample(rng);
        if s > ceiling {
            return false;
        }
        if ceiling - s > band {
            return true;
        }
    }
}

/// `theta = P(Gamma + max_{m >= 1} S_m <= 0)` with `Gamma ~ Exp(theta*)`
/// independent of the walk.
pub fn extremal_index_alignment(
    model: &ScoreModel,
    theta_star: f64,
    reps: usize,
    tol: f64,
    seed: u64,
) -> Estimate {
    let law = model.increment_law();
    let band = lundberg_band(theta_star, tol);
    let gamma = Exp::new(theta_star).expect("positive rate");
    let terms = replicate(reps, seed, |r| {
        let g = gamma.sample(r);
        f64::from(u8::from(anchored_once(&law, g, band, r)))
    });
    let mut est = Estimate::from_terms(&terms);
    est.se = stats::binomial_se(est.value, reps);
    est
}

/// Overshoot `S_tau - u` of the tilted walk at its first passage over `u`.
fn tilted_overshoot<R: Rng + ?Sized>(law: &IncrementLaw, u: f64, rng: &mut R) -> f64 {
    let mut s = 0.0;
    loop {
        s += law.sample(rng);
        if s > u {
            return s - u;
        }
    }
}

/// Siegmund estimate of `P(sup_m S_m > u) e^{theta* u} = E*[exp(-theta* overshoot)]`.
pub fn tail_constant_c(
    model: &ScoreModel,
    theta_star: f64,
    reps: usize,
    u_probe: f64,
    seed: u64,
) -> Result<Estimate> {
    if !(u_probe >= 0.0 && u_probe.is_finite()) {
        return Err(Error::InvalidLevel(u_probe));
    }
    let tilted = tilt(model, theta_star);
    if tilted.mean_score(model) <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "theta* = {theta_star} does not tilt the drift positive"
        )));
    }
    let law = tilted.increment_law(model);
    let terms = replicate(reps, seed, |r| {
        (-theta_star * tilted_overshoot(&law, u_probe, r)).exp()
    });
    Ok(Estimate::from_terms(&terms))
}

/// Monte Carlo settings for [`gumbel_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub theta_reps: usize,
    pub c_reps: usize,
    /// Probe level for the prefactor, in units of `1 / theta*`.
    pub c_probe: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            theta_reps: 1_000_000,
            c_reps: 100_000,
            c_probe: 8.0,
            tol: DEFAULT_TOL,
            seed: 0,
        }
    }
}

/// Gumbel constants of the maximal local score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    pub theta_star: f64,
    pub theta: f64,
    pub theta_se: f64,
    pub c: f64,
    pub c_se: f64,
    pub k_star: f64,
    pub k_star_se: f64,
    pub u_probe: f64,
    pub lattice: bool,
    pub lattice_span: Option<f64>,
    pub drift: f64,
}

impl GumbelParams {
    /// Bundles estimates; `k_star` is the product `theta c`.
    pub fn new(
        theta_star: f64,
        theta: Estimate,
        c: Estimate,
        u_probe: f64,
        lattice_span: Option<f64>,
        drift: f64,
    ) -> Self {
        let k_star = theta.value * c.value;
        let k_star_se = ((c.value * theta.se).powi(2) + (theta.value * c.se).powi(2)).sqrt();
        GumbelParams {
            theta_star,
            theta: theta.value,
            theta_se: theta.se,
            c: c.value,
            c_se: c.se,
            k_star,
            k_star_se,
            u_probe,
            lattice: lattice_span.is_some(),
            lattice_span,
            drift,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: GumbelParams =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
        let ok = |x: f64| x.is_finite();
        if !(p.theta_star > 0.0 && ok(p.theta_star) && p.k_star > 0.0 && ok(p.k_star)) {
            return Err(Error::InvalidModel(
                "theta_star and k_star must be positive and finite".into(),
            ));
        }
        Ok(p)
    }

    /// `exp(-K* exp(-theta* x))`.
    pub fn cdf(&self, x: f64) -> f64 {
        (-self.k_star * (-self.theta_star * x).exp()).exp()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.k_star.ln() - (-p.ln()).ln()) / self.theta_star
    }

    /// Centering `2 ln n / theta*`.
    pub fn centering(&self, n: usize) -> f64 {
        2.0 * (n as f64).ln() / self.theta_star
    }

    /// `P(M_n >= score)` under the Gumbel approximation.
    pub fn pvalue(&self, score: f64, n: usize) -> f64 {
        let x = score - self.centering(n);
        -(-self.k_star * (-self.theta_star * x).exp()).exp_m1()
    }
}

pub fn gumbel_params(model: &ScoreModel, mc: &McConfig) -> Result<GumbelParams> {
    let report = validate_model(model)?;
    let theta_star = lundberg_solve(model, 1e-12)?;
    let theta = extremal_index_alignment(model, theta_star, mc.theta_reps, mc.tol, mc.seed);
    let u_probe = mc.c_probe / theta_star;
    // disjoint stream family for the second estimator
    let c = tail_constant_c(
        model,
        theta_star,
        mc.c_reps,
        u_probe,
        mc.seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;
    Ok(GumbelParams::new(
        theta_star,
        theta,
        c,
        u_probe,
        report.span,
        report.drift,
    ))
}

/// One row of the decile table of [`gumbel_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    pub p: f64,
    pub empirical: f64,
    pub gumbel: f64,
    /// Empirical CDF at the Gumbel quantile.
    pub empirical_cdf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GumbelCheck {
    pub n: usize,
    pub reps: usize,
    pub ks: f64,
    /// Lattice scores: no verdict is attached to the distance.
    pub lattice_warning: bool,
    pub table: Vec<QuantileRow>,
    /// Centered maxima `M_n - 2 ln n / theta*`, in replicate order.
    pub centered: Vec<f64>,
}

/// Centered maxima of `reps` independent fields.
pub fn centered_maxima(
    model: &ScoreModel,
    params: &GumbelParams,
    n: usize,
    reps: usize,
    mode: FieldMode,
    seed: u64,
) -> Vec<f64> {
    let center = params.centering(n);
    replicate(reps, seed, |r| max_score(model, n, mode, r) - center)
}

pub fn gumbel_check(
    model: &ScoreModel,
    params: &GumbelParams,
    n: usize,
    reps: usize,
    mode: FieldMode,
    seed: u64,
) -> GumbelCheck {
    let centered = centered_maxima(model, params, n, reps, mode, seed);
    compare_to_gumbel(params, n, centered)
}

/// KS distance and decile table of centered maxima against the Gumbel law.
pub fn compare_to_gumbel(params: &GumbelParams, n: usize, centered: Vec<f64>) -> GumbelCheck {
    let ks = stats::ks_one_sample(&centered, |x| params.cdf(x));
    let mut sorted = centered.clone();
    sorted.sort_by(f64::total_cmp);
    let table = (1..10)
        .map(|k| {
            let p = k as f64 / 10.0;
            let g = params.quantile(p);
            QuantileRow {
                p,
                empirical: stats::quantile_sorted(&sorted, p),
                gumbel: g,
                empirical_cdf: sorted.partition_point(|&x| x <= g) as f64 / sorted.len() as f64,
            }
        })
        .collect();
    GumbelCheck {
        n,
        reps: centered.len(),
        ks,
        lattice_warning: params.lattice,
        table,
        centered,
    }
}
