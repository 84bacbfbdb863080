//! Empirical tail and spectral tail fields, and exact evaluation of
//! expectations over the analytic moving-average tail law.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{LatticeWindow, MultiIndex};
use crate::models::TailLawMa;
use crate::stats;

/// One exceedance center with its spectral ratios `X_{i+j} / |X_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSample {
    pub center: MultiIndex,
    pub level: f64,
    pub magnitude: f64,
    pub ratios: BTreeMap<MultiIndex, f64>,
}

impl TailSample {
    pub fn ratio(&self, lag: &MultiIndex) -> f64 {
        self.ratios.get(lag).copied().unwrap_or(0.0)
    }
}

/// Samples at every center `|X_i| > u` whose lag window `i + W` lies inside
/// the observed lattice, in lexicographic center order.
pub fn collect_tail_samples(
    window: &LatticeWindow,
    u: f64,
    lags: &[MultiIndex],
) -> Result<Vec<TailSample>> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::InvalidLevel(u));
    }
    let d = window.dim();
    for j in lags {
        j.check_dim(d)?;
    }
    if !lags.iter().any(MultiIndex::is_origin) {
        return Err(Error::InvalidArgument(
            "lag window must contain the origin".into(),
        ));
    }
    let (lo, hi) = lag_box(d, lags);
    let offsets: Vec<isize> = lags.iter().map(|j| window.linear_offset(j)).collect();
    let values = window.values();
    let samples = (0..window.len())
        .into_par_iter()
        .filter(|&lin| values[lin].abs() > u)
        .filter_map(|lin| {
            let center = window.position(lin);
            if !window.box_inside(&center, &lo, &hi) {
                return None;
            }
            let mag = values[lin].abs();
            let ratios = lags
                .iter()
                .zip(&offsets)
                .map(|(j, &off)| (j.clone(), values[(lin as isize + off) as usize] / mag))
                .collect();
            Some(TailSample {
                center,
                level: u,
                magnitude: mag,
                ratios,
            })
        })
        .collect();
    Ok(samples)
}

fn lag_box(d: usize, lags: &[MultiIndex]) -> (Vec<i64>, Vec<i64>) {
    let mut lo = vec![0i64; d];
    let mut hi = vec![0i64; d];
    for j in lags {
        for (a, &c) in j.coords().iter().enumerate() {
            lo[a] = lo[a].min(c);
            hi[a] = hi[a].max(c);
        }
    }
    (lo, hi)
}

/// Level at the empirical `q`-quantile of `|X|`.
pub fn quantile_level(window: &LatticeWindow, q: f64) -> f64 {
    let abs: Vec<f64> = window.values().iter().map(|v| v.abs()).collect();
    stats::quantile(&abs, q)
}

/// Writes samples as CSV: center coordinates, level, magnitude, then one
/// column per lag.
pub fn write_tail_samples<W: Write>(
    out: W,
    samples: &[TailSample],
    lags: &[MultiIndex],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = lags.first().map(MultiIndex::dim).unwrap_or(1);
    let mut header: Vec<String> = (1..=d).map(|a| format!("center_{a}")).collect();
    header.push("level".into());
    header.push("center_abs".into());
    header.extend(lags.iter().map(|j| format!("ratio{j}")));
    w.write_record(&header)?;
    for s in samples {
        let mut row: Vec<String> = s.center.coords().iter().map(i64::to_string).collect();
        row.push(s.level.to_string());
        row.push(s.magnitude.to_string());
        row.extend(lags.iter().map(|j| s.ratio(j).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Comparison used by [`Functional::Indicator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Gt,
    Lt,
    AbsGt,
    AbsLt,
}

impl Cmp {
    fn holds(self, x: f64, level: f64) -> bool {
        match self {
            Cmp::Gt => x > level,
            Cmp::Lt => x < level,
            Cmp::AbsGt => x.abs() > level,
            Cmp::AbsLt => x.abs() < level,
        }
    }
}

/// Bounded functionals of a field that read finitely many coordinates.
///
/// Every member is piecewise polynomial along rays `y -> y * theta`, which
/// lets expectations over a Pareto radius be integrated in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    Const(f64),
    /// `1{x_at <cmp> level}`.
    Indicator {
        at: MultiIndex,
        cmp: Cmp,
        level: f64,
    },
    /// `1{sup_i |x_i| > level}`.
    SupGt(f64),
    /// `min(hi, max(lo, x_at))`.
    Clamp {
        at: MultiIndex,
        lo: f64,
        hi: f64,
    },
    Sum(Vec<Functional>),
    Product(Vec<Functional>),
    Scaled(f64, Box<Functional>),
}

impl Functional {
    pub fn indicator(at: MultiIndex, cmp: Cmp, level: f64) -> Self {
        Functional::Indicator { at, cmp, level }
    }

    pub fn clamp(at: MultiIndex, lo: f64, hi: f64) -> Self {
        Functional::Clamp { at, lo, hi }
    }

    /// Checks coordinate dimensions and parameters.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFunctional(m));
        match self {
            Functional::Const(c) | Functional::SupGt(c) => {
                if !c.is_finite() {
                    return bad(format!("non-finite constant {c}"));
                }
            }
            Functional::Indicator { at, level, .. } => {
                if at.dim() != dim {
                    return bad(format!("coordinate {at} does not live in dimension {dim}"));
                }
                if !level.is_finite() {
                    return bad(format!("non-finite level {level}"));
                }
            }
            Functional::Clamp { at, lo, hi } => {
                if at.dim() != dim {
                    return bad(format!("coordinate {at} does not live in dimension {dim}"));
                }
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return bad(format!("clamp range [{lo}, {hi}] is not a finite interval"));
                }
            }
            Functional::Sum(fs) | Functional::Product(fs) => {
                for f in fs {
                    f.validate(dim)?;
                }
            }
            Functional::Scaled(c, f) => {
                if !c.is_finite() {
                    return bad(format!("non-finite scale {c}"));
                }
                f.validate(dim)?;
            }
        }
        Ok(())
    }

    /// Value on a field given by its nonzero entries.
    pub fn eval(&self, field: &BTreeMap<MultiIndex, f64>) -> f64 {
        let at = |i: &MultiIndex| field.get(i).copied().unwrap_or(0.0);
        match self {
            Functional::Const(c) => *c,
            Functional::Indicator { at: i, cmp, level } => {
                f64::from(u8::from(cmp.holds(at(i), *level)))
            }
            Functional::SupGt(level) => {
                let sup = field.values().map(|v| v.abs()).fold(0.0, f64::max);
                f64::from(u8::from(sup > *level))
            }
            Functional::Clamp { at: i, lo, hi } => at(i).clamp(*lo, *hi),
            Functional::Sum(fs) => fs.iter().map(|f| f.eval(field)).sum(),
            Functional::Product(fs) => fs.iter().map(|f| f.eval(field)).product(),
            Functional::Scaled(c, f) => c * f.eval(field),
        }
    }

    /// Radii `y > 1` where `y -> self(y * theta)` can change branch.
    fn breakpoints(&self, theta: &BTreeMap<MultiIndex, f64>, out: &mut Vec<f64>) {
        let at = |i: &MultiIndex| theta.get(i).copied().unwrap_or(0.0);
        let mut push = |level: f64, v: f64| {
            if v != 0.0 {
                let y = level / v;
                if y > 1.0 && y.is_finite() {
                    out.push(y);
                }
            }
        };
        match self {
            Functional::Const(_) => {}
            Functional::Indicator { at: i, cmp, level } => {
                let v = at(i);
                match cmp {
                    Cmp::Gt | Cmp::Lt => push(*level, v),
                    Cmp::AbsGt | Cmp::AbsLt => push(*level, v.abs()),
                }
            }
            Functional::SupGt(level) => {
                push(*level, theta.values().map(|v| v.abs()).fold(0.0, f64::max))
            }
            Functional::Clamp { at: i, lo, hi } => {
                let v = at(i);
                push(*lo, v);
                push(*hi, v);
            }
            Functional::Sum(fs) | Functional::Product(fs) => {
                for f in fs {
                    f.breakpoints(theta, out);
                }
            }
            Functional::Scaled(_, f) => f.breakpoints(theta, out),
        }
    }

    /// Polynomial in `y` (coefficients by ascending power) that agrees with
    /// `y -> self(y * theta)` on the open piece containing `probe`.
    fn piece(&self, theta: &BTreeMap<MultiIndex, f64>, probe: f64) -> Vec<f64> {
        let at = |i: &MultiIndex| theta.get(i).copied().unwrap_or(0.0);
        match self {
            Functional::Const(c) => vec![*c],
            Functional::Indicator { at: i, cmp, level } => {
                vec![f64::from(u8::from(cmp.holds(probe * at(i), *level)))]
            }
            Functional::SupGt(level) => {
                let sup = theta.values().map(|v| v.abs()).fold(0.0, f64::max);
                vec![f64::from(u8::from(probe * sup > *level))]
            }
            Functional::Clamp { at: i, lo, hi } => {
                let v = at(i);
                let x = probe * v;
                if x <= *lo {
                    vec![*lo]
                } else if x >= *hi {
                    vec![*hi]
                } else {
                    vec![0.0, v]
                }
            }
            Functional::Sum(fs) => fs
                .iter()
                .fold(vec![0.0], |acc, f| poly_add(&acc, &f.piece(theta, probe))),
            Functional::Product(fs) => fs
                .iter()
                .fold(vec![1.0], |acc, f| poly_mul(&acc, &f.piece(theta, probe))),
            Functional::Scaled(c, f) => f.piece(theta, probe).into_iter().map(|a| c * a).collect(),
        }
    }

    /// `E[self(Y theta)]` where `P(Y > y) = y^-alpha` on `[1, inf)`.
    pub fn pareto_expectation(&self, theta: &BTreeMap<MultiIndex, f64>, alpha: f64) -> f64 {
        let mut cuts = Vec::new();
        self.breakpoints(theta, &mut cuts);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for (k, &lo) in cuts.iter().enumerate() {
            let hi = cuts.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let probe = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * lo + 1.0
            };
            for (p, &a) in self.piece(theta, probe).iter().enumerate() {
                if a != 0.0 {
                    total += a * pareto_moment(p as f64, alpha, lo, hi);
                }
            }
        }
        total
    }
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (k, v) in a.iter().enumerate() {
        out[k] += v;
    }
    for (k, v) in b.iter().enumerate() {
        out[k] += v;
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `int_lo^hi y^p alpha y^(-alpha-1) dy`.
fn pareto_moment(p: f64, alpha: f64, lo: f64, hi: f64) -> f64 {
    let e = p - alpha;
    if e == 0.0 {
        return alpha * (hi / lo).ln();
    }
    assert!(
        hi.is_finite() || e < 0.0,
        "unbounded piece of degree {p} has infinite moment"
    );
    let upper = if hi.is_finite() { hi.powf(e) } else { 0.0 };
    alpha * (upper - lo.powf(e)) / e
}

/// `E[h(Y)]` under the analytic tail law, by enumeration of the spectral
/// atoms and closed-form integration over the radius.
pub fn tail_expectation(law: &TailLawMa, h: &Functional) -> Result<f64> {
    h.validate(law.dim())?;
    Ok(law
        .atoms()
        .iter()
        .map(|a| a.prob * h.pareto_expectation(&a.field, law.alpha()))
        .sum())
}

/// Both sides of `E[h(Y) 1{|Y_j| > 1}] = E[h(Y_{. - j}) 1{|Y_{-j}| > 1}]`.
pub fn time_change_check(law: &TailLawMa, h: &Functional, j: &MultiIndex) -> Result<(f64, f64)> {
    h.validate(law.dim())?;
    j.check_dim(law.dim())
        .map_err(|e| Error::InvalidFunctional(e.to_string()))?;
    let origin = MultiIndex::origin(law.dim());
    let lhs_f = Functional::Product(vec![
        h.clone(),
        Functional::indicator(j.clone(), Cmp::AbsGt, 1.0),
    ]);
    let rhs_f = Functional::Product(vec![
        h.clone(),
        Functional::indicator(origin, Cmp::AbsGt, 1.0),
    ]);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for atom in law.atoms() {
        // (Y_{. - j})_i = Y_{i - j}: the field with keys moved by +j
        let shifted: BTreeMap<MultiIndex, f64> =
            atom.field.iter().map(|(i, &v)| (i.add(j), v)).collect();
        lhs += atom.prob * lhs_f.pareto_expectation(&atom.field, law.alpha());
        rhs += atom.prob * rhs_f.pareto_expectation(&shifted, law.alpha());
    }
    Ok((lhs, rhs))
}
