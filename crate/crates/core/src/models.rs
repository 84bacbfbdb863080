//! Finite-support moving-average fields with Pareto innovations.
//!
//! `X_i = sum_j c_j xi_{i-j}` where `|xi|` is exactly Pareto with
//! `P(|xi| > u) = (u / scale)^-alpha` for `u >= scale` and `xi > 0` with
//! probability `p`. Because the innovation tail is exact, the normalizing
//! level `a_n = scale * (n^d sum_j |c_j|^alpha)^(1/alpha)` is closed form.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Pareto;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{strides_for, ClusterShape, LatticeWindow, MultiIndex};
use crate::rng;

/// Moving-average field specification.
#[derive(Debug, Clone, PartialEq)]
pub struct MaModel {
    dim: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
    alpha: f64,
    p: f64,
    scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaModelFile {
    dim: usize,
    alpha: f64,
    p: f64,
    #[serde(default = "default_scale")]
    scale: f64,
    coeffs: Vec<CoeffEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffEntry {
    index: Vec<i64>,
    value: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl MaModel {
    pub fn new<I>(dim: usize, coeffs: I, alpha: f64, p: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        Self::with_scale(dim, coeffs, alpha, p, 1.0)
    }

    pub fn with_scale<I>(dim: usize, coeffs: I, alpha: f64, p: f64, scale: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "tail index {alpha} must be positive"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidModel(format!(
                "sign balance {p} outside [0, 1]"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "innovation scale {scale} must be positive"
            )));
        }
        let mut map = BTreeMap::new();
        for (idx, c) in coeffs {
            idx.check_dim(dim)
                .map_err(|e| Error::InvalidModel(e.to_string()))?;
            if !c.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "coefficient at {idx} is not finite"
                )));
            }
            if map.insert(idx.clone(), c).is_some() {
                return Err(Error::InvalidModel(format!(
                    "coefficient {idx} given twice"
                )));
            }
        }
        map.retain(|_, c| *c != 0.0);
        if map.is_empty() {
            return Err(Error::InvalidModel(
                "coefficient map has no nonzero entry".into(),
            ));
        }
        let model = MaModel {
            dim,
            coeffs: map,
            alpha,
            p,
            scale,
        };
        if !(model.weight_sum() > 0.0 && model.weight_sum().is_finite()) {
            return Err(Error::InvalidModel(
                "sum of |c_j|^alpha is not positive and finite".into(),
            ));
        }
        Ok(model)
    }

    /// Parses the TOML model file (`dim`, `alpha`, `p`, optional `scale`,
    /// `coeffs = [{ index = [..], value = .. }, ..]`).
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: MaModelFile =
            toml::from_str(text).map_err(|e| Error::InvalidModel(e.message().to_string()))?;
        if let Some(bad) = file.coeffs.iter().find(|c| c.index.len() != file.dim) {
            return Err(Error::InvalidModel(format!(
                "coefficient index of length {} in a {}-dimensional model",
                bad.index.len(),
                file.dim
            )));
        }
        Self::with_scale(
            file.dim,
            file.coeffs
                .into_iter()
                .map(|c| (MultiIndex::new(c.index), c.value)),
            file.alpha,
            file.p,
            file.scale,
        )
    }

    pub fn to_toml(&self) -> String {
        let file = MaModelFile {
            dim: self.dim,
            alpha: self.alpha,
            p: self.p,
            scale: self.scale,
            coeffs: self
                .coeffs
                .iter()
                .map(|(i, &v)| CoeffEntry {
                    index: i.coords().to_vec(),
                    value: v,
                })
                .collect(),
        };
        toml::to_string(&file).expect("model serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.coeffs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `sum_j |c_j|^alpha`, the tail-equivalence constant of `|X_0|`.
    pub fn weight_sum(&self) -> f64 {
        self.coeffs.values().map(|c| c.abs().powf(self.alpha)).sum()
    }

    /// `max_j |j|_inf` over the coefficient support.
    pub fn support_radius(&self) -> usize {
        self.coeffs.keys().map(|j| j.cheb()).max().unwrap_or(0) as usize
    }

    /// Largest lag (Chebyshev, per axis) at which two field values can share
    /// an innovation; values further apart are independent.
    pub fn dependence_range(&self) -> usize {
        let (lo, hi) = self.support_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) as usize)
            .max()
            .unwrap_or(0)
    }

    fn support_box(&self) -> (Vec<i64>, Vec<i64>) {
        let mut lo = vec![i64::MAX; self.dim];
        let mut hi = vec![i64::MIN; self.dim];
        for j in self.coeffs.keys() {
            for (axis, &c) in j.coords().iter().enumerate() {
                lo[axis] = lo[axis].min(c);
                hi[axis] = hi[axis].max(c);
            }
        }
        (lo, hi)
    }

    /// Level `a_n` with `n^d P(|X_0| > a_n) -> 1`.
    pub fn normalizing_level(&self, n: usize) -> f64 {
        self.scale * ((n as f64).powi(self.dim as i32) * self.weight_sum()).powf(1.0 / self.alpha)
    }

    /// Samples the field on `{1..n_1} x .. x {1..n_d}` from stream 0 of `seed`.
    pub fn sample_window(&self, extent: &[usize], seed: u64) -> Result<LatticeWindow> {
        self.sample_window_with(extent, &mut rng::stream(seed, 0))
    }

    /// Samples the field with a caller-provided generator. Innovations are
    /// drawn on the window enlarged by the coefficient support, so every
    /// value is an exact stationary draw.
    pub fn sample_window_with<R: Rng + ?Sized>(
        &self,
        extent: &[usize],
        rng: &mut R,
    ) -> Result<LatticeWindow> {
        if extent.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: extent.len(),
            });
        }
        if extent.contains(&0) {
            return Err(Error::InvalidWindow("every axis needs extent >= 1".into()));
        }
        let (lo, hi) = self.support_box();
        let inn_extent: Vec<usize> = extent
            .iter()
            .zip(lo.iter().zip(&hi))
            .map(|(&n, (l, h))| n + (h - l) as usize)
            .collect();
        let inn_strides = strides_for(&inn_extent);
        let inn_len: usize = inn_extent.iter().product();
        let pareto = Pareto::new(self.scale, self.alpha).expect("validated parameters");
        let innovations: Vec<f64> = (0..inn_len)
            .map(|_| {
                let mag: f64 = pareto.sample(rng);
                if rng.random::<f64>() < self.p {
                    mag
                } else {
                    -mag
                }
            })
            .collect();

        // xi_{i-j} lives at box offset (i - 1) + (hi - j)
        let taps: Vec<(usize, f64)> = self
            .coeffs
            .iter()
            .map(|(j, &c)| {
                let off = j
                    .coords()
                    .iter()
                    .zip(&hi)
                    .zip(&inn_strides)
                    .map(|((&jc, &h), &s)| (h - jc) as usize * s)
                    .sum();
                (off, c)
            })
            .collect();
        let win_strides = strides_for(extent);
        let len: usize = extent.iter().product();
        let mut values = Vec::with_capacity(len);
        for lin in 0..len {
            let mut rem = lin;
            let mut base = 0usize;
            for (ws, is) in win_strides.iter().zip(&inn_strides) {
                base += (rem / ws) * is;
                rem %= ws;
            }
            values.push(
                taps.iter()
                    .map(|&(off, c)| c * innovations[base + off])
                    .sum(),
            );
        }
        LatticeWindow::new(extent.to_vec(), values)
    }

    /// Exact law of the spectral tail field.
    pub fn tail_law(&self) -> TailLawMa {
        let total = self.weight_sum();
        let jumps = self
            .coeffs
            .iter()
            .map(|(j, c)| (j.clone(), c.abs().powf(self.alpha) / total))
            .collect();
        TailLawMa {
            dim: self.dim,
            coeffs: self.coeffs.clone(),
            alpha: self.alpha,
            p: self.p,
            jumps,
        }
    }

    /// Extremal index and the two-atom law of the anchored spectral cluster.
    pub fn extremal_objects(&self) -> MaExtremal {
        let max_c = self.coeffs.values().map(|c| c.abs()).fold(0.0, f64::max);
        let theta = max_c.powf(self.alpha) / self.weight_sum();
        let atom = |sign: f64| {
            ClusterShape::canonicalize(
                self.dim,
                self.coeffs
                    .iter()
                    .map(|(j, &c)| (j.clone(), sign * c / max_c)),
            )
            .expect("nonzero coefficients")
        };
        MaExtremal {
            theta,
            alpha: self.alpha,
            q_atoms: vec![(atom(1.0), self.p), (atom(-1.0), 1.0 - self.p)],
        }
    }

    /// `(theta^(m), d^(m))` of the truncation to coefficients with `|j| <= m`.
    pub fn mdep_params(&self, m: usize) -> Result<(f64, f64)> {
        let kept: Vec<f64> = self
            .coeffs
            .iter()
            .filter(|(j, _)| j.cheb() as usize <= m)
            .map(|(_, c)| c.abs().powf(self.alpha))
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidTruncation(m));
        }
        let d_m: f64 = kept.iter().sum();
        let max = kept.iter().copied().fold(0.0, f64::max);
        Ok((max / d_m, d_m))
    }
}

/// One realization of the spectral tail field together with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAtom {
    pub jump: MultiIndex,
    pub sign: f64,
    pub prob: f64,
    /// Nonzero values `Theta_i = K c_{i+J} / |c_J|`.
    pub field: BTreeMap<MultiIndex, f64>,
}

/// Law of `Theta_i = K c_{i+J} / |c_J|` with `P(J = j) ~ |c_j|^alpha` and
/// `P(K = 1) = p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailLawMa {
    dim: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
    alpha: f64,
    p: f64,
    jumps: Vec<(MultiIndex, f64)>,
}

impl TailLawMa {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Jump distribution `P(J = j)`.
    pub fn jumps(&self) -> &[(MultiIndex, f64)] {
        &self.jumps
    }

    pub fn spectral_field(&self, jump: &MultiIndex, sign: f64) -> BTreeMap<MultiIndex, f64> {
        let cj = self.coeffs.get(jump).copied().unwrap_or(0.0).abs();
        assert!(cj > 0.0, "jump {jump} is outside the coefficient support");
        self.coeffs
            .iter()
            .map(|(j, &c)| (j.sub(jump), sign * c / cj))
            .collect()
    }

    /// Every `(J, K)` realization with positive probability.
    pub fn atoms(&self) -> Vec<SpectralAtom> {
        let mut out = Vec::new();
        for (jump, pj) in &self.jumps {
            for (sign, ps) in [(1.0, self.p), (-1.0, 1.0 - self.p)] {
                let prob = pj * ps;
                if prob > 0.0 {
                    out.push(SpectralAtom {
                        jump: jump.clone(),
                        sign,
                        prob,
                        field: self.spectral_field(jump, sign),
                    });
                }
            }
        }
        out
    }

    pub fn sampler(&self) -> TailSampler<'_> {
        let weights =
            WeightedIndex::new(self.jumps.iter().map(|(_, p)| *p)).expect("positive jump weights");
        TailSampler {
            law: self,
            weights,
            radius: Pareto::new(1.0, self.alpha).expect("alpha > 0"),
        }
    }
}

/// Draws spectral and tail fields from a [`TailLawMa`].
pub struct TailSampler<'a> {
    law: &'a TailLawMa,
    weights: WeightedIndex<f64>,
    radius: Pareto<f64>,
}

impl TailSampler<'_> {
    pub fn spectral<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<MultiIndex, f64> {
        let jump = &self.law.jumps[self.weights.sample(rng)].0;
        let sign = if rng.random::<f64>() < self.law.p {
            1.0
        } else {
            -1.0
        };
        self.law.spectral_field(jump, sign)
    }

    /// Tail field `Y = |Y_0| Theta` with `P(|Y_0| > y) = y^-alpha`, `y >= 1`.
    pub fn tail<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<MultiIndex, f64> {
        let theta = self.spectral(rng);
        let y: f64 = self.radius.sample(rng);
        theta.into_iter().map(|(i, v)| (i, y * v)).collect()
    }
}

/// Extremal index and anchored spectral cluster law of a moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct MaExtremal {
    pub theta: f64,
    pub alpha: f64,
    /// `(+c / max|c|, p)` and `(-c / max|c|, 1 - p)` in canonical form.
    pub q_atoms: Vec<(ClusterShape, f64)>,
}

impl MaExtremal {
    pub fn sample_q<R: Rng + ?Sized>(&self, rng: &mut R) -> &ClusterShape {
        if rng.random::<f64>() < self.q_atoms[0].1 {
            &self.q_atoms[0].0
        } else {
            &self.q_atoms[1].0
        }
    }

    /// Anchored tail cluster `Z = Y Q` with independent Pareto `Y`.
    pub fn sample_z<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterShape {
        let q = self.sample_q(rng).clone();
        let y: f64 = Pareto::new(1.0, self.alpha).expect("alpha > 0").sample(rng);
        q.scaled(y).expect("nonzero scale")
    }
}
