//! Score models: letter laws, score matrix, increment laws and validation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for lattice detection and probability normalization.
pub const LATTICE_TOL: f64 = 1e-9;

/// Spans finer than `max |s| / LATTICE_MAX_RATIO` are treated as nonlattice.
pub const LATTICE_MAX_RATIO: f64 = 1e6;

/// Alphabet, letter laws of the two sequences, and the score matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreModel {
    alphabet: Vec<String>,
    #[serde(rename = "freqsA")]
    mu_a: Vec<f64>,
    #[serde(rename = "freqsB")]
    mu_b: Vec<f64>,
    score: Vec<Vec<f64>>,
}

impl ScoreModel {
    pub fn new(
        alphabet: Vec<String>,
        mu_a: Vec<f64>,
        mu_b: Vec<f64>,
        score: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = ScoreModel {
            alphabet,
            mu_a,
            mu_b,
            score,
        };
        m.check_shape()?;
        Ok(m)
    }

    /// Uniform letter laws on `size` letters named `L0, L1, ..`.
    pub fn uniform(score: Vec<Vec<f64>>) -> Result<Self> {
        let k = score.len();
        let alphabet = (0..k).map(|i| format!("L{i}")).collect();
        let mu = vec![1.0 / k as f64; k];
        Self::new(alphabet, mu.clone(), mu, score)
    }

    /// Uniform letters scoring `matched` on the diagonal and `mismatched` off it.
    pub fn match_mismatch(size: usize, matched: f64, mismatched: f64) -> Result<Self> {
        let score = (0..size)
            .map(|a| {
                (0..size)
                    .map(|b| if a == b { matched } else { mismatched })
                    .collect()
            })
            .collect();
        Self::uniform(score)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: ScoreModel =
            toml::from_str(text).map_err(|e| Error::InvalidModel(e.message().to_string()))?;
        m.check_shape()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("score model serializes")
    }

    fn check_shape(&self) -> Result<()> {
        let k = self.alphabet.len();
        let bad = |m: String| Err(Error::InvalidModel(m));
        if k == 0 {
            return bad("empty alphabet".into());
        }
        if self.mu_a.len() != k || self.mu_b.len() != k {
            return bad(format!("letter laws must have {k} entries"));
        }
        if self.score.len() != k || self.score.iter().any(|row| row.len() != k) {
            return bad(format!("score matrix must be {k} x {k}"));
        }
        for (name, mu) in [("freqsA", &self.mu_a), ("freqsB", &self.mu_b)] {
            if mu.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
                return bad(format!("{name} must be strictly positive"));
            }
            let total: f64 = mu.iter().sum();
            if (total - 1.0).abs() > LATTICE_TOL {
                return bad(format!("{name} sums to {total}, not 1"));
            }
        }
        if self.score.iter().flatten().any(|s| !s.is_finite()) {
            return bad("score matrix has a non-finite entry".into());
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.alphabet.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn mu_a(&self) -> &[f64] {
        &self.mu_a
    }

    pub fn mu_b(&self) -> &[f64] {
        &self.mu_b
    }

    pub fn score(&self, a: usize, b: usize) -> f64 {
        self.score[a][b]
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.score
    }

    /// Multiplies every score by `c`.
    pub fn rescaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        for v in m.score.iter_mut().flatten() {
            *v *= c;
        }
        m
    }

    /// `(s(a, b), mu_A(a) mu_B(b))` over all letter pairs, row-major.
    pub fn pair_masses(&self) -> Vec<(f64, f64)> {
        let k = self.size();
        (0..k)
            .flat_map(|a| (0..k).map(move |b| (a, b)))
            .map(|(a, b)| (self.score[a][b], self.mu_a[a] * self.mu_b[b]))
            .collect()
    }

    /// `E[s(A, B)]` under the product law.
    pub fn drift(&self) -> f64 {
        self.pair_masses().iter().map(|(s, w)| s * w).sum()
    }

    /// `m(theta) - 1 = E[exp(theta s(A, B))] - 1`, accurate near 0.
    pub fn mgf_minus_one(&self, theta: f64) -> f64 {
        self.pair_masses()
            .iter()
            .map(|(s, w)| w * (theta * s).exp_m1())
            .sum()
    }

    /// `m'(theta)`.
    pub fn mgf_derivative(&self, theta: f64) -> f64 {
        self.pair_masses()
            .iter()
            .map(|(s, w)| w * s * (theta * s).exp())
            .sum()
    }

    /// Law of `s(A, B)` under the product of the letter laws.
    pub fn increment_law(&self) -> IncrementLaw {
        IncrementLaw::new(self.pair_masses())
    }

    /// Letter samplers for the two sequences.
    pub fn letter_laws(&self) -> (WeightedIndex<f64>, WeightedIndex<f64>) {
        (
            WeightedIndex::new(&self.mu_a).expect("positive letter law"),
            WeightedIndex::new(&self.mu_b).expect("positive letter law"),
        )
    }
}

/// Finite law of real increments, merged by value.
#[derive(Debug, Clone)]
pub struct IncrementLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl IncrementLaw {
    pub fn new(masses: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut atoms: Vec<(f64, f64)> = masses.into_iter().filter(|&(_, w)| w > 0.0).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (v, w) in atoms {
            if values.last() == Some(&v) {
                *probs.last_mut().expect("nonempty") += w;
            } else {
                values.push(v);
                probs.push(w);
            }
        }
        let index = WeightedIndex::new(&probs).expect("positive increment law");
        IncrementLaw {
            values,
            probs,
            index,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.values[self.index.sample(rng)]
    }
}

/// Outcome of [`validate_model`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub drift: f64,
    pub positive_mass: f64,
    pub lattice: bool,
    /// Maximal span `delta` with every score in `delta Z`, if lattice.
    pub span: Option<f64>,
}

pub fn validate_model(model: &ScoreModel) -> Result<ValidationReport> {
    let masses = model.pair_masses();
    let positive_mass: f64 = masses
        .iter()
        .filter(|(s, _)| *s > 0.0)
        .map(|(_, w)| w)
        .sum();
    if positive_mass <= 0.0 {
        return Err(Error::NoPositiveScore);
    }
    let drift = model.drift();
    if drift >= 0.0 {
        return Err(Error::DriftViolation(drift));
    }
    let span = lattice_span(masses.iter().map(|(s, _)| *s));
    Ok(ValidationReport {
        drift,
        positive_mass,
        lattice: span.is_some(),
        span,
    })
}

/// Largest `delta > 0` with every value in `delta Z` up to [`LATTICE_TOL`].
pub fn lattice_span(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let vals: Vec<f64> = values
        .into_iter()
        .map(f64::abs)
        .filter(|&v| v > LATTICE_TOL)
        .collect();
    let max = vals.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    let floor = max / LATTICE_MAX_RATIO;
    let mut g = vals[0];
    for &v in &vals[1..] {
        g = real_gcd(g, v, floor)?;
    }
    let fits = vals.iter().all(|&v| {
        let q = v / g;
        (q - q.round()).abs() * g <= LATTICE_TOL * max.max(1.0)
    });
    fits.then_some(g)
}

/// Euclid on reals; `None` once the remainder chain drops below `floor`.
fn real_gcd(a: f64, b: f64, floor: f64) -> Option<f64> {
    let (mut a, mut b) = (a.max(b), a.min(b));
    let eps = LATTICE_TOL * a.max(1.0);
    loop {
        if b <= eps {
            return Some(a);
        }
        if b < floor {
            return None;
        }
        let mut r = a % b;
        if b - r <= eps {
            r = 0.0;
        }
        a = b;
        b = r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_letter_reference() {
        let m = ScoreModel::match_mismatch(4, 1.0, -1.0).unwrap();
        let r = validate_model(&m).unwrap();
        assert!((r.drift + 0.5).abs() < 1e-15);
        assert!(r.lattice);
        assert!((r.span.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.positive_mass - 0.25).abs() < 1e-15);
    }

    #[test]
    fn incommensurable_scores_are_nonlattice() {
        let m = ScoreModel::match_mismatch(2, 1.0, -(1.0 + 2f64.sqrt()) / 2.0).unwrap();
        let r = validate_model(&m).unwrap();
        assert!(!r.lattice);
        assert!(r.span.is_none());
    }

    #[test]
    fn validation_errors() {
        let m = ScoreModel::match_mismatch(3, -1.0, -1.0).unwrap();
        assert_eq!(validate_model(&m), Err(Error::NoPositiveScore));
        let m = ScoreModel::match_mismatch(2, 2.0, -1.0).unwrap();
        assert!(matches!(validate_model(&m), Err(Error::DriftViolation(_))));
    }

    #[test]
    fn spans() {
        assert!((lattice_span([0.5, -1.5, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((lattice_span([2.0, -4.0, 6.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((lattice_span([0.3, -0.2]).unwrap() - 0.1).abs() < 1e-9);
        assert_eq!(lattice_span([1.0, std::f64::consts::PI]), None);
        assert_eq!(lattice_span([0.0]), None);
    }

    #[test]
    fn malformed_models() {
        assert!(ScoreModel::new(vec!["a".into()], vec![1.0], vec![0.5], vec![vec![1.0]]).is_err());
        assert!(ScoreModel::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 0.0],
            vec![0.5, 0.5],
            vec![vec![1.0; 2]; 2]
        )
        .is_err());
        assert!(
            ScoreModel::new(vec!["a".into()], vec![1.0], vec![1.0], vec![vec![1.0, 2.0]]).is_err()
        );
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
alphabet = ["A", "B"]
freqsA = [0.5, 0.5]
freqsB = [0.5, 0.5]
score = [[1.0, -2.0], [-2.0, 1.0]]
"#;
        let m = ScoreModel::from_toml(text).unwrap();
        assert_eq!(m.score(0, 1), -2.0);
        assert_eq!(ScoreModel::from_toml(&m.to_toml()).unwrap(), m);
        assert!(ScoreModel::from_toml("alphabet = []\nfreqsA=[]\nfreqsB=[]\nscore=[]").is_err());
    }

    #[test]
    fn increment_law_merges_values() {
        let m = ScoreModel::match_mismatch(4, 1.0, -1.0).unwrap();
        let law = m.increment_law();
        assert_eq!(law.values(), &[-1.0, 1.0]);
        assert!((law.probs()[0] - 0.75).abs() < 1e-15);
        assert!((law.mean() + 0.5).abs() < 1e-15);
    }
}
