//! Run configuration, read from a TOML file and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Mandatory; may come from `--seed` instead.
    pub seed: Option<u64>,
    /// Worker threads, `0` = one per core.
    pub threads: usize,
    /// Model file, relative to the config file.
    pub model: Option<PathBuf>,
    /// Replicate count for commands that repeat a simulation.
    pub replicates: usize,
    pub field: FieldConfig,
    pub tail: TailConfig,
    pub anchoring: AnchoringConfig,
    pub palm: PalmConfig,
    pub blocks: BlocksConfig,
    pub alignment: AlignmentConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: None,
            threads: 0,
            model: None,
            replicates: 200,
            field: FieldConfig::default(),
            tail: TailConfig::default(),
            anchoring: AnchoringConfig::default(),
            palm: PalmConfig::default(),
            blocks: BlocksConfig::default(),
            alignment: AlignmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Window side lengths, one per axis.
    pub extent: Vec<usize>,
    /// Threshold ladder as quantiles of `|X|` over the window.
    pub quantiles: Vec<f64>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            extent: vec![10_000],
            quantiles: vec![0.99, 0.995, 0.999],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailConfig {
    /// Lags to record; defaults to the Chebyshev ball of radius 2.
    pub lags: Option<Vec<Vec<i64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnchoringConfig {
    /// Cluster radii; default `s, 2s, 5s, 10s` for coefficient support radius `s`.
    pub radii: Option<Vec<usize>>,
    pub kinds: Vec<String>,
}

impl Default for AnchoringConfig {
    fn default() -> Self {
        AnchoringConfig {
            radii: None,
            kinds: ["first_exceedance", "last_exceedance", "first_max"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PalmConfig {
    /// Test function `1{ |x|_inf > level }`.
    pub level: f64,
}

impl Default for PalmConfig {
    fn default() -> Self {
        PalmConfig { level: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlocksConfig {
    /// Window side per axis for moving-average models.
    pub n: usize,
    /// Block side for moving-average models; defaults to `ceil(sqrt(n))`.
    pub r: Option<usize>,
    /// Levels in units of `a_n`.
    pub u_ladder: Vec<f64>,
    /// Anticlustering threshold as a quantile of `|X|` over the first window.
    pub anticlustering_quantile: f64,
    /// Defaults to `[r]`.
    pub r_ladder: Option<Vec<usize>>,
    /// Defaults to five times the coefficient support radius.
    pub m_ladder: Option<Vec<usize>>,
    /// Localization levels in units of `a_n`.
    pub eps_ladder: Vec<f64>,
    /// Neighbourhood radius in blocks.
    pub rho: usize,
    /// `norm_ramp` or `position_weighted`.
    pub test_function: String,
    pub test_eps: f64,
    /// Block sides for score fields; default `ceil(ln(n)^2)` and `ceil(n^(1/4))`.
    pub score_r: Option<Vec<usize>>,
}

impl Default for BlocksConfig {
    fn default() -> Self {
        BlocksConfig {
            n: 10_000,
            r: None,
            u_ladder: vec![1.0, 2.0],
            anticlustering_quantile: 0.999,
            r_ladder: None,
            m_ladder: None,
            eps_ladder: vec![1.0, 0.5],
            rho: 1,
            test_function: "norm_ramp".into(),
            test_eps: 1.0,
            score_r: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Stationary,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignmentConfig {
    /// Horizon tolerance for truncated walks.
    pub tol: f64,
    pub theta_reps: usize,
    pub c_reps: usize,
    /// Siegmund probe level in units of `1/theta*`.
    pub c_probe: f64,
    /// Sequence length.
    pub n: usize,
    pub mode: Mode,
    /// Burn-in tolerance for stationary mode.
    pub burn_in_tol: f64,
    /// Precomputed parameter bundle (JSON), relative to the config file.
    pub params: Option<PathBuf>,
    /// Accepted cluster paths to draw.
    pub count: usize,
    /// Raw scores to convert to p-values.
    pub scores: Vec<f64>,
    /// Heatmap threshold; defaults to the top `field.quantiles` entry.
    pub threshold: Option<f64>,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            tol: 1e-8,
            theta_reps: 1_000_000,
            c_reps: 100_000,
            c_probe: 8.0,
            n: 1000,
            mode: Mode::Stationary,
            burn_in_tol: 1e-6,
            params: None,
            count: 1000,
            scores: Vec::new(),
            threshold: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Reads `path` and resolves file references against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.model, &mut cfg.alignment.params]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
