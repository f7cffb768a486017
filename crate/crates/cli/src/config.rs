//! Experiment configuration: an optional TOML file overlaid by command-line
//! flags, validated into a fully resolved [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tensor_mp::moments::TauModel;
use tensor_mp::simulation::{self, DEFAULT_MEMORY_LIMIT, DEFAULT_ZERO_TOL};
use tensor_mp::EntryDistribution;

use crate::CliError;

pub const DEFAULT_P_MAX: usize = 4;
pub const DEFAULT_TRIALS: u64 = 1;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_POINTS: usize = 201;

/// Every setting a command may read. All fields are optional so the file and
/// the flags can be merged field by field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub n: Option<u64>,
    pub k: Option<u32>,
    pub m: Option<usize>,
    pub c: Option<f64>,
    pub dist: Option<String>,
    pub tau: Option<String>,
    pub p_max: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub bins: Option<usize>,
    pub dense_check: Option<bool>,
    pub memory_limit: Option<u64>,
    pub zero_tol: Option<f64>,
    pub eigen_tol: Option<f64>,
    pub quad_tol: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        Settings { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay!(
            base, top, n, k, m, c, dist, tau, p_max, trials, seed, bins, dense_check, memory_limit, zero_tol, eigen_tol,
            quad_tol, lo, hi, points
        )
    }
}

/// How the coefficients `tau` were specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauSpec {
    Constant { value: f64 },
    File { path: PathBuf, values: Vec<f64> },
    Moments { path: PathBuf, values: Vec<f64> },
}

impl TauSpec {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("invalid tau spec `{spec}` (expected const:v, file:PATH or moments:PATH)"));
        let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
        match kind {
            "const" => {
                let value: f64 = rest.trim().parse().map_err(|_| bad())?;
                if !value.is_finite() {
                    return Err(bad());
                }
                Ok(TauSpec::Constant { value })
            }
            "file" | "moments" => {
                let path = PathBuf::from(rest);
                let values = read_numbers(&path)?;
                Ok(if kind == "file" {
                    TauSpec::File { path, values }
                } else {
                    TauSpec::Moments { path, values }
                })
            }
            _ => Err(bad()),
        }
    }

    pub fn model(&self) -> TauModel {
        match self {
            TauSpec::Constant { value } => TauModel::Constant(*value),
            TauSpec::File { values, .. } => TauModel::Coefficients(values.clone()),
            TauSpec::Moments { values, .. } => TauModel::Moments(values.clone()),
        }
    }
}

/// Numbers separated by whitespace, commas or newlines; `#` starts a comment.
fn read_numbers(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split(|ch: char| ch == ',' || ch.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = token
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: `{token}` is not a number", path.display())))?;
            if !v.is_finite() {
                return Err(CliError::Usage(format!("{}: `{token}` is not finite", path.display())));
            }
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{} holds no numbers", path.display())));
    }
    Ok(out)
}

/// A validated configuration, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<EntryDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauSpec>,
    pub p_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_check: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_limit: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_tol: Option<f64>,
    pub quad_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn positive_ratio(c: f64) -> Result<f64, CliError> {
    if c.is_finite() && c > 0.0 {
        Ok(c)
    } else {
        Err(CliError::Usage(format!("--c must be positive and finite, got {c}")))
    }
}

fn parse_dist(s: &Settings) -> Result<EntryDistribution, CliError> {
    s.dist
        .as_deref()
        .unwrap_or("phase")
        .parse()
        .map_err(|e: tensor_mp::distribution::ParseDistributionError| CliError::Usage(e.to_string()))
}

fn tolerance(value: Option<f64>, default: f64, flag: &str) -> Result<f64, CliError> {
    let v = value.unwrap_or(default);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{flag} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    fn base(command: &str, p_max: usize, quad_tol: f64) -> Self {
        Self {
            command: command.to_string(),
            suite: None,
            n: None,
            k: None,
            m: None,
            c: None,
            dist: None,
            tau: None,
            p_max,
            trials: None,
            seed: None,
            bins: None,
            dense_check: None,
            memory_limit: None,
            zero_tol: None,
            eigen_tol: None,
            quad_tol,
            grid: None,
        }
    }

    pub fn verify(suite: &str, s: &Settings) -> Result<Self, CliError> {
        let mut cfg = Self::base("verify", s.p_max.unwrap_or(6), tensor_mp::mplaw::DEFAULT_QUAD_TOL);
        cfg.suite = Some(suite.to_string());
        Ok(cfg)
    }

    pub fn moments(s: &Settings) -> Result<Self, CliError> {
        let quad_tol = tolerance(s.quad_tol, tensor_mp::mplaw::DEFAULT_QUAD_TOL, "quad-tol")?;
        let mut cfg = Self::base("moments", s.p_max.unwrap_or(DEFAULT_P_MAX), quad_tol);
        cfg.c = Some(positive_ratio(require(s.c, "c")?)?);
        cfg.tau = Some(TauSpec::parse(s.tau.as_deref().unwrap_or("const:1"))?);
        // Optional finite-size comparison.
        if s.n.is_some() || s.k.is_some() || s.m.is_some() {
            let (n, k, m) = (require(s.n, "n")?, require(s.k, "k")?, require(s.m, "m")?);
            check_dims(n, k, m)?;
            cfg.n = Some(n);
            cfg.k = Some(k);
            cfg.m = Some(m);
            cfg.dist = Some(parse_dist(s)?);
        }
        Ok(cfg)
    }

    pub fn simulate(s: &Settings) -> Result<(Self, Vec<String>), CliError> {
        let mut warnings = Vec::new();
        let quad_tol = tolerance(s.quad_tol, tensor_mp::mplaw::DEFAULT_QUAD_TOL, "quad-tol")?;
        let mut cfg = Self::base("simulate", s.p_max.unwrap_or(DEFAULT_P_MAX), quad_tol);
        let n = require(s.n, "n")?;
        let k = require(s.k, "k")?;
        let m = match (s.m, s.c) {
            (Some(m), Some(c)) => {
                let implied = simulation::samples_for_ratio(n, k, positive_ratio(c)?);
                if implied != m {
                    warnings.push(format!("m={m} differs from round(c n^k)={implied}; using m={m} with reference ratio c={c}"));
                }
                m
            }
            (Some(m), None) => m,
            (None, Some(c)) => simulation::samples_for_ratio(n, k, positive_ratio(c)?),
            (None, None) => return Err(CliError::Usage("one of --m or --c is required".into())),
        };
        check_dims(n, k, m)?;
        cfg.n = Some(n);
        cfg.k = Some(k);
        cfg.m = Some(m);
        cfg.c = s.c;
        cfg.dist = Some(parse_dist(s)?);
        let tau = TauSpec::parse(s.tau.as_deref().unwrap_or("const:1"))?;
        if matches!(tau, TauSpec::Moments { .. }) {
            return Err(CliError::Usage("simulate needs explicit coefficients: use const:v or file:PATH".into()));
        }
        cfg.tau = Some(tau);
        let trials = s.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        cfg.trials = Some(trials);
        cfg.seed = Some(s.seed.unwrap_or(DEFAULT_SEED));
        cfg.bins = Some(s.bins.unwrap_or(DEFAULT_BINS).max(1));
        cfg.dense_check = Some(s.dense_check.unwrap_or(false));
        cfg.memory_limit = Some(s.memory_limit.unwrap_or(DEFAULT_MEMORY_LIMIT));
        cfg.zero_tol = Some(tolerance(s.zero_tol, DEFAULT_ZERO_TOL, "zero-tol")?);
        cfg.eigen_tol = Some(tolerance(s.eigen_tol, tensor_mp::linalg::DEFAULT_EIGEN_TOL, "eigen-tol")?);
        Ok((cfg, warnings))
    }

    pub fn mplaw(s: &Settings) -> Result<Self, CliError> {
        let quad_tol = tolerance(s.quad_tol, tensor_mp::mplaw::DEFAULT_QUAD_TOL, "quad-tol")?;
        let mut cfg = Self::base("mplaw", 0, quad_tol);
        let c = positive_ratio(require(s.c, "c")?)?;
        cfg.c = Some(c);
        let upper = (1.0 + c.sqrt()).powi(2);
        let grid = Grid {
            lo: s.lo.unwrap_or(0.0),
            hi: s.hi.unwrap_or(upper),
            points: s.points.unwrap_or(DEFAULT_POINTS),
        };
        if !(grid.lo.is_finite() && grid.hi.is_finite() && grid.lo <= grid.hi) || grid.points == 0 {
            return Err(CliError::Usage("grid needs finite lo <= hi and at least one point".into()));
        }
        cfg.grid = Some(grid);
        Ok(cfg)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hex digest of the configuration, used to name output files.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn check_dims(n: u64, k: u32, m: usize) -> Result<(), CliError> {
    if n == 0 || k == 0 || m == 0 {
        return Err(CliError::Usage(format!("dimensions must be positive (n={n}, k={k}, m={m})")));
    }
    Ok(())
}
