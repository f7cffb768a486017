//! Monte Carlo realizations of `M = sum_j tau_j Y_j Y_j^*`, where each
//! `Y_j = y_j^(1) ⊗ .. ⊗ y_j^(k)` is a product of `k` independent vectors in
//! `C^n` with entries `xi / sqrt(n)`.
//!
//! Nothing of dimension `n^k` is ever formed on the main path. The nonzero
//! spectrum of `Y D Y^*` equals that of the `m x m` matrix
//! `D^(1/2) G D^(1/2)` (or `G^(1/2) D G^(1/2)` for mixed-sign `tau`), where
//! `G = Y^* Y` has entries `prod_l <y_a^(l), y_b^(l)>`. The remaining
//! `n^k - m` eigenvalues form an atom at zero that is tracked as a count.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`), seeded with the run seed;
//! trial `t` reads stream `t` of that generator.

use faer::{c64, Mat, MatRef};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::to_f64;
use crate::distribution::EntryDistribution;
use crate::linalg::{self, hermitian_eigen, hermitian_eigenvalues, LinalgError};
use crate::moments::{limiting_moment, MomentError, TauModel};
use crate::mplaw::{ks_distance_with_tol, MpError, DEFAULT_QUAD_TOL};
use crate::numeric::compensated_sum;

/// Eigenvalues with `|lambda| <= ZERO_TOL * max |lambda|` join the zero atom.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;
/// Relative agreement required between trace moments from matrix powers and
/// from eigenvalues.
pub const TRACE_CONSISTENCY_TOL: f64 = 1e-8;
/// Largest `n^k` for which the dense `n^k x n^k` check is allowed.
pub const DENSE_MAX_DIM: u64 = 1024;
/// Default memory budget for one run, in bytes.
pub const DEFAULT_MEMORY_LIMIT: u64 = 3 << 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("dimensions must be positive (n={n}, k={k}, m={m})")]
    InvalidDimensions { n: u64, k: u32, m: usize },
    #[error("estimated memory {estimate} bytes exceeds the limit of {limit} bytes")]
    MemoryLimit { estimate: u64, limit: u64 },
    #[error("dense check needs n^k <= {DENSE_MAX_DIM}, got {0}")]
    DenseTooLarge(BigUint),
    #[error("expected {expected} tau coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("{nonzero} nonzero eigenvalues exceed the dimension n^k = {dimension}")]
    RankExceeded { nonzero: usize, dimension: BigUint },
    #[error("trace moment p={p}: matrix powers give {from_powers}, eigenvalues give {from_eigenvalues}")]
    TraceMismatch {
        p: usize,
        from_powers: f64,
        from_eigenvalues: f64,
    },
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    MpLaw(#[from] MpError),
}

/// `m` tensor vectors, each stored as `k` legs of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseVectors {
    n: usize,
    k: usize,
    m: usize,
    entries: Vec<c64>,
}

impl BaseVectors {
    pub fn from_entries(n: usize, k: usize, m: usize, entries: Vec<c64>) -> Self {
        assert_eq!(entries.len(), n * k * m, "entry count must be n * k * m");
        Self { n, k, m, entries }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.k, self.m)
    }

    pub fn entries(&self) -> &[c64] {
        &self.entries
    }

    /// Leg `l` of vector `a`.
    pub fn leg(&self, a: usize, l: usize) -> &[c64] {
        let start = (a * self.k + l) * self.n;
        &self.entries[start..start + self.n]
    }

    pub fn leg_mut(&mut self, a: usize, l: usize) -> &mut [c64] {
        let start = (a * self.k + l) * self.n;
        &mut self.entries[start..start + self.n]
    }

    /// The full `n^k` coordinates of `Y_a`, first leg most significant.
    pub fn tensor(&self, a: usize) -> Vec<c64> {
        let mut out = vec![c64::new(1.0, 0.0)];
        for l in 0..self.k {
            let leg = self.leg(a, l);
            out = out.iter().flat_map(|&x| leg.iter().map(move |&y| x * y)).collect();
        }
        out
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_with(n: usize, k: usize, m: usize, dist: EntryDistribution, rng: &mut ChaCha20Rng) -> BaseVectors {
    let scale = 1.0 / (n as f64).sqrt();
    let entries = (0..n * k * m).map(|_| dist.sample(rng) * scale).collect();
    BaseVectors { n, k, m, entries }
}

/// Draws `m x k` independent base vectors with i.i.d. entries `xi / sqrt(n)`.
/// Deterministic in `seed` (stream 0 of the generator).
pub fn sample_base_vectors(n: usize, k: usize, m: usize, dist: EntryDistribution, seed: u64) -> BaseVectors {
    sample_with(n, k, m, dist, &mut stream_rng(seed, 0))
}

/// `G[a][b] = <Y_a, Y_b> = prod_l <y_a^(l), y_b^(l)>`, linear in the second
/// argument. Costs `O(m^2 k n)`.
pub fn gram_matrix(base: &BaseVectors) -> Mat<c64> {
    let (n, k, m) = base.dims();
    let rows: Vec<Vec<c64>> = (0..m)
        .into_par_iter()
        .map(|a| {
            (a..m)
                .map(|b| {
                    let mut prod = c64::new(1.0, 0.0);
                    for l in 0..k {
                        let (x, y) = (base.leg(a, l), base.leg(b, l));
                        let mut inner = c64::new(0.0, 0.0);
                        for v in 0..n {
                            inner += x[v].conj() * y[v];
                        }
                        prod *= inner;
                    }
                    prod
                })
                .collect()
        })
        .collect();
    let mut g = Mat::<c64>::zeros(m, m);
    for (a, row) in rows.into_iter().enumerate() {
        for (off, z) in row.into_iter().enumerate() {
            let b = a + off;
            g[(a, b)] = z;
            g[(b, a)] = z.conj();
        }
    }
    g
}

fn check_taus(g: MatRef<'_, c64>, taus: &[f64]) -> Result<(), SimulationError> {
    if taus.len() != g.nrows() {
        return Err(SimulationError::CoefficientCount {
            expected: g.nrows(),
            got: taus.len(),
        });
    }
    Ok(())
}

/// The matrix whose spectrum is the nonzero spectrum of `M` when `tau >= 0`:
/// `D^(1/2) G D^(1/2)`.
fn scaled_gram(g: MatRef<'_, c64>, taus: &[f64]) -> Mat<c64> {
    let roots: Vec<f64> = taus.iter().map(|t| t.sqrt()).collect();
    Mat::from_fn(g.nrows(), g.ncols(), |a, b| g[(a, b)] * (roots[a] * roots[b]))
}

/// `(1/n^k) Tr M^p = (1/n^k) Tr (D G)^p` for `p = 1..=p_max`, from repeated
/// `m x m` products.
pub fn trace_moments(g: MatRef<'_, c64>, taus: &[f64], p_max: usize, nk: f64) -> Result<Vec<f64>, SimulationError> {
    check_taus(g, taus)?;
    let a = if taus.iter().all(|&t| t >= 0.0) {
        scaled_gram(g, taus)
    } else {
        Mat::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] * taus[i])
    };
    let traces = linalg::trace_powers(a.as_ref(), p_max)?;
    traces
        .into_iter()
        .enumerate()
        .map(|(idx, tr)| {
            if tr.im.abs() > TRACE_CONSISTENCY_TOL * tr.re.abs().max(1.0) {
                return Err(LinalgError::ImaginaryTrace {
                    p: idx + 1,
                    real: tr.re,
                    imag: tr.im,
                }
                .into());
            }
            Ok(tr.re / nk)
        })
        .collect()
}

/// One realization: the nonzero spectrum plus the size of the zero atom.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    /// Ascending.
    pub nonzero_eigenvalues: Vec<f64>,
    pub zero_multiplicity: BigUint,
    /// `(1/n^k) Tr M^p` for `p = 1..=P`, from matrix powers.
    pub trace_moments: Vec<f64>,
    pub seed: u64,
    pub trial: u64,
    pub dims: Dims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: u64,
    pub k: u32,
    pub m: usize,
}

impl Dims {
    /// `n^k`, exactly.
    pub fn dimension(&self) -> BigUint {
        num_traits::pow(BigUint::from(self.n), self.k as usize)
    }
}

impl SpectrumSample {
    pub fn dimension(&self) -> BigUint {
        self.dims.dimension()
    }

    /// `(1/n^k) sum lambda^p` over the nonzero eigenvalues.
    pub fn eigenvalue_moment(&self, p: usize) -> f64 {
        compensated_sum(self.nonzero_eigenvalues.iter().map(|x| x.powi(p as i32))) / to_f64(&self.dimension())
    }

    /// All `n^k` eigenvalues in ascending order, zeros included. Only for
    /// tiny instances.
    pub fn full_spectrum(&self) -> Result<Vec<f64>, SimulationError> {
        let zeros = self
            .zero_multiplicity
            .to_u64()
            .filter(|&z| z <= DENSE_MAX_DIM)
            .ok_or_else(|| SimulationError::DenseTooLarge(self.dimension()))?;
        let mut all = self.nonzero_eigenvalues.clone();
        all.extend(std::iter::repeat_n(0.0, zeros as usize));
        all.sort_by(f64::total_cmp);
        Ok(all)
    }
}

/// Nonzero eigenvalues of `M` from the `m x m` reduction, ascending.
fn reduced_spectrum(g: MatRef<'_, c64>, taus: &[f64], eigen_tol: f64) -> Result<Vec<f64>, SimulationError> {
    if taus.iter().all(|&t| t >= 0.0) {
        return Ok(hermitian_eigenvalues(scaled_gram(g, taus).as_ref(), eigen_tol)?);
    }
    // Mixed signs: G^(1/2) D G^(1/2) shares its nonzero spectrum with D G.
    let evd = hermitian_eigen(g, eigen_tol)?;
    let m = g.nrows();
    let roots: Vec<f64> = evd.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let u = evd.vectors.as_ref();
    let root_g = Mat::from_fn(m, m, |i, j| {
        let mut acc = c64::new(0.0, 0.0);
        for (l, &r) in roots.iter().enumerate() {
            acc += u[(i, l)] * u[(j, l)].conj() * r;
        }
        acc
    });
    let scaled = Mat::from_fn(m, m, |i, j| root_g[(i, j)] * taus[j]);
    let h = &scaled * &root_g;
    // Symmetrize away rounding before the Hermitian solver.
    let h = Mat::from_fn(m, m, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    Ok(hermitian_eigenvalues(h.as_ref(), eigen_tol)?)
}

/// Tunables for [`esd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub zero_tol: f64,
    pub eigen_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            zero_tol: DEFAULT_ZERO_TOL,
            eigen_tol: linalg::DEFAULT_EIGEN_TOL,
        }
    }
}

/// Spectrum of `M` from its Gram reduction, with trace moments up to `p_max`
/// from matrix powers, cross-checked against the eigenvalues.
pub fn esd(
    g: MatRef<'_, c64>,
    taus: &[f64],
    dims: Dims,
    p_max: usize,
    options: SpectrumOptions,
) -> Result<SpectrumSample, SimulationError> {
    check_taus(g, taus)?;
    let dimension = dims.dimension();
    let nk = to_f64(&dimension);
    let eigenvalues = reduced_spectrum(g, taus, options.eigen_tol)?;
    let scale = eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let threshold = options.zero_tol * scale;
    let nonzero: Vec<f64> = eigenvalues.into_iter().filter(|x| x.abs() > threshold).collect();
    let count = BigUint::from(nonzero.len());
    if count > dimension {
        return Err(SimulationError::RankExceeded {
            nonzero: nonzero.len(),
            dimension,
        });
    }
    let trace_moments = trace_moments(g, taus, p_max, nk)?;
    let sample = SpectrumSample {
        nonzero_eigenvalues: nonzero,
        zero_multiplicity: &dimension - count,
        trace_moments,
        seed: 0,
        trial: 0,
        dims,
    };
    for (idx, &from_powers) in sample.trace_moments.iter().enumerate() {
        let p = idx + 1;
        let from_eigenvalues = sample.eigenvalue_moment(p);
        let scale = from_powers.abs().max(from_eigenvalues.abs()).max(f64::MIN_POSITIVE);
        if (from_powers - from_eigenvalues).abs() > TRACE_CONSISTENCY_TOL * scale.max(1e-300) && (from_powers - from_eigenvalues).abs() > 1e-13 {
            return Err(SimulationError::TraceMismatch {
                p,
                from_powers,
                from_eigenvalues,
            });
        }
    }
    Ok(sample)
}

/// The dense `n^k x n^k` matrix `M`. Test oracle for tiny instances.
pub fn dense_matrix(base: &BaseVectors, taus: &[f64]) -> Result<Mat<c64>, SimulationError> {
    let (n, k, m) = base.dims();
    let dim = dense_dim(n, k)?;
    if taus.len() != m {
        return Err(SimulationError::CoefficientCount { expected: m, got: taus.len() });
    }
    let mut out = Mat::<c64>::zeros(dim, dim);
    for (a, &t) in taus.iter().enumerate() {
        let y = base.tensor(a);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] += y[i] * y[j].conj() * t;
            }
        }
    }
    Ok(out)
}

fn dense_dim(n: usize, k: usize) -> Result<usize, SimulationError> {
    let dim = num_traits::pow(BigUint::from(n), k);
    match dim.to_u64() {
        Some(d) if d <= DENSE_MAX_DIM => Ok(d as usize),
        _ => Err(SimulationError::DenseTooLarge(dim)),
    }
}

/// Comparison of one realization against the dense oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseComparison {
    pub max_eigenvalue_diff: f64,
    pub max_moment_diff: f64,
}

pub fn dense_compare(base: &BaseVectors, taus: &[f64], sample: &SpectrumSample, eigen_tol: f64) -> Result<DenseComparison, SimulationError> {
    let dense = dense_matrix(base, taus)?;
    let spectrum = hermitian_eigenvalues(dense.as_ref(), eigen_tol)?;
    let reduced = sample.full_spectrum()?;
    let max_eigenvalue_diff = spectrum
        .iter()
        .zip(&reduced)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let nk = spectrum.len() as f64;
    let traces = linalg::trace_powers(dense.as_ref(), sample.trace_moments.len())?;
    let max_moment_diff = traces
        .iter()
        .zip(&sample.trace_moments)
        .map(|(t, v)| (t.re / nk - v).abs())
        .fold(0.0, f64::max);
    Ok(DenseComparison {
        max_eigenvalue_diff,
        max_moment_diff,
    })
}

/// Bytes needed by one trial: a handful of `m x m` complex matrices plus the
/// base vectors.
pub fn memory_estimate(n: u64, k: u32, m: usize) -> u64 {
    let m = m as u64;
    let square = m.saturating_mul(m).saturating_mul(16);
    square
        .saturating_mul(6)
        .saturating_add(m.saturating_mul(k as u64).saturating_mul(n).saturating_mul(16))
}

/// `m = round(c n^k)`.
pub fn samples_for_ratio(n: u64, k: u32, c: f64) -> usize {
    (c * (n as f64).powi(k as i32)).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub n: u64,
    pub k: u32,
    pub m: usize,
    pub memory_estimate: u64,
    pub fits: bool,
}

/// A ladder of `(n, k)` sizes at fixed ratio `c`, each flagged by whether one
/// trial fits in `memory_limit`.
pub fn schedule(c: f64, sizes: &[(u64, u32)], memory_limit: u64) -> Vec<ScheduleEntry> {
    sizes
        .iter()
        .map(|&(n, k)| {
            let m = samples_for_ratio(n, k, c);
            let memory_estimate = memory_estimate(n, k, m);
            ScheduleEntry {
                n,
                k,
                m,
                memory_estimate,
                fits: memory_estimate <= memory_limit,
            }
        })
        .collect()
}

/// Everything that defines a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: u64,
    pub k: u32,
    pub m: usize,
    /// Reference ratio for the limit law; `m / n^k` when absent.
    pub c: Option<f64>,
    pub dist: EntryDistribution,
    pub tau: TauModel,
    pub p_max: usize,
    pub trials: u64,
    pub seed: u64,
    pub bins: usize,
    pub dense_check: bool,
    pub options: SpectrumOptions,
    pub memory_limit: u64,
    /// Trials evaluated concurrently; bounds peak memory.
    pub parallel_trials: usize,
}

impl TrialConfig {
    pub fn new(n: u64, k: u32, m: usize, dist: EntryDistribution) -> Self {
        Self {
            n,
            k,
            m,
            c: None,
            dist,
            tau: TauModel::Constant(1.0),
            p_max: 4,
            trials: 1,
            seed: 0,
            bins: 50,
            dense_check: false,
            options: SpectrumOptions::default(),
            memory_limit: DEFAULT_MEMORY_LIMIT,
            parallel_trials: rayon::current_num_threads().max(1),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.n,
            k: self.k,
            m: self.m,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.c.unwrap_or_else(|| self.m as f64 / to_f64(&self.dims().dimension()))
    }

    fn validate(&self) -> Result<(), SimulationError> {
        if self.n == 0 || self.k == 0 || self.m == 0 {
            return Err(SimulationError::InvalidDimensions {
                n: self.n,
                k: self.k,
                m: self.m,
            });
        }
        if self.trials == 0 {
            return Err(SimulationError::NoTrials);
        }
        let concurrent = (self.parallel_trials.max(1) as u64).min(self.trials);
        let estimate = memory_estimate(self.n, self.k, self.m).saturating_mul(concurrent);
        if estimate > self.memory_limit {
            return Err(SimulationError::MemoryLimit {
                estimate,
                limit: self.memory_limit,
            });
        }
        if self.dense_check {
            dense_dim(self.n as usize, self.k as usize)?;
        }
        Ok(())
    }
}

/// Spectral histogram: mass per bin plus the zero atom, all weighted by `1/n^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub zero_atom: f64,
}

impl Histogram {
    fn empty(lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|j| lo + width * j as f64).collect();
        edges[bins] = hi;
        Self {
            edges,
            mass: vec![0.0; bins],
            zero_atom: 0.0,
        }
    }

    fn of_sample(sample: &SpectrumSample, lo: f64, hi: f64, bins: usize) -> Self {
        let mut h = Self::empty(lo, hi, bins);
        let total = to_f64(&sample.dimension());
        let bins = h.mass.len();
        let width = (hi - lo) / bins as f64;
        for &x in &sample.nonzero_eigenvalues {
            let idx = if width > 0.0 { ((x - lo) / width).floor() as isize } else { 0 };
            h.mass[idx.clamp(0, bins as isize - 1) as usize] += 1.0 / total;
        }
        h.zero_atom = to_f64(&sample.zero_multiplicity) / total;
        h
    }

    fn average(hists: &[Histogram]) -> Self {
        let first = &hists[0];
        let count = hists.len() as f64;
        Self {
            edges: first.edges.clone(),
            mass: (0..first.mass.len())
                .map(|j| compensated_sum(hists.iter().map(|h| h.mass[j])) / count)
                .collect(),
            zero_atom: compensated_sum(hists.iter().map(|h| h.zero_atom)) / count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub p: usize,
    pub mean: f64,
    /// `None` with a single trial.
    pub standard_error: Option<f64>,
    pub std_dev: Option<f64>,
    /// Limiting moment for the configured ratio and tau model, when defined.
    pub theory: Option<f64>,
}

/// Results of [`run_trials`], in trial order.
#[derive(Debug, Clone)]
pub struct TrialReport {
    pub config: TrialConfig,
    pub samples: Vec<SpectrumSample>,
    pub moments: Vec<MomentSummary>,
    pub histograms: Vec<Histogram>,
    pub pooled_histogram: Histogram,
    /// KS distance to Marchenko-Pastur per trial; only for `tau = 1`.
    pub ks: Option<Vec<f64>>,
    pub dense: Option<Vec<DenseComparison>>,
}

impl TrialReport {
    pub fn mean_ks(&self) -> Option<f64> {
        self.ks.as_ref().map(|ks| compensated_sum(ks.iter().copied()) / ks.len() as f64)
    }
}

fn summarize(values: &[f64]) -> (f64, Option<f64>, Option<f64>) {
    let count = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / count;
    if values.len() < 2 {
        return (mean, None, None);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (count - 1.0);
    let sd = var.sqrt();
    (mean, Some(sd / count.sqrt()), Some(sd))
}

/// Runs independent trials (trial `t` on stream `t` of the seeded generator)
/// and aggregates them in trial order, so results do not depend on the
/// degree of parallelism.
pub fn run_trials(config: &TrialConfig) -> Result<TrialReport, SimulationError> {
    config.validate()?;
    let dims = config.dims();
    let taus = config.tau.coefficients(config.m)?.into_owned();
    let is_unit_tau = matches!(config.tau, TauModel::Constant(v) if v == 1.0);
    let c = config.ratio();

    let run_one = |trial: u64| -> Result<(SpectrumSample, Option<DenseComparison>, Option<f64>), SimulationError> {
        let mut rng = stream_rng(config.seed, trial);
        let base = sample_with(config.n as usize, config.k as usize, config.m, config.dist, &mut rng);
        let g = gram_matrix(&base);
        let mut sample = esd(g.as_ref(), &taus, dims, config.p_max, config.options)?;
        drop(g);
        sample.seed = config.seed;
        sample.trial = trial;
        let dense = if config.dense_check {
            Some(dense_compare(&base, &taus, &sample, config.options.eigen_tol)?)
        } else {
            None
        };
        let ks = if is_unit_tau {
            Some(ks_distance_with_tol(&sample, c, DEFAULT_QUAD_TOL)?)
        } else {
            None
        };
        Ok((sample, dense, ks))
    };

    let chunk = config.parallel_trials.max(1);
    let trial_ids: Vec<u64> = (0..config.trials).collect();
    let mut outcomes = Vec::with_capacity(trial_ids.len());
    for ids in trial_ids.chunks(chunk) {
        let part: Vec<_> = ids.par_iter().map(|&t| run_one(t)).collect();
        for r in part {
            outcomes.push(r?);
        }
    }

    let mut samples = Vec::with_capacity(outcomes.len());
    let mut dense = Vec::new();
    let mut ks = Vec::new();
    for (s, d, k) in outcomes {
        samples.push(s);
        dense.extend(d);
        ks.extend(k);
    }

    let moments = (1..=config.p_max)
        .map(|p| {
            let values: Vec<f64> = samples.iter().map(|s| s.trace_moments[p - 1]).collect();
            let (mean, standard_error, std_dev) = summarize(&values);
            let theory = match limiting_moment(p, c, &config.tau) {
                Ok(v) => Some(v),
                Err(MomentError::MissingMoment { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(MomentSummary {
                p,
                mean,
                standard_error,
                std_dev,
                theory,
            })
        })
        .collect::<Result<Vec<_>, SimulationError>>()?;

    let (mut lo, mut hi) = (0.0f64, crate::mplaw::MpLaw::new(c)?.upper);
    for s in &samples {
        if let (Some(first), Some(last)) = (s.nonzero_eigenvalues.first(), s.nonzero_eigenvalues.last()) {
            lo = lo.min(*first);
            hi = hi.max(*last);
        }
    }
    let histograms: Vec<Histogram> = samples.iter().map(|s| Histogram::of_sample(s, lo, hi, config.bins)).collect();
    let pooled_histogram = Histogram::average(&histograms);

    Ok(TrialReport {
        config: config.clone(),
        samples,
        moments,
        histograms,
        pooled_histogram,
        ks: is_unit_tau.then_some(ks),
        dense: config.dense_check.then_some(dense),
    })
}

/// Convenience for a single realization with a given seed.
pub fn single_realization(config: &TrialConfig) -> Result<SpectrumSample, SimulationError> {
    let mut one = config.clone();
    one.trials = 1;
    one.dense_check = false;
    Ok(run_trials(&one)?.samples.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_taus(m: usize) -> Vec<f64> {
        vec![1.0; m]
    }

    #[test]
    fn base_vectors_have_unit_norm_and_modulus() {
        for dist in [EntryDistribution::UniformPhase, EntryDistribution::Rademacher, EntryDistribution::RootsOfUnity(5)] {
            let base = sample_base_vectors(6, 3, 4, dist, 11);
            for z in base.entries() {
                assert!((z.norm_sqr() - 1.0 / 6.0).abs() < 1e-15);
            }
            for a in 0..4 {
                for l in 0..3 {
                    let norm: f64 = base.leg(a, l).iter().map(|z| z.norm_sqr()).sum();
                    assert!((norm - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_base_vectors(3, 2, 5, EntryDistribution::Rademacher, 42);
        let b = sample_base_vectors(3, 2, 5, EntryDistribution::Rademacher, 42);
        let c = sample_base_vectors(3, 2, 5, EntryDistribution::Rademacher, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gram_basics() {
        let base = sample_base_vectors(4, 2, 1, EntryDistribution::UniformPhase, 1);
        let g = gram_matrix(&base);
        assert!((g[(0, 0)] - c64::new(1.0, 0.0)).norm() < 1e-14);

        // k = 1 with orthogonal rows of a Fourier-type matrix
        let n = 4;
        let mut entries = Vec::new();
        for a in 0..n {
            for v in 0..n {
                let angle = std::f64::consts::TAU * (a * v) as f64 / n as f64;
                entries.push(c64::from_polar(1.0 / (n as f64).sqrt(), angle));
            }
        }
        let g = gram_matrix(&BaseVectors::from_entries(n, 1, n, entries));
        for a in 0..n {
            for b in 0..n {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((g[(a, b)] - c64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn gram_is_hermitian() {
        let base = sample_base_vectors(3, 3, 6, EntryDistribution::UniformPhase, 5);
        let g = gram_matrix(&base);
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(g[(a, b)], g[(b, a)].conj());
            }
        }
    }

    #[test]
    fn trace_moment_basics() {
        let (n, k, m) = (3usize, 2usize, 5usize);
        let base = sample_base_vectors(n, k, m, EntryDistribution::UniformPhase, 9);
        let g = gram_matrix(&base);
        let t = trace_moments(g.as_ref(), &unit_taus(m), 3, 9.0).unwrap();
        assert!((t[0] - m as f64 / 9.0).abs() < 1e-14);
        let zero = trace_moments(g.as_ref(), &[0.0; 5], 4, 9.0).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(matches!(
            trace_moments(g.as_ref(), &[1.0; 4], 2, 9.0),
            Err(SimulationError::CoefficientCount { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn single_vector_spectrum() {
        let base = sample_base_vectors(2, 3, 1, EntryDistribution::Rademacher, 3);
        let g = gram_matrix(&base);
        let dims = Dims { n: 2, k: 3, m: 1 };
        let s = esd(g.as_ref(), &[1.0], dims, 2, SpectrumOptions::default()).unwrap();
        assert_eq!(s.nonzero_eigenvalues.len(), 1);
        assert!((s.nonzero_eigenvalues[0] - 1.0).abs() < 1e-14);
        assert_eq!(s.zero_multiplicity, BigUint::from(7u32));
    }

    #[test]
    fn eigenvalue_sum_is_tau_sum() {
        let m = 7;
        let base = sample_base_vectors(3, 2, m, EntryDistribution::UniformPhase, 21);
        let g = gram_matrix(&base);
        let taus: Vec<f64> = (0..m).map(|j| 0.25 + j as f64 * 0.5).collect();
        let dims = Dims { n: 3, k: 2, m };
        let s = esd(g.as_ref(), &taus, dims, 3, SpectrumOptions::default()).unwrap();
        let total: f64 = s.nonzero_eigenvalues.iter().sum();
        assert!((total - taus.iter().sum::<f64>()).abs() < 1e-11);
    }

    #[test]
    fn mixed_sign_tau_matches_dense() {
        let (n, k, m) = (2usize, 3usize, 5usize);
        let base = sample_base_vectors(n, k, m, EntryDistribution::UniformPhase, 77);
        let taus = [1.0, -0.5, 2.0, -1.5, 0.3];
        let g = gram_matrix(&base);
        let dims = Dims { n: 2, k: 3, m };
        let s = esd(g.as_ref(), &taus, dims, 4, SpectrumOptions::default()).unwrap();
        let cmp = dense_compare(&base, &taus, &s, 1e-9).unwrap();
        assert!(cmp.max_eigenvalue_diff < 1e-10, "{cmp:?}");
        assert!(cmp.max_moment_diff < 1e-10, "{cmp:?}");
    }

    #[test]
    fn rank_deficient_reduction_folds_zeros() {
        // m > n^k: G is singular and the extra eigenvalues fold into the atom
        let (n, k, m) = (2usize, 2usize, 9usize);
        let base = sample_base_vectors(n, k, m, EntryDistribution::UniformPhase, 4);
        let g = gram_matrix(&base);
        let s = esd(g.as_ref(), &unit_taus(m), Dims { n: 2, k: 2, m }, 2, SpectrumOptions::default()).unwrap();
        assert_eq!(s.nonzero_eigenvalues.len(), 4);
        assert!(num_traits::Zero::is_zero(&s.zero_multiplicity));
    }

    #[test]
    fn memory_guard_and_schedule() {
        let mut cfg = TrialConfig::new(8, 6, 131_072, EntryDistribution::UniformPhase);
        cfg.memory_limit = 1 << 30;
        assert!(matches!(run_trials(&cfg), Err(SimulationError::MemoryLimit { .. })));
        let ladder = schedule(0.5, &[(4, 4), (8, 4), (8, 6)], 1 << 30);
        assert_eq!(ladder[0].m, 128);
        assert_eq!(ladder[1].m, 2048);
        assert!(ladder[0].fits && ladder[1].fits && !ladder[2].fits);
    }

    #[test]
    fn dense_guard() {
        let base = sample_base_vectors(4, 6, 1, EntryDistribution::UniformPhase, 1);
        assert!(matches!(dense_matrix(&base, &[1.0]), Err(SimulationError::DenseTooLarge(_))));
    }
}
