//! Limiting and exact finite-size spectral moments.
//!
//! The limiting `p`-th moment of the normalized spectrum is
//! `sum_s c^s sum_{alpha} prod_t m_{deg_t(alpha)}`, with `alpha` running over
//! non-crossing canonical `s`-sequences of length `p` and `m_q` the limiting
//! moments of the coefficients `tau`. For `tau = 1` this is the
//! Marchenko-Pastur moment `sum_s c^s N(p, s)` with Narayana numbers `N`.
//!
//! [`exact_mean_trace_moment`] evaluates the finite `(n, k, m)` expectation
//! `n^-k E Tr M^p` by summing the trace expansion over all canonical
//! `(alpha, i)` pairs, without any asymptotic simplification.

use std::borrow::Cow;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{c1_count, falling_factorial, to_f64};
use crate::distribution::MixedMomentRule;
use crate::graphs::build_graph;
use crate::numeric::{compensated_complex_sum, compensated_sum};
use crate::sequences::{enumerate_canonical, enumerate_canonical_capped, CanonicalSequence, SequenceError, DEFAULT_P_CAP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("tau model has no moment of order {q}")]
    MissingMoment { q: usize },
    #[error("explicit tau coefficients are required")]
    CoefficientsRequired,
    #[error("expected {expected} tau coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("ratio c must be positive and finite, got {0}")]
    InvalidRatio(f64),
    #[error("dimensions must be positive (n={n}, k={k}, m={m})")]
    InvalidDimensions { n: u64, k: u32, m: usize },
    #[error("moment order must be at least 1")]
    ZeroOrder,
    #[error("empty coefficient list")]
    EmptyCoefficients,
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// The coefficient sequence `tau`, given explicitly, by its limiting moments,
/// or as a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauModel {
    /// `tau_j = v` for every `j`; moments `v^q`.
    Constant(f64),
    /// Explicit `tau_1 .. tau_m`; moments are the empirical averages.
    Coefficients(Vec<f64>),
    /// Limiting moments `m_1 .. m_Q` only.
    Moments(Vec<f64>),
}

impl TauModel {
    /// `m_q`, with `m_0 = 1`.
    pub fn moment(&self, q: usize) -> Option<f64> {
        if q == 0 {
            return Some(1.0);
        }
        match self {
            TauModel::Constant(v) => Some(v.powi(q as i32)),
            TauModel::Coefficients(taus) if taus.is_empty() => None,
            TauModel::Coefficients(taus) => Some(compensated_sum(taus.iter().map(|t| t.powi(q as i32))) / taus.len() as f64),
            TauModel::Moments(ms) => ms.get(q - 1).copied(),
        }
    }

    /// The first `q_max` moments.
    pub fn moments(&self, q_max: usize) -> Result<Vec<f64>, MomentError> {
        (1..=q_max)
            .map(|q| self.moment(q).ok_or(MomentError::MissingMoment { q }))
            .collect()
    }

    /// Explicit coefficients for `m` samples.
    pub fn coefficients(&self, m: usize) -> Result<Cow<'_, [f64]>, MomentError> {
        match self {
            TauModel::Constant(v) => Ok(Cow::Owned(vec![*v; m])),
            TauModel::Coefficients(taus) if taus.len() == m => Ok(Cow::Borrowed(taus)),
            TauModel::Coefficients(taus) => Err(MomentError::CoefficientCount {
                expected: m,
                got: taus.len(),
            }),
            TauModel::Moments(_) => Err(MomentError::CoefficientsRequired),
        }
    }
}

/// `sum_{s=1}^p c^s sum_{alpha non-crossing, s values} prod_t m_{deg_t(alpha)}`.
pub fn limiting_moment(p: usize, c: f64, tau: &TauModel) -> Result<f64, MomentError> {
    check_ratio(c)?;
    if p == 0 {
        return Err(MomentError::ZeroOrder);
    }
    let ms = tau.moments(p)?;
    let mut acc = 0.0;
    for s in 1..=p {
        let inner: f64 = enumerate_canonical(p, Some(s))?
            .iter()
            .filter(|alpha| !alpha.is_crossing())
            .map(|alpha| alpha.degrees().iter().map(|&d| ms[d - 1]).product::<f64>())
            .sum();
        acc += c.powi(s as i32) * inner;
    }
    Ok(acc)
}

/// Marchenko-Pastur moment `sum_s c^s C(p, s-1) C(p, s) / p`; `1` for `p = 0`.
pub fn mp_moment(p: usize, c: f64) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for s in 1..=p {
        acc += c.powi(s as i32) * to_f64(&c1_count(s, p));
    }
    acc
}

/// `(1/m) sum_j tau_j^q` for `q = 1..=q_max`.
pub fn tau_empirical_moments(taus: &[f64], q_max: usize) -> Result<Vec<f64>, MomentError> {
    if taus.is_empty() {
        return Err(MomentError::EmptyCoefficients);
    }
    TauModel::Coefficients(taus.to_vec()).moments(q_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub holds: bool,
    /// 1-based order of the first moment violating `|m_q| <= A^q q^q`.
    pub first_violation: Option<usize>,
}

/// Checks `|m_q| <= A^q q^q` for every supplied `m_1, m_2, ..`.
pub fn carleman_check(moments: &[f64], a: f64) -> CarlemanReport {
    let first_violation = moments.iter().enumerate().find_map(|(idx, &mq)| {
        let q = (idx + 1) as f64;
        let log_bound = q * a.ln() + q * q.ln();
        let ok = mq == 0.0 || mq.abs().ln() <= log_bound + 1e-12 * log_bound.abs().max(1.0);
        (!ok).then_some(idx + 1)
    });
    CarlemanReport {
        holds: first_violation.is_none(),
        first_violation,
    }
}

/// Largest relative deviation `|x_p - y_p| / max(1, |y_p|)` between two
/// moment sequences over their common orders.
pub fn moment_distance(observed: &[f64], theory: &[f64]) -> f64 {
    observed
        .iter()
        .zip(theory)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// `F(alpha) = sum_r n(n-1)..(n-r+1) sum_{i canonical, r values} E(i, alpha)`
/// where `E(i, alpha) = n^-p prod_{(a,v)} mu(d_up(a,v), d_down(a,v))`.
pub fn inner_factor(n: u64, alpha: &CanonicalSequence, rule: &dyn MixedMomentRule) -> Result<Complex64, MomentError> {
    let is = enumerate_canonical_capped(alpha.len(), None, alpha.len().max(DEFAULT_P_CAP))?;
    let scaled = scaled_inner_factor(n, alpha, &is, rule);
    Ok(scaled / (n as f64).powi(alpha.distinct() as i32 - 1))
}

/// `n^(s-1) F(alpha)`, which stays of order one.
fn scaled_inner_factor(n: u64, alpha: &CanonicalSequence, is: &[CanonicalSequence], rule: &dyn MixedMomentRule) -> Complex64 {
    let p = alpha.len();
    let s = alpha.distinct();
    let top = (p + 1 - s) as i32;
    let nf = n as f64;
    // n^(r) / n^(p+1-s) for r = 1..=p
    let weights: Vec<f64> = (0..=p)
        .map(|r| to_f64(&falling_factorial(n, r as u64)) / nf.powi(top))
        .collect();
    compensated_complex_sum(is.iter().filter_map(|i| {
        let w = weights[i.distinct()];
        if w == 0.0 {
            return None;
        }
        let g = build_graph(i, alpha).expect("equal lengths");
        let mut prod = Complex64::new(1.0, 0.0);
        for (_, _, e) in g.edges() {
            prod *= rule.mixed_moment(e.up, e.down);
            if prod.norm_sqr() == 0.0 {
                return None;
            }
        }
        Some(prod * w)
    }))
}

/// `m^-s sum_{phi injective [s] -> [m]} prod_t tau_{phi(t)}^{d_t}` by Möbius
/// inversion over set partitions of `[s]`, using normalized power sums
/// `e_q = (1/m) sum_j tau_j^q`.
fn injection_sum_normalized(degrees: &[usize], power_means: &[f64], m: usize) -> f64 {
    let s = degrees.len();
    let partitions = enumerate_canonical_capped(s, None, s).expect("s >= 1");
    let mf = m as f64;
    compensated_sum(partitions.iter().map(|pi| {
        let blocks = pi.distinct();
        let mut size = vec![0usize; blocks];
        let mut order = vec![0usize; blocks];
        for (t, &b) in pi.values().iter().enumerate() {
            size[b as usize - 1] += 1;
            order[b as usize - 1] += degrees[t];
        }
        size.iter()
            .zip(&order)
            .map(|(&len, &q)| {
                let sign = if len % 2 == 1 { 1.0 } else { -1.0 };
                let fact: f64 = (1..len).map(|j| j as f64).product();
                sign * fact * power_means[q] * mf.powi(1 - len as i32)
            })
            .product::<f64>()
    }))
}

/// Exact `n^-k E[Tr M^p]` for `M = sum_j tau_j Y_j Y_j^*` with `m` tensor
/// vectors of `k` independent legs of dimension `n`, whose entries follow
/// `rule`. Cost grows like `Bell(p)^2`; `p` is bounded by the enumeration cap.
pub fn exact_mean_trace_moment(
    n: u64,
    k: u32,
    m: usize,
    p: usize,
    tau: &TauModel,
    rule: &dyn MixedMomentRule,
) -> Result<f64, MomentError> {
    if n == 0 || k == 0 || m == 0 {
        return Err(MomentError::InvalidDimensions { n, k, m });
    }
    if p == 0 {
        return Err(MomentError::ZeroOrder);
    }
    let taus = tau.coefficients(m)?;
    let sequences = enumerate_canonical(p, None)?;
    let mut power_means = vec![1.0; p + 1];
    for (q, slot) in power_means.iter_mut().enumerate().skip(1) {
        *slot = compensated_sum(taus.iter().map(|t| t.powi(q as i32))) / m as f64;
    }
    let ratio = m as f64 / (n as f64).powi(k as i32);

    let terms: Vec<Complex64> = sequences
        .par_iter()
        .map(|alpha| {
            let s = alpha.distinct();
            let injections = injection_sum_normalized(&alpha.degrees(), &power_means, m);
            if injections == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let inner = scaled_inner_factor(n, alpha, &sequences, rule);
            inner.powu(k) * (ratio.powi(s as i32) * injections)
        })
        .collect();
    Ok(compensated_complex_sum(terms).re)
}

fn check_ratio(c: f64) -> Result<(), MomentError> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(MomentError::InvalidRatio(c))
    }
}
