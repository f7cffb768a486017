//! Exhaustive self-checks of the combinatorial and moment identities, each
//! reported claim by claim with the counts compared and the first
//! counterexample.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{bell, catalan, c1_count, falling_factorial, stirling2, stirling2_explicit};
use crate::distribution::EntryDistribution;
use crate::graphs::{build_graph, delta1_partner, paired_partners, GraphClass};
use crate::moments::{exact_mean_trace_moment, limiting_moment, mp_moment, TauModel};
use crate::mplaw::MpLaw;
use crate::sequences::{canonicalize, enumerate_canonical, CanonicalSequence, DEFAULT_P_CAP};
use crate::simulation::{gram_matrix, trace_moments, BaseVectors};

/// Largest `p` for the graph suite, which scans `Bell(p)^2` pairs.
pub const GRAPH_P_CAP: usize = 8;
/// Largest `p` for the moment suite's exhaustive finite-size check.
const EXHAUSTIVE_P: usize = 3;
const RATIOS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
const QUAD_RATIOS: [f64; 6] = [0.1, 0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Sequences,
    Graphs,
    Stirling,
    Moments,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Sequences, Suite::Graphs, Suite::Stirling, Suite::Moments];

    pub fn p_cap(&self) -> usize {
        match self {
            Suite::Graphs => GRAPH_P_CAP,
            _ => DEFAULT_P_CAP,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Sequences => "sequences",
            Suite::Graphs => "graphs",
            Suite::Stirling => "stirling",
            Suite::Moments => "moments",
        })
    }
}

impl FromStr for Suite {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| VerifyError::UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("unknown suite `{0}` (expected sequences, graphs, stirling or moments)")]
    UnknownSuite(String),
    #[error("p_max = {p_max} exceeds the cap of {cap} for the {suite} suite")]
    OverCap { suite: Suite, p_max: usize, cap: usize },
    #[error("p_max must be at least 1")]
    ZeroP,
}

/// Outcome of one claim at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub claim: String,
    pub passed: bool,
    /// What was compared, e.g. `enumerated=42, formula=42`.
    pub detail: String,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub p_max: usize,
    pub passed: bool,
    pub claims: Vec<ClaimResult>,
}

impl VerifyReport {
    fn new(suite: Suite, p_max: usize, claims: Vec<ClaimResult>) -> Self {
        Self {
            suite,
            p_max,
            passed: claims.iter().all(|c| c.passed),
            claims,
        }
    }

    pub fn first_failure(&self) -> Option<&ClaimResult> {
        self.claims.iter().find(|c| !c.passed)
    }
}

fn claim(name: impl Into<String>, passed: bool, detail: impl Into<String>, counterexample: Option<String>) -> ClaimResult {
    ClaimResult {
        claim: name.into(),
        passed,
        detail: detail.into(),
        counterexample,
    }
}

fn count_claim(name: String, enumerated: &BigUint, formula: &BigUint) -> ClaimResult {
    claim(name, enumerated == formula, format!("enumerated={enumerated}, formula={formula}"), None)
}

pub fn run(suite: Suite, p_max: usize) -> Result<VerifyReport, VerifyError> {
    if p_max == 0 {
        return Err(VerifyError::ZeroP);
    }
    if p_max > suite.p_cap() {
        return Err(VerifyError::OverCap {
            suite,
            p_max,
            cap: suite.p_cap(),
        });
    }
    let claims = match suite {
        Suite::Sequences => sequences_suite(p_max),
        Suite::Graphs => graphs_suite(p_max),
        Suite::Stirling => stirling_suite(p_max),
        Suite::Moments => moments_suite(p_max),
    };
    Ok(VerifyReport::new(suite, p_max, claims))
}

fn all_sequences(p: usize) -> Vec<CanonicalSequence> {
    enumerate_canonical(p, None).expect("p within cap")
}

fn sequences_suite(p_max: usize) -> Vec<ClaimResult> {
    let mut out = Vec::new();
    for p in 1..=p_max {
        let all = all_sequences(p);
        out.push(count_claim(format!("C count p={p}"), &BigUint::from(all.len()), &bell(p)));

        let broken = all
            .iter()
            .find(|a| canonicalize(a.values()).ok().as_ref() != Some(*a))
            .map(|a| a.to_string());
        out.push(claim(format!("canonical fixed points p={p}"), broken.is_none(), format!("checked={}", all.len()), broken));

        let mut c1_total = BigUint::from(0u32);
        for s in 1..=p {
            let with_s: Vec<_> = all.iter().filter(|a| a.distinct() == s).collect();
            out.push(count_claim(format!("C_s count p={p} s={s}"), &BigUint::from(with_s.len()), &stirling2(p, s)));
            let non_crossing = BigUint::from(with_s.iter().filter(|a| !a.is_crossing()).count());
            out.push(count_claim(format!("C^(1) count p={p} s={s}"), &non_crossing, &c1_count(s, p)));
            c1_total += non_crossing;
        }
        out.push(count_claim(format!("C^(1) total p={p}"), &c1_total, &catalan(p)));
    }
    out
}

fn graphs_suite(p_max: usize) -> Vec<ClaimResult> {
    let mut out = Vec::new();
    for p in 1..=p_max {
        let all = all_sequences(p);
        let (mut delta1_bad, mut dichotomy_bad, mut paired_bad) = (None, None, None);
        let mut non_crossing = 0usize;
        let mut pairs_checked = 0usize;
        for alpha in &all {
            let s = alpha.distinct();
            let partner = delta1_partner(alpha);
            let hits: Vec<&CanonicalSequence> = all
                .iter()
                .filter(|i| i.distinct() == p + 1 - s)
                .filter(|i| build_graph(i, alpha).map(|g| g.is_delta1()).unwrap_or(false))
                .collect();
            let expected: Vec<&CanonicalSequence> = partner.iter().collect();
            if hits != expected && delta1_bad.is_none() {
                delta1_bad = Some(format!("alpha={alpha} found={} partner={partner:?}", hits.len()));
            }
            if alpha.is_crossing() {
                continue;
            }
            non_crossing += 1;
            let mut paired_by_r: Vec<BTreeSet<Vec<u32>>> = vec![BTreeSet::new(); p + 1];
            for i in &all {
                pairs_checked += 1;
                let class = build_graph(i, alpha).expect("equal lengths").classify();
                if class == GraphClass::Other && dichotomy_bad.is_none() {
                    dichotomy_bad = Some(format!("alpha={alpha} i={i}"));
                }
                if class == GraphClass::Paired {
                    paired_by_r[i.distinct()].insert(i.values().to_vec());
                }
            }
            let size = p + 1 - s;
            for (r, found) in paired_by_r.iter().enumerate().skip(1) {
                let formula = if r <= size { stirling2(size, r) } else { BigUint::from(0u32) };
                let images: BTreeSet<Vec<u32>> = paired_partners(alpha, r)
                    .expect("non-crossing")
                    .into_iter()
                    .map(|i| i.values().to_vec())
                    .collect();
                if (BigUint::from(found.len()) != formula || &images != found) && paired_bad.is_none() {
                    paired_bad = Some(format!(
                        "alpha={alpha} r={r} enumerated={} formula={formula} images={}",
                        found.len(),
                        images.len()
                    ));
                }
            }
        }
        out.push(claim(
            format!("delta1 uniqueness p={p}"),
            delta1_bad.is_none(),
            format!("sequences={}, non_crossing={non_crossing}", all.len()),
            delta1_bad,
        ));
        out.push(claim(
            format!("paired/single dichotomy p={p}"),
            dichotomy_bad.is_none(),
            format!("pairs={pairs_checked}"),
            dichotomy_bad,
        ));
        out.push(claim(
            format!("paired count and images p={p}"),
            paired_bad.is_none(),
            format!("non_crossing={non_crossing}"),
            paired_bad,
        ));
    }
    out
}

fn stirling_suite(p_max: usize) -> Vec<ClaimResult> {
    let mut out = Vec::new();
    let n_max = p_max.max(20);
    let mismatch = (0..=n_max)
        .flat_map(|n| (0..=n).map(move |k| (n, k)))
        .find(|&(n, k)| stirling2(n, k) != stirling2_explicit(n, k))
        .map(|(n, k)| format!("n={n} k={k}"));
    out.push(claim(
        "recurrence equals explicit sum",
        mismatch.is_none(),
        format!("n<={n_max}"),
        mismatch,
    ));

    let mut bad = None;
    for n in 0..=p_max {
        for x in 0..=10u64 {
            let lhs: BigUint = (0..=n).map(|r| falling_factorial(x, r as u64) * stirling2(n, r)).sum();
            if lhs != num_traits::pow(BigUint::from(x), n) && bad.is_none() {
                bad = Some(format!("n={n} x={x}"));
            }
        }
    }
    out.push(claim("falling factorial expansion", bad.is_none(), format!("n<={p_max}, x<=10"), bad));

    let bell_bad = (0..=p_max)
        .find(|&n| (0..=n).map(|k| stirling2(n, k)).sum::<BigUint>() != bell(n))
        .map(|n| format!("n={n}"));
    out.push(claim("Bell is the row sum", bell_bad.is_none(), format!("n<={p_max}"), bell_bad));

    // sum_r n^(r) S(p+1-s, r) = n^(p+1-s), which turns the paired-partner sum
    // into n^(1-s) after normalization.
    let mut collapse_bad = None;
    for p in 1..=p_max {
        for s in 1..=p {
            let size = p + 1 - s;
            for n in 1..=8u64 {
                let lhs: BigUint = (1..=size).map(|r| falling_factorial(n, r as u64) * stirling2(size, r)).sum();
                if lhs != num_traits::pow(BigUint::from(n), size) && collapse_bad.is_none() {
                    collapse_bad = Some(format!("p={p} s={s} n={n}"));
                }
            }
        }
    }
    out.push(claim(
        "paired partner sum collapses",
        collapse_bad.is_none(),
        format!("p<={p_max}, n<=8"),
        collapse_bad,
    ));
    out
}

/// Average of `(1/n^k) Tr M^p` over every `+-1` configuration of the base
/// vectors, each equally likely.
pub fn rademacher_exhaustive_average(n: usize, k: usize, m: usize, p_max: usize) -> Vec<f64> {
    let entries = n * k * m;
    assert!(entries < 24, "exhaustive enumeration is limited to 2^23 configurations");
    let nk = (n as f64).powi(k as i32);
    let scale = 1.0 / (n as f64).sqrt();
    let mut sums = vec![0.0; p_max];
    let total = 1u64 << entries;
    for mask in 0..total {
        let data = (0..entries)
            .map(|b| faer::c64::new(if mask >> b & 1 == 1 { -scale } else { scale }, 0.0))
            .collect();
        let base = BaseVectors::from_entries(n, k, m, data);
        let g = gram_matrix(&base);
        let t = trace_moments(g.as_ref(), &vec![1.0; m], p_max, nk).expect("real traces");
        for (acc, v) in sums.iter_mut().zip(t) {
            *acc += v;
        }
    }
    sums.into_iter().map(|s| s / total as f64).collect()
}

fn moments_suite(p_max: usize) -> Vec<ClaimResult> {
    let mut out = Vec::new();
    let unit = TauModel::Constant(1.0);
    for p in 1..=p_max {
        let bad = RATIOS
            .into_iter()
            .find(|&c| limiting_moment(p, c, &unit).ok() != Some(mp_moment(p, c)))
            .map(|c| format!("c={c}"));
        out.push(claim(
            format!("limiting moment equals MP moment p={p}"),
            bad.is_none(),
            "exact equality",
            bad,
        ));
        let cat = crate::combinatorics::to_f64(&catalan(p));
        out.push(claim(
            format!("MP moment at c=1 is Catalan p={p}"),
            mp_moment(p, 1.0) == cat,
            format!("moment={}, catalan={cat}", mp_moment(p, 1.0)),
            None,
        ));
    }

    let mut worst = 0.0f64;
    let mut bad = None;
    for c in QUAD_RATIOS {
        let law = MpLaw::new(c).expect("positive ratio");
        for p in 1..=p_max.min(6) {
            let quad = law.moment(p as u32, 1e-12).unwrap_or(f64::NAN);
            let exact = mp_moment(p, c);
            let err = (quad - exact).abs() / exact.max(1.0);
            worst = worst.max(err);
            if !(err <= 1e-6) && bad.is_none() {
                bad = Some(format!("c={c} p={p} quadrature={quad} formula={exact}"));
            }
        }
    }
    out.push(claim(
        "quadrature moments match MP moments",
        bad.is_none(),
        format!("max_rel_err={worst:e}"),
        bad,
    ));

    let p_ex = p_max.min(EXHAUSTIVE_P);
    for k in 1..=2usize {
        let brute = rademacher_exhaustive_average(2, k, 2, p_ex);
        for (idx, &b) in brute.iter().enumerate() {
            let p = idx + 1;
            let exact = exact_mean_trace_moment(2, k as u32, 2, p, &unit, &EntryDistribution::Rademacher);
            let (passed, detail) = match exact {
                Ok(e) => ((e - b).abs() <= 1e-12 * b.abs().max(1e-300), format!("exact={e}, exhaustive={b}")),
                Err(e) => (false, e.to_string()),
            };
            out.push(claim(format!("exact oracle vs exhaustive n=2 k={k} m=2 p={p}"), passed, detail, None));
        }
    }
    out
}
