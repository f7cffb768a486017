//! Exact integer combinatorics in arbitrary precision.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision nonnegative count.
pub type BigCount = BigUint;

/// Rows of the Stirling table that are built once and shared.
const SHARED_STIRLING_ROWS: usize = 64;

/// Triangular table of Stirling numbers of the second kind, filled by
/// `S(n+1, k) = S(n, k-1) + k S(n, k)`.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    rows: Vec<Vec<BigCount>>,
}

impl StirlingTable {
    pub fn new(n_max: usize) -> Self {
        let mut rows: Vec<Vec<BigCount>> = Vec::with_capacity(n_max + 1);
        rows.push(vec![BigCount::one()]);
        for n in 1..=n_max {
            let prev = &rows[n - 1];
            let mut row = vec![BigCount::zero(); n + 1];
            for k in 1..=n {
                let mut v = if k - 1 < prev.len() { prev[k - 1].clone() } else { BigCount::zero() };
                if k < prev.len() {
                    v += &prev[k] * BigCount::from(k);
                }
                row[k] = v;
            }
            rows.push(row);
        }
        Self { rows }
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// `S(n, k)`, or `None` when `n` is beyond the table.
    pub fn get(&self, n: usize, k: usize) -> Option<BigCount> {
        let row = self.rows.get(n)?;
        Some(row.get(k).cloned().unwrap_or_default())
    }
}

fn shared_table() -> &'static StirlingTable {
    static TABLE: OnceLock<StirlingTable> = OnceLock::new();
    TABLE.get_or_init(|| StirlingTable::new(SHARED_STIRLING_ROWS))
}

/// Stirling number of the second kind `S(n, k)`: partitions of an `n`-set
/// into `k` nonempty blocks. `S(0, 0) = 1`; zero when `k > n` or `k = 0 < n`.
pub fn stirling2(n: usize, k: usize) -> BigCount {
    if let Some(v) = shared_table().get(n, k) {
        return v;
    }
    if k > n {
        return BigCount::zero();
    }
    // Single row of the recurrence, reused in place.
    let mut row = vec![BigCount::zero(); k + 1];
    row[0] = BigCount::one();
    for m in 1..=n {
        for j in (1..=k.min(m)).rev() {
            let carry = &row[j] * BigCount::from(j);
            row[j] = &row[j - 1] + carry;
        }
        row[0] = BigCount::zero();
    }
    row[k].clone()
}

/// `S(n, k)` from the alternating sum `sum_i (-1)^(k-i) i^n / (i! (k-i)!)`,
/// evaluated as `k!^{-1} sum_i (-1)^(k-i) C(k, i) i^n`.
pub fn stirling2_explicit(n: usize, k: usize) -> BigCount {
    if k == 0 {
        return if n == 0 { BigCount::one() } else { BigCount::zero() };
    }
    let mut acc = BigInt::zero();
    for i in 1..=k {
        let term = BigInt::from(binomial(k as u64, i as u64)) * num_traits::pow(BigInt::from(i), n);
        if (k - i) % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    let fact = BigInt::from(factorial(k as u64));
    debug_assert!((&acc % &fact).is_zero());
    let q = acc / fact;
    debug_assert!(!q.is_negative());
    q.to_biguint().unwrap_or_default()
}

/// Bell number: total number of partitions of an `n`-set.
pub fn bell(n: usize) -> BigCount {
    (0..=n).map(|k| stirling2(n, k)).sum()
}

pub fn factorial(n: u64) -> BigCount {
    (1..=n).fold(BigCount::one(), |acc, j| acc * j)
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigCount {
    if k > n {
        return BigCount::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigCount::one();
    for j in 0..k {
        acc *= n - j;
        acc /= j + 1;
    }
    acc
}

/// `n (n-1) ... (n-r+1)`; 1 when `r = 0`, 0 when `r > n`.
pub fn falling_factorial(n: u64, r: u64) -> BigCount {
    if r > n {
        return BigCount::zero();
    }
    (0..r).fold(BigCount::one(), |acc, j| acc * (n - j))
}

/// Number of non-crossing canonical `s`-sequences of length `p`:
/// `C(p, s-1) C(p, s) / p`. Zero outside `1 <= s <= p`.
pub fn c1_count(s: usize, p: usize) -> BigCount {
    if s == 0 || s > p {
        return BigCount::zero();
    }
    let num = binomial(p as u64, s as u64 - 1) * binomial(p as u64, s as u64);
    debug_assert!((&num % BigCount::from(p)).is_zero());
    num / BigCount::from(p)
}

/// Catalan number `C(2p, p) / (p + 1)`.
pub fn catalan(p: usize) -> BigCount {
    binomial(2 * p as u64, p as u64) / BigCount::from(p + 1)
}

/// Lossy conversion for the final floating-point step of a formula.
pub fn to_f64(x: &BigCount) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}
