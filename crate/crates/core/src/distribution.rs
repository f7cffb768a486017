//! Unit-modulus entry laws for the base vectors and their mixed moments.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `E[xi^a conj(xi)^b]` for the entry law of the base vectors.
///
/// Implementations must satisfy `mu(0,0) = 1`, `mu(1,1) = 1`,
/// `mu(1,0) = mu(0,1) = 0` and `|mu(a,b)| <= 1`.
pub trait MixedMomentRule: Sync {
    fn mixed_moment(&self, a: u32, b: u32) -> Complex64;
}

impl<F> MixedMomentRule for F
where
    F: Fn(u32, u32) -> Complex64 + Sync,
{
    fn mixed_moment(&self, a: u32, b: u32) -> Complex64 {
        self(a, b)
    }
}

/// Centered, unit-variance laws on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EntryDistribution {
    /// `exp(2 pi i U)` with `U` uniform on `[0, 1)`.
    UniformPhase,
    /// `+1` or `-1` with equal probability.
    Rademacher,
    /// A uniformly chosen `q`-th root of unity, `q >= 2`.
    RootsOfUnity(u32),
}

impl EntryDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            EntryDistribution::UniformPhase => Complex64::from_polar(1.0, TAU * rng.random::<f64>()),
            EntryDistribution::Rademacher => {
                if rng.random::<bool>() {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
            EntryDistribution::RootsOfUnity(q) => root_of_unity(q, rng.random_range(0..q)),
        }
    }

    /// Support points of a finite-support law, each with mass `1 / len`.
    pub fn support(&self) -> Option<Vec<Complex64>> {
        match *self {
            EntryDistribution::UniformPhase => None,
            EntryDistribution::Rademacher => Some(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]),
            EntryDistribution::RootsOfUnity(q) => Some((0..q).map(|j| root_of_unity(q, j)).collect()),
        }
    }
}

fn root_of_unity(q: u32, j: u32) -> Complex64 {
    match (4 * j).checked_rem(q) {
        // exact values on the axes
        Some(0) => match 4 * j / q {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        },
        _ => Complex64::from_polar(1.0, TAU * j as f64 / q as f64),
    }
}

impl MixedMomentRule for EntryDistribution {
    fn mixed_moment(&self, a: u32, b: u32) -> Complex64 {
        let hit = match *self {
            EntryDistribution::UniformPhase => a == b,
            EntryDistribution::Rademacher => (a + b) % 2 == 0,
            EntryDistribution::RootsOfUnity(q) => a.abs_diff(b) % q == 0,
        };
        Complex64::new(if hit { 1.0 } else { 0.0 }, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown distribution `{0}` (expected phase, rademacher or roots:q with q >= 2)")]
pub struct ParseDistributionError(String);

impl FromStr for EntryDistribution {
    type Err = ParseDistributionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "phase" => Ok(EntryDistribution::UniformPhase),
            "rademacher" => Ok(EntryDistribution::Rademacher),
            _ => s
                .strip_prefix("roots:")
                .and_then(|q| q.parse::<u32>().ok())
                .filter(|&q| q >= 2)
                .map(EntryDistribution::RootsOfUnity)
                .ok_or_else(|| ParseDistributionError(s.to_string())),
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryDistribution::UniformPhase => f.write_str("phase"),
            EntryDistribution::Rademacher => f.write_str("rademacher"),
            EntryDistribution::RootsOfUnity(q) => write!(f, "roots:{q}"),
        }
    }
}

impl From<EntryDistribution> for String {
    fn from(d: EntryDistribution) -> Self {
        d.to_string()
    }
}

impl TryFrom<String> for EntryDistribution {
    type Error = ParseDistributionError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
