//! The Marchenko-Pastur law with ratio `c`: density, distribution function,
//! quadrature moments and Kolmogorov-Smirnov distance to a simulated spectrum.
//!
//! The continuous part has density
//! `sqrt((b - x)(x - a)) / (2 pi x)` on `[a, b]`, `a = (1 - sqrt c)^2`,
//! `b = (1 + sqrt c)^2`, and carries mass `min(1, c)`; for `c < 1` the
//! remaining `1 - c` sits in an atom at zero.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::to_f64;
use crate::simulation::SpectrumSample;

/// Default absolute tolerance for distribution-function quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-11;

const MAX_BISECTIONS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpError {
    #[error("ratio c must be positive and finite, got {0}")]
    InvalidRatio(f64),
    #[error("adaptive quadrature on [{lo}, {hi}] did not reach tolerance {tol:e}")]
    Quadrature { lo: f64, hi: f64, tol: f64 },
    #[error("sample has an empty spectrum")]
    EmptySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    pub c: f64,
    /// Left support edge `(1 - sqrt c)^2`.
    pub lower: f64,
    /// Right support edge `(1 + sqrt c)^2`.
    pub upper: f64,
    /// Mass of the atom at zero, `max(0, 1 - c)`.
    pub atom: f64,
}

impl MpLaw {
    pub fn new(c: f64) -> Result<Self, MpError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(MpError::InvalidRatio(c));
        }
        let r = c.sqrt();
        Ok(Self {
            c,
            lower: (1.0 - r) * (1.0 - r),
            upper: (1.0 + r) * (1.0 + r),
            atom: (1.0 - c).max(0.0),
        })
    }

    /// Density of the continuous part. The atom at zero is not included.
    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 || x < self.lower || x > self.upper {
            return 0.0;
        }
        ((self.upper - x) * (x - self.lower)).max(0.0).sqrt() / (2.0 * PI * x)
    }

    pub fn continuous_mass(&self) -> f64 {
        self.c.min(1.0)
    }

    fn width(&self) -> f64 {
        self.upper - self.lower
    }

    fn point(&self, theta: f64) -> f64 {
        let s = theta.sin();
        self.lower + self.width() * s * s
    }

    /// Density times Jacobian after `x = a + (b - a) sin^2 theta`, smooth on
    /// `[0, pi/2]`.
    fn integrand(&self, theta: f64) -> f64 {
        let (s, co) = theta.sin_cos();
        let w = self.width();
        let x = self.lower + w * s * s;
        if x <= 0.0 {
            // a = 0 and theta = 0: the limit is b / pi
            return w / PI;
        }
        w * w * s * s * co * co / (PI * x)
    }

    fn theta_of(&self, x: f64) -> f64 {
        ((x - self.lower) / self.width()).clamp(0.0, 1.0).sqrt().asin()
    }

    /// `P(X <= x)`, the atom at zero included for `x >= 0`.
    pub fn cdf(&self, x: f64, tol: f64) -> Result<f64, MpError> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let continuous = if x <= self.lower {
            0.0
        } else if x >= self.upper {
            self.continuous_mass()
        } else {
            let theta = self.theta_of(x);
            integrate(|t| self.integrand(t), 0.0, theta, tol)?
        };
        Ok(self.atom + continuous)
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64, tol: f64) -> Result<f64, MpError> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        self.cdf(x, tol)
    }

    /// `int x^p dMP` by quadrature over the continuous part, with `tol`
    /// relative to `b^p`.
    pub fn moment(&self, p: u32, tol: f64) -> Result<f64, MpError> {
        if p == 0 {
            return Ok(1.0);
        }
        let scale = self.upper.powi(p as i32);
        integrate(|t| self.point(t).powi(p as i32) * self.integrand(t), 0.0, FRAC_PI_2, tol * scale)
    }

    /// Smallest `x` with `cdf(x) >= u`, by bisection.
    pub fn quantile(&self, u: f64, tol: f64) -> Result<f64, MpError> {
        if u <= self.atom {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (self.lower, self.upper);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid, tol)? < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * self.upper {
                break;
            }
        }
        Ok(hi)
    }
}

pub fn density(x: f64, c: f64) -> Result<f64, MpError> {
    Ok(MpLaw::new(c)?.density(x))
}

pub fn cdf(x: f64, c: f64, quad_tol: f64) -> Result<f64, MpError> {
    MpLaw::new(c)?.cdf(x, quad_tol)
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive Gauss-Kronrod quadrature to absolute tolerance `tol`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, MpError> {
    if hi <= lo {
        return Ok(0.0);
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64, depth: u32) -> Result<f64, MpError> {
        let (value, err) = gauss_kronrod(f, lo, hi);
        if err <= tol || (hi - lo) < 1e-14 * hi.abs().max(1.0) {
            return Ok(value);
        }
        if depth >= MAX_BISECTIONS {
            return Err(MpError::Quadrature { lo, hi, tol });
        }
        let mid = 0.5 * (lo + hi);
        Ok(recurse(f, lo, mid, 0.5 * tol, depth + 1)? + recurse(f, mid, hi, 0.5 * tol, depth + 1)?)
    }
    recurse(&f, lo, hi, tol, 0)
}

/// Supremum distance between the spectral distribution of `sample` (zero
/// atom weighted analytically) and the Marchenko-Pastur law with ratio `c`.
/// Evaluated at every jump of the empirical distribution, from both sides.
pub fn ks_distance(sample: &SpectrumSample, c: f64) -> Result<f64, MpError> {
    ks_distance_with_tol(sample, c, DEFAULT_QUAD_TOL)
}

pub fn ks_distance_with_tol(sample: &SpectrumSample, c: f64, tol: f64) -> Result<f64, MpError> {
    let law = MpLaw::new(c)?;
    let total = to_f64(&sample.dimension());
    if total == 0.0 {
        return Err(MpError::EmptySample);
    }
    let unit = 1.0 / total;
    let zero_mass = to_f64(&sample.zero_multiplicity) / total;

    let mut jumps: Vec<(f64, f64)> = sample.nonzero_eigenvalues.iter().map(|&x| (x, unit)).collect();
    if zero_mass > 0.0 {
        jumps.push((0.0, zero_mass));
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut empirical = 0.0;
    let mut sup = 0.0f64;
    for (x, mass) in jumps {
        let left = law.cdf_left(x, tol)?;
        sup = sup.max((empirical - left).abs());
        empirical += mass;
        let right = law.cdf(x, tol)?;
        sup = sup.max((empirical - right).abs());
    }
    Ok(sup)
}

/// One row of a density/CDF table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpTableRow {
    pub x: f64,
    pub pdf: f64,
    pub cdf: f64,
}

/// Density and distribution function on `points` equally spaced abscissae
/// spanning `[lo, hi]`.
pub fn table(c: f64, lo: f64, hi: f64, points: usize, tol: f64) -> Result<Vec<MpTableRow>, MpError> {
    let law = MpLaw::new(c)?;
    let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
    (0..points)
        .map(|j| {
            let x = if j + 1 == points && points > 1 { hi } else { lo + step * j as f64 };
            Ok(MpTableRow {
                x,
                pdf: law.density(x),
                cdf: law.cdf(x, tol)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_examples() {
        assert!((density(2.0, 1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(density(4.0, 1.0).unwrap(), 0.0);
        assert_eq!(density(0.1, 0.25).unwrap(), 0.0);
        assert_eq!(density(0.0, 0.5).unwrap(), 0.0);
        assert!(density(1.0, 0.0).is_err());
    }

    #[test]
    fn cdf_limits() {
        let law = MpLaw::new(0.5).unwrap();
        assert!((law.cdf(1e6, 1e-10).unwrap() - 1.0).abs() < 1e-8);
        assert!((law.cdf(0.0, 1e-10).unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(law.cdf_left(0.0, 1e-10).unwrap(), 0.0);
        assert_eq!(law.cdf(-1.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn gauss_kronrod_integrates_polynomials_exactly() {
        let v = integrate(|x| x.powi(10) - 3.0 * x, 0.0, 2.0, 1e-13).unwrap();
        let exact = 2f64.powi(11) / 11.0 - 6.0;
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let law = MpLaw::new(1.0).unwrap();
        for u in [0.1, 0.5, 0.9] {
            let x = law.quantile(u, 1e-12).unwrap();
            assert!((law.cdf(x, 1e-12).unwrap() - u).abs() < 1e-10);
        }
        assert_eq!(MpLaw::new(0.25).unwrap().quantile(0.5, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn table_rows() {
        let rows = table(1.0, 0.0, 4.0, 5, 1e-10).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[4].x, 4.0);
        assert_eq!(rows[4].pdf, 0.0);
        assert!((rows[4].cdf - 1.0).abs() < 1e-9);
        assert!(table(0.0, 0.0, 1.0, 3, 1e-10).is_err());
    }
}
