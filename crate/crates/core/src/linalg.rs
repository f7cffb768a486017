//! Dense complex linear algebra on top of `faer`: certified Hermitian
//! eigenvalues and traces of matrix powers.

use faer::{c64, Mat, MatRef, Side};
use thiserror::Error;

use crate::numeric::CompensatedSum;

/// Default relative residual tolerance for eigenvalue certification.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |H - H^*| = {deviation:e} exceeds {bound:e}")]
    NotHermitian { deviation: f64, bound: f64 },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("eigenpair residual {residual:e} exceeds {bound:e}")]
    Residual { residual: f64, bound: f64 },
    #[error("trace of power {p} has imaginary part {imag:e} (real part {real:e})")]
    ImaginaryTrace { p: usize, real: f64, imag: f64 },
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, with the largest
/// residual `max_j |H u_j - lambda_j u_j|` observed.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
    pub max_residual: f64,
}

fn check_square(h: MatRef<'_, c64>) -> Result<usize, LinalgError> {
    if h.nrows() != h.ncols() {
        return Err(LinalgError::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    Ok(h.nrows())
}

fn max_abs(h: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            best = best.max(h[(i, j)].norm());
        }
    }
    best
}

fn check_hermitian(h: MatRef<'_, c64>, tol: f64) -> Result<(), LinalgError> {
    let n = check_square(h)?;
    let bound = tol * max_abs(h).max(f64::MIN_POSITIVE);
    let mut deviation = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            deviation = deviation.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if deviation > bound {
        return Err(LinalgError::NotHermitian { deviation, bound });
    }
    Ok(())
}

/// Full eigendecomposition, certified: every eigenpair satisfies
/// `|H u - lambda u| <= tol * |H|_2`, where `|H|_2 = max |lambda|`.
pub fn hermitian_eigen(h: MatRef<'_, c64>, tol: f64) -> Result<HermitianEigen, LinalgError> {
    let n = check_square(h)?;
    check_hermitian(h, tol)?;
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: Mat::zeros(0, 0),
            max_residual: 0.0,
        });
    }
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| LinalgError::NoConvergence)?;
    let u = evd.U();
    let s = evd.S();
    let values: Vec<f64> = (0..n).map(|j| s[j].re).collect();
    let hu = h * u;
    let mut max_residual = 0.0f64;
    for j in 0..n {
        let mut r = 0.0;
        for i in 0..n {
            r += (hu[(i, j)] - u[(i, j)] * values[j]).norm_sqr();
        }
        max_residual = max_residual.max(r.sqrt());
    }
    let norm = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let bound = tol * norm.max(f64::MIN_POSITIVE);
    if max_residual > bound {
        return Err(LinalgError::Residual {
            residual: max_residual,
            bound,
        });
    }
    Ok(HermitianEigen {
        values,
        vectors: u.to_owned(),
        max_residual,
    })
}

/// Ascending eigenvalues of a Hermitian matrix, certified as in
/// [`hermitian_eigen`].
pub fn hermitian_eigenvalues(h: MatRef<'_, c64>, tol: f64) -> Result<Vec<f64>, LinalgError> {
    hermitian_eigen(h, tol).map(|e| e.values)
}

/// `Tr(X Y) = sum_ij X_ij Y_ji`, summed in a fixed order.
fn trace_of_product(x: MatRef<'_, c64>, y: MatRef<'_, c64>) -> c64 {
    let n = x.nrows();
    let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
    for i in 0..n {
        for j in 0..n {
            let z = x[(i, j)] * y[(j, i)];
            re.add(z.re);
            im.add(z.im);
        }
    }
    c64::new(re.value(), im.value())
}

/// `Tr(A^p)` for `p = 1..=p_max`, using the powers `A, .., A^ceil(p_max/2)`
/// and `Tr(A^p) = Tr(A^ceil(p/2) A^floor(p/2))`.
pub fn trace_powers(a: MatRef<'_, c64>, p_max: usize) -> Result<Vec<c64>, LinalgError> {
    let n = check_square(a)?;
    if p_max == 0 {
        return Ok(Vec::new());
    }
    let mut powers: Vec<Mat<c64>> = vec![a.to_owned()];
    while powers.len() < p_max.div_ceil(2) {
        let next = powers.last().expect("nonempty") * a;
        powers.push(next);
    }
    let mut traces = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        if p == 1 {
            let mut acc = CompensatedSum::new();
            let mut acc_im = CompensatedSum::new();
            for i in 0..n {
                acc.add(a[(i, i)].re);
                acc_im.add(a[(i, i)].im);
            }
            traces.push(c64::new(acc.value(), acc_im.value()));
            continue;
        }
        let hi = p.div_ceil(2);
        let lo = p / 2;
        traces.push(trace_of_product(powers[hi - 1].as_ref(), powers[lo - 1].as_ref()));
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Mat<c64> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { c64::new(v[i], 0.0) } else { c64::new(0.0, 0.0) })
    }

    #[test]
    fn identity_and_diagonal() {
        let id = diag(&[1.0; 4]);
        assert_eq!(hermitian_eigenvalues(id.as_ref(), DEFAULT_EIGEN_TOL).unwrap(), vec![1.0; 4]);
        let d = diag(&[3.0, 1.0, 2.0]);
        let ev = hermitian_eigenvalues(d.as_ref(), DEFAULT_EIGEN_TOL).unwrap();
        for (x, y) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = diag(&[1.0, 2.0]);
        m[(0, 1)] = c64::new(0.5, 0.0);
        assert!(matches!(
            hermitian_eigenvalues(m.as_ref(), DEFAULT_EIGEN_TOL),
            Err(LinalgError::NotHermitian { .. })
        ));
        let rect = Mat::<c64>::zeros(2, 3);
        assert_eq!(
            hermitian_eigenvalues(rect.as_ref(), DEFAULT_EIGEN_TOL),
            Err(LinalgError::NotSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn trace_powers_of_diagonal() {
        let d = diag(&[2.0, -1.0, 0.5]);
        let t = trace_powers(d.as_ref(), 5).unwrap();
        for (p, tr) in t.iter().enumerate() {
            let expected: f64 = [2.0f64, -1.0, 0.5].iter().map(|x| x.powi(p as i32 + 1)).sum();
            assert!((tr.re - expected).abs() < 1e-13 && tr.im == 0.0);
        }
    }
}
