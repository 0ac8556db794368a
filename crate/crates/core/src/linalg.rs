//! Dense helpers for the small (at most 4x4) matrices of the hierarchy.
//! Matrices are row-major slices of length `k * k`.

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[f64], k: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), k * k);
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    Ok(l)
}

/// `L z` for lower-triangular `L`.
pub fn lower_mul(l: &[f64], k: usize, z: &[f64], out: &mut [f64]) {
    for i in 0..k {
        let mut s = 0.0;
        for j in 0..=i {
            s += l[i * k + j] * z[j];
        }
        out[i] = s;
    }
}

/// `L L^T`.
pub fn outer_lower(l: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for m in 0..=i.min(j) {
                s += l[i * k + m] * l[j * k + m];
            }
            out[i * k + j] = s;
        }
    }
    out
}

/// Checks that `a` is a symmetric matrix with unit diagonal.
pub fn check_correlation(a: &[f64], k: usize) -> Result<()> {
    for i in 0..k {
        if (a[i * k + i] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("correlation matrix needs a unit diagonal"));
        }
        for j in 0..i {
            let (x, y) = (a[i * k + j], a[j * k + i]);
            if !x.is_finite() || (x - y).abs() > 1e-12 {
                return Err(Error::invalid("correlation matrix must be symmetric"));
            }
            if x.abs() >= 1.0 {
                return Err(Error::invalid("correlations must lie in (-1, 1)"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let a = [1.0, 0.5, 0.2, 0.5, 1.0, -0.3, 0.2, -0.3, 1.0];
        let l = cholesky(&a, 3).unwrap();
        let back = outer_lower(&l, 3);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = [1.0, 0.99, 0.99, 0.99, 1.0, -0.99, 0.99, -0.99, 1.0];
        assert!(matches!(cholesky(&a, 3), Err(Error::NotPositiveDefinite)));
    }
}
