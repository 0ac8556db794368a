//! Unconstrained coordinates for correlation matrices and the LKJ prior.
//!
//! Correlation Cholesky factors are built from canonical partial
//! correlations `tanh(y)` filled row by row, the same map Stan uses.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::dual::{Dual, MAX_CORR};
use crate::error::{Error, Result};
use crate::linalg;

/// Cholesky factor of a correlation matrix together with the log density
/// of its LKJ prior (including the change-of-variables Jacobian) and the
/// gradients needed for back-propagation.
#[derive(Debug, Clone)]
pub struct CorrCholesky {
    pub k: usize,
    /// Row-major lower-triangular factor.
    pub l: Vec<f64>,
    /// `dl[i*k+j][m]` = d L_ij / d y_m.
    pub dl: Vec<[f64; MAX_CORR]>,
    /// LKJ log density of `L` plus log Jacobian of `y -> L`.
    pub log_density: f64,
    pub grad_log_density: [f64; MAX_CORR],
}

/// Maps `k(k-1)/2` unconstrained values to a correlation Cholesky factor.
pub fn corr_cholesky(y: &[f64], k: usize, eta: f64) -> CorrCholesky {
    let n = k * (k - 1) / 2;
    assert_eq!(y.len(), n);
    assert!(n <= MAX_CORR, "at most {MAX_CORR} correlation coordinates");

    let zero = Dual::constant(0.0);
    let mut l = vec![zero; k * k];
    let mut lp = zero;
    let mut m = 0;
    l[0] = Dual::constant(1.0);
    for i in 1..k {
        let mut sum_sq = zero;
        for j in 0..i {
            let yd = Dual::var(y[m], m);
            let z = yd.tanh();
            lp = lp + yd.ln_sech2();
            let v = if j == 0 {
                z
            } else {
                let rest = sum_sq.one_minus_floored();
                lp = lp + rest.ln() * 0.5;
                z * rest.sqrt()
            };
            sum_sq = sum_sq + v * v;
            l[i * k + j] = v;
            m += 1;
        }
        l[i * k + i] = sum_sq.one_minus_floored().sqrt();
    }
    for i in 1..k {
        let w = (k - i - 1) as f64 + 2.0 * eta - 2.0;
        lp = lp + l[i * k + i].ln() * w;
    }
    CorrCholesky {
        k,
        l: l.iter().map(|d| d.v).collect(),
        dl: l.iter().map(|d| d.d).collect(),
        log_density: lp.v,
        grad_log_density: lp.d,
    }
}

/// Inverse of [`corr_cholesky`]'s coordinate map.
pub fn corr_cholesky_free(l: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut y = Vec::with_capacity(k * (k - 1) / 2);
    for i in 1..k {
        let mut sum_sq: f64 = 0.0;
        for j in 0..i {
            let v = l[i * k + j];
            let z = if j == 0 { v } else { v / (1.0 - sum_sq).sqrt() };
            if !(z.abs() < 1.0) {
                return Err(Error::NotPositiveDefinite);
            }
            y.push(z.atanh());
            sum_sq += v * v;
        }
    }
    Ok(y)
}

/// Unnormalized LKJ log density of a correlation matrix.
pub fn lkj_corr_lpdf(omega: &[f64], k: usize, eta: f64) -> Result<f64> {
    let l = linalg::cholesky(omega, k)?;
    let log_det: f64 = (0..k).map(|i| 2.0 * l[i * k + i].ln()).sum();
    Ok((eta - 1.0) * log_det)
}

/// Draws a correlation Cholesky factor from LKJ(`eta`) through the vine of
/// partial correlations.
pub fn sample_lkj_cholesky<R: Rng + ?Sized>(k: usize, eta: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(Error::invalid("LKJ shape must be positive"));
    }
    let mut l = vec![0.0; k * k];
    l[0] = 1.0;
    if k == 1 {
        return Ok(l);
    }
    // acc[i] tracks the unexplained variance of row i.
    let mut acc = vec![1.0f64; k];
    let mut shape = eta + 0.5 * (k as f64 - 1.0);
    for col in 0..k - 1 {
        shape -= 0.5;
        let beta = Beta::new(shape, shape).map_err(|e| Error::invalid(e.to_string()))?;
        l[col * k + col] = acc[col].sqrt();
        for row in col + 1..k {
            let cpc = 2.0 * beta.sample(rng) - 1.0;
            l[row * k + col] = cpc * acc[row].sqrt();
            acc[row] *= 1.0 - cpc * cpc;
        }
    }
    l[k * k - 1] = acc[k - 1].sqrt();
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn constrain_free_round_trip() {
        let y = [0.3, -1.2, 0.8, 2.0, -0.4, 0.05];
        let c = corr_cholesky(&y, 4, 2.0);
        let omega = linalg::outer_lower(&c.l, 4);
        linalg::check_correlation(&omega, 4).unwrap();
        let back = corr_cholesky_free(&c.l, 4).unwrap();
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let y = [0.3, -1.2, 0.8, 2.0, -0.4, 0.05];
        let c = corr_cholesky(&y, 4, 2.0);
        let h = 1e-6;
        for m in 0..6 {
            let mut up = y;
            let mut dn = y;
            up[m] += h;
            dn[m] -= h;
            let (cu, cd) = (corr_cholesky(&up, 4, 2.0), corr_cholesky(&dn, 4, 2.0));
            let fd = (cu.log_density - cd.log_density) / (2.0 * h);
            assert!((fd - c.grad_log_density[m]).abs() < 1e-7, "coord {m}");
            for e in 0..16 {
                let fd = (cu.l[e] - cd.l[e]) / (2.0 * h);
                assert!((fd - c.dl[e][m]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn lkj_two_prefers_identity() {
        let k = 4;
        let mut id = vec![0.0; 16];
        let mut high = vec![0.9; 16];
        for i in 0..k {
            id[i * k + i] = 1.0;
            high[i * k + i] = 1.0;
        }
        // Oracle: (eta - 1) * ln det, det of the equicorrelation matrix.
        let det_high: f64 = (1.0 + 3.0 * 0.9) * 0.1f64.powi(3);
        assert_eq!(lkj_corr_lpdf(&id, k, 2.0).unwrap(), 0.0);
        let lp = lkj_corr_lpdf(&high, k, 2.0).unwrap();
        assert!((lp - det_high.ln()).abs() < 1e-10);
        assert!(lp < 0.0);
    }

    #[test]
    fn lkj_draws_have_beta_marginals() {
        // Off-diagonal marginals of LKJ(eta) in dimension k are
        // 2 * Beta(eta - 1 + k/2, same) - 1, with variance 1 / (2a + 1).
        let mut rng = stream(11, &[]);
        let (k, eta, n) = (4, 2.0, 20_000);
        let a: f64 = eta - 1.0 + k as f64 / 2.0;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let l = sample_lkj_cholesky(k, eta, &mut rng).unwrap();
            let omega = linalg::outer_lower(&l, k);
            let r = omega[3 * k + 1];
            sums[0] += r;
            sums[1] += r * r;
        }
        let mean = sums[0] / n as f64;
        let var = sums[1] / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0 / (2.0 * a + 1.0)).abs() < 0.006);
    }
}
