//! Convergence diagnostics and interval summaries for scalar draws.
//!
//! `chains` arguments are slices of equal-length per-chain draw vectors.

use crate::error::{Error, Result};
use crate::normal::std_normal_quantile;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var_ddof1(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check_chains(chains: &[&[f64]], min_draws: usize) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::invalid("R-hat needs at least two chains"));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Mismatch("chains have different lengths".into()));
    }
    if n < min_draws {
        return Err(Error::invalid(format!("need at least {min_draws} draws per chain")));
    }
    Ok(n)
}

/// Splits each chain into halves (dropping the middle draw of odd chains).
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = chains[0].len();
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..].to_vec()])
        .collect()
}

/// Replaces pooled values by normal scores of their fractional ranks
/// (average ranks for ties).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_each = chains[0].len();
    let total = chains.len() * n_each;
    let mut idx: Vec<(f64, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, x)| (*x, c * n_each + i)))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && idx[j + 1].0 == idx[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for e in &idx[i..=j] {
            ranks[e.1] = r;
        }
        i = j + 1;
    }
    let s = total as f64;
    chains
        .iter()
        .enumerate()
        .map(|(c, v)| {
            (0..v.len())
                .map(|i| std_normal_quantile((ranks[c * n_each + i] - 0.375) / (s + 0.25)))
                .collect()
        })
        .collect()
}

fn split_rhat_raw(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| var_ddof1(c)).collect::<Vec<_>>());
    let b_over_n = var_ddof1(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

fn is_constant(chains: &[&[f64]]) -> bool {
    let first = chains[0][0];
    chains.iter().all(|c| c.iter().all(|&x| x == first))
}

/// Split R-hat: the largest of the rank-normalized bulk and folded values
/// and the raw-scale value.
/// Constant draws give `+inf`.
pub fn rhat(chains: &[&[f64]]) -> Result<f64> {
    check_chains(chains, 4)?;
    if chains.iter().flat_map(|c| c.iter()).any(|x| !x.is_finite()) {
        return Ok(f64::INFINITY);
    }
    if is_constant(chains) {
        return Ok(f64::INFINITY);
    }
    let halves = split(chains);
    if halves.iter().any(|h| h.iter().all(|&x| x == h[0])) {
        return Ok(f64::INFINITY);
    }
    let bulk = split_rhat_raw(&rank_normalize(&halves));
    let mut pooled: Vec<f64> = halves.iter().flatten().copied().collect();
    let med = median_in_place(&mut pooled);
    let folded: Vec<Vec<f64>> = halves.iter().map(|h| h.iter().map(|x| (x - med).abs()).collect()).collect();
    let tail = split_rhat_raw(&rank_normalize(&folded));
    // Ranks saturate when chains do not overlap at all; the raw-scale
    // statistic keeps growing with the separation.
    let classic = split_rhat_raw(&halves);
    Ok(bulk.max(tail).max(classic))
}

/// Bulk effective sample size of rank-normalized split chains.
pub fn ess_bulk(chains: &[&[f64]]) -> Result<f64> {
    check_chains(chains, 4)?;
    if is_constant(chains) || chains.iter().flat_map(|c| c.iter()).any(|x| !x.is_finite()) {
        return Ok(f64::NAN);
    }
    Ok(ess_raw(&rank_normalize(&split(chains))))
}

/// Autocovariance of `x` at `lag` (biased, divides by `n`).
fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n - lag {
        s += (x[i] - m) * (x[i + lag] - m);
    }
    s / n as f64
}

/// Effective sample size with Geyer's initial monotone sequence.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let mean_acov = |lag: usize| -> f64 {
        chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, lag)).sum::<f64>() / m
    };
    let chain_var: Vec<f64> = chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, 0) * nf / (nf - 1.0)).collect();
    let mean_var = mean(&chain_var);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if chains.len() > 1 {
        var_plus += var_ddof1(&means);
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }

    let mut rho = vec![0.0; n + 2];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
    rho[1] = rho_odd;
    let mut t = 1;
    while t + 5 < n && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[t + 1] = rho_even;
            rho[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho[max_t + 1] = rho_even;
    }
    let mut t = 1;
    while t + 2 <= max_t {
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t] {
            let v = (rho[t - 1] + rho[t]) / 2.0;
            rho[t + 1] = v;
            rho[t + 2] = v;
        }
        t += 2;
    }
    let total = m * nf;
    let tau = (-1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t + 1]).max(1.0 / total.log10());
    total / tau
}

/// Highest-density interval: the shortest window of `ceil(mass * n)`
/// sorted draws, ties broken toward the lowest start.
pub fn hdi(draws: &[f64], mass: f64) -> Result<(f64, f64)> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::invalid("HDI mass must lie in (0, 1)"));
    }
    if draws.len() < 20 {
        return Err(Error::invalid("HDI needs at least 20 draws"));
    }
    if draws.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("draws contain NaN"));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let w = ((mass * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut best = 0;
    let mut width = f64::INFINITY;
    for i in 0..=n - w {
        let d = s[i + w - 1] - s[i];
        if d < width {
            width = d;
            best = i;
        }
    }
    Ok((s[best], s[best + w - 1]))
}

fn median_in_place(x: &mut [f64]) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

pub fn median(x: &[f64]) -> f64 {
    median_in_place(&mut x.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chains(n_chains: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..n_chains)
            .map(|c| {
                let mut rng = stream(seed, &[c as u64]);
                (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
            })
            .collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        let ch = normal_chains(4, 10_000, 1);
        let refs: Vec<&[f64]> = ch.iter().map(|c| c.as_slice()).collect();
        let r = rhat(&refs).unwrap();
        assert!((0.999..=1.01).contains(&r), "{r}");
        let ess = ess_bulk(&refs).unwrap();
        assert!(ess > 30_000.0 && ess < 50_000.0, "{ess}");
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        let mut ch = normal_chains(2, 500, 2);
        for x in &mut ch[1] {
            *x += 10.0;
        }
        let refs: Vec<&[f64]> = ch.iter().map(|c| c.as_slice()).collect();
        assert!(rhat(&refs).unwrap() > 2.0);
    }

    #[test]
    fn constant_chains_are_flagged() {
        let c = vec![1.5; 100];
        assert_eq!(rhat(&[&c, &c]).unwrap(), f64::INFINITY);
        assert!(rhat(&[&c]).is_err());
    }

    #[test]
    fn hdi_of_integers() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(hdi(&x, 0.95).unwrap(), (1.0, 95.0));
        assert!(hdi(&x, 1.0).is_err());
        assert_eq!(hdi(&[2.0; 30], 0.95).unwrap(), (2.0, 2.0));
    }
}
