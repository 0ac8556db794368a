//! WAIC and pairwise ELPD comparison.
//!
//! Pointwise log-likelihoods are consumed one posterior draw at a time, so
//! a full draws x records matrix never has to be held in memory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{DrawsReader, Posterior};

/// Fewest draws accepted by [`waic`].
pub const MIN_DRAWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub elpd_waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
    /// `sqrt(n * var(pointwise))`.
    pub se: f64,
    /// Per-record `lppd_i - p_waic_i`.
    pub pointwise: Vec<f64>,
    pub n_draws: usize,
}

/// Streaming per-record log-mean-exp and variance over draws.
#[derive(Debug, Clone)]
pub struct WaicAccumulator {
    n_draws: usize,
    /// Running max and scaled sum for the log-sum-exp.
    max: Vec<f64>,
    scaled: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl WaicAccumulator {
    pub fn new(n_records: usize) -> Self {
        Self {
            n_draws: 0,
            max: vec![f64::NEG_INFINITY; n_records],
            scaled: vec![0.0; n_records],
            mean: vec![0.0; n_records],
            m2: vec![0.0; n_records],
        }
    }

    pub fn n_records(&self) -> usize {
        self.max.len()
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    /// Adds one draw's pointwise log-likelihoods.
    pub fn add_draw(&mut self, loglik: &[f64]) -> Result<()> {
        if loglik.len() != self.n_records() {
            return Err(Error::Mismatch(format!(
                "draw has {} records, expected {}",
                loglik.len(),
                self.n_records()
            )));
        }
        if let Some(i) = loglik.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogLik(i));
        }
        self.n_draws += 1;
        let n = self.n_draws as f64;
        for (i, &v) in loglik.iter().enumerate() {
            if v > self.max[i] {
                self.scaled[i] = self.scaled[i] * (self.max[i] - v).exp() + 1.0;
                self.max[i] = v;
            } else {
                self.scaled[i] += (v - self.max[i]).exp();
            }
            let d = v - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (v - self.mean[i]);
        }
        Ok(())
    }

    /// Finishes with the default draw minimum.
    pub fn finish(&self) -> Result<WaicResult> {
        self.finish_with_min(MIN_DRAWS)
    }

    pub fn finish_with_min(&self, min_draws: usize) -> Result<WaicResult> {
        if self.n_draws < min_draws.max(2) {
            return Err(Error::invalid(format!(
                "WAIC needs at least {} draws, got {}",
                min_draws.max(2),
                self.n_draws
            )));
        }
        if self.n_records() == 0 {
            return Err(Error::Empty("records"));
        }
        let s = self.n_draws as f64;
        let mut lppd = 0.0;
        let mut p_waic = 0.0;
        let pointwise: Vec<f64> = (0..self.n_records())
            .map(|i| {
                let lp = self.max[i] + self.scaled[i].ln() - s.ln();
                let v = self.m2[i] / (s - 1.0);
                lppd += lp;
                p_waic += v;
                lp - v
            })
            .collect();
        Ok(WaicResult {
            elpd_waic: lppd - p_waic,
            p_waic,
            lppd,
            se: paired_se(&pointwise),
            pointwise,
            n_draws: self.n_draws,
        })
    }
}

/// `sqrt(n * var(x))` with the population variance.
fn paired_se(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (n * var).sqrt()
}

/// WAIC of a draws x records log-likelihood matrix.
pub fn waic(loglik: &[Vec<f64>]) -> Result<WaicResult> {
    waic_with_min(loglik, MIN_DRAWS)
}

/// [`waic`] with an explicit draw minimum.
pub fn waic_with_min(loglik: &[Vec<f64>], min_draws: usize) -> Result<WaicResult> {
    let first = loglik.first().ok_or(Error::Empty("draws"))?;
    let mut acc = WaicAccumulator::new(first.len());
    for row in loglik {
        acc.add_draw(row)?;
    }
    acc.finish_with_min(min_draws)
}

/// Streams a draws file and scores every draw against the data behind
/// `post`.
pub fn waic_from_draws(reader: &mut DrawsReader, post: &Posterior) -> Result<WaicResult> {
    if reader.dim() != post.dim() {
        return Err(Error::Mismatch(format!(
            "draws have {} coordinates, the model on this data needs {}",
            reader.dim(),
            post.dim()
        )));
    }
    let mut acc = WaicAccumulator::new(post.n_records());
    let mut ll = vec![0.0; post.n_records()];
    while let Some(row) = reader.next_row()? {
        post.pointwise_from_constrained(row, &mut ll)?;
        acc.add_draw(&ll)?;
    }
    acc.finish()
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub elpd_waic: f64,
    pub p_waic: f64,
    pub se: f64,
    /// ELPD deficit against the best model (0 for the best).
    pub d_elpd: f64,
    /// Standard error of the paired pointwise differences.
    pub d_se: f64,
}

/// Ranks models by ELPD, best first (ties keep input order).
pub fn compare(results: &[(String, WaicResult)]) -> Result<Vec<ComparisonRow>> {
    let first = results.first().ok_or(Error::Empty("models"))?;
    let n = first.1.pointwise.len();
    if let Some((name, _)) = results.iter().find(|(_, r)| r.pointwise.len() != n) {
        return Err(Error::Mismatch(format!(
            "model {name} was scored on a different number of records"
        )));
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[b].1.elpd_waic.total_cmp(&results[a].1.elpd_waic));
    let best = &results[order[0]].1;
    Ok(order
        .into_iter()
        .map(|i| {
            let (name, r) = &results[i];
            let diff: Vec<f64> = best.pointwise.iter().zip(&r.pointwise).map(|(a, b)| a - b).collect();
            ComparisonRow {
                model: name.clone(),
                elpd_waic: r.elpd_waic,
                p_waic: r.p_waic,
                se: r.se,
                d_elpd: best.elpd_waic - r.elpd_waic,
                d_se: paired_se(&diff),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_loglik() {
        let rows = vec![vec![-0.7; 4]; 60];
        let w = waic(&rows).unwrap();
        assert!((w.elpd_waic - 4.0 * -0.7).abs() < 1e-12);
        assert_eq!(w.p_waic, 0.0);
        assert_eq!(w.se, 0.0);
    }

    #[test]
    fn rejects_too_few_draws_and_non_finite() {
        assert!(waic(&vec![vec![-1.0; 3]; 10]).is_err());
        let mut rows = vec![vec![-1.0; 3]; 60];
        rows[7][2] = f64::NEG_INFINITY;
        assert!(matches!(waic(&rows), Err(Error::NonFiniteLogLik(2))));
    }

    #[test]
    fn self_comparison_is_zero() {
        let rows: Vec<Vec<f64>> = (0..60).map(|d| vec![-1.0 - 0.01 * d as f64, -0.3, -2.0]).collect();
        let w = waic(&rows).unwrap();
        let table = compare(&[("a".into(), w.clone()), ("b".into(), w)]).unwrap();
        assert_eq!(table[1].d_elpd, 0.0);
        assert_eq!(table[1].d_se, 0.0);
    }
}
