//! Choice probabilities of the noisy-Bayesian choice models.
//!
//! Amounts are passed as cents in `f64`. The probit rules only see the ratio
//! of the two amounts, so the unit cancels; the random-utility benchmark
//! converts to euros before applying its sensitivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::std_normal_cdf;

/// Prior SD of the log payment ratio. Fixed for identification.
pub const PAYMENT_PRIOR_SD: f64 = 1.0;

/// Objective threshold factor of the number-comparison task.
pub const NUMBER_THRESHOLD: f64 = 0.5;

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {x}")))
    }
}

/// Parameters of one decision maker in the altruism task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualParams {
    beta: f64,
    nu_so: f64,
    nu_b: f64,
    mu_r: f64,
    sigma_r: f64,
}

impl IndividualParams {
    pub fn new(beta: f64, nu_so: f64, nu_b: f64, mu_r: f64) -> Result<Self> {
        for (n, v) in [("beta", beta), ("nu_so", nu_so), ("nu_b", nu_b), ("mu_r", mu_r)] {
            check_finite(n, v)?;
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0,1), got {beta}")));
        }
        if nu_so < 0.0 || nu_b < 0.0 {
            return Err(Error::invalid("noise SDs must be non-negative"));
        }
        if mu_r <= 0.0 {
            return Err(Error::invalid(format!("mu_r must be positive, got {mu_r}")));
        }
        Ok(Self {
            beta,
            nu_so,
            nu_b,
            mu_r,
            sigma_r: PAYMENT_PRIOR_SD,
        })
    }

    /// Builds parameters from the odds form `b = beta / (1 - beta)`.
    pub fn from_odds(b: f64, nu_so: f64, nu_b: f64, mu_r: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("odds b must be positive, got {b}")));
        }
        Self::new(b / (1.0 + b), nu_so, nu_b, mu_r)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn nu_so(&self) -> f64 {
        self.nu_so
    }
    pub fn nu_b(&self) -> f64 {
        self.nu_b
    }
    pub fn mu_r(&self) -> f64 {
        self.mu_r
    }
    pub fn sigma_r(&self) -> f64 {
        self.sigma_r
    }

    /// Preference odds `beta / (1 - beta)`.
    pub fn odds(&self) -> f64 {
        self.beta / (1.0 - self.beta)
    }

    pub fn alpha(&self) -> f64 {
        weight(self.nu_so, self.sigma_r)
    }

    pub fn delta(&self) -> f64 {
        self.mu_r.powf(-(1.0 - self.alpha()))
    }

    pub fn with_nu_b(mut self, nu_b: f64) -> Result<Self> {
        if !(nu_b >= 0.0 && nu_b.is_finite()) {
            return Err(Error::invalid("nu_b must be non-negative"));
        }
        self.nu_b = nu_b;
        Ok(self)
    }

    fn probit_scale(&self) -> Result<f64> {
        let a = self.alpha();
        let s = (self.nu_so * self.nu_so * a * a + self.nu_b * self.nu_b).sqrt();
        if s > 0.0 {
            Ok(s)
        } else {
            Err(Error::DeterministicLimit)
        }
    }
}

/// Parameters of one decision maker in the number-comparison task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumberParams {
    nu_ab: f64,
    mu_rp: f64,
    threshold: f64,
}

impl NumberParams {
    pub fn new(nu_ab: f64, mu_rp: f64) -> Result<Self> {
        check_finite("nu_ab", nu_ab)?;
        check_finite("mu_rp", mu_rp)?;
        if nu_ab < 0.0 {
            return Err(Error::invalid("nu_ab must be non-negative"));
        }
        if mu_rp <= 0.0 {
            return Err(Error::invalid(format!("mu_rp must be positive, got {mu_rp}")));
        }
        Ok(Self {
            nu_ab,
            mu_rp,
            threshold: NUMBER_THRESHOLD,
        })
    }

    pub fn nu_ab(&self) -> f64 {
        self.nu_ab
    }
    pub fn mu_rp(&self) -> f64 {
        self.mu_rp
    }
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    pub fn alpha(&self) -> f64 {
        weight(self.nu_ab, PAYMENT_PRIOR_SD)
    }
    pub fn delta(&self) -> f64 {
        self.mu_rp.powf(-(1.0 - self.alpha()))
    }
}

/// Logistic benchmark over weighted monetary utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomUtilityParams {
    beta: f64,
    sigma_ru: f64,
}

impl RandomUtilityParams {
    pub fn new(beta: f64, sigma_ru: f64) -> Result<Self> {
        check_finite("beta", beta)?;
        check_finite("sigma_ru", sigma_ru)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0,1), got {beta}")));
        }
        if sigma_ru <= 0.0 {
            return Err(Error::invalid("sigma_ru must be positive"));
        }
        Ok(Self { beta, sigma_ru })
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn sigma_ru(&self) -> f64 {
        self.sigma_ru
    }
}

#[inline]
fn weight(nu: f64, sigma_r: f64) -> f64 {
    let s2 = sigma_r * sigma_r;
    s2 / (s2 + nu * nu)
}

/// Bayesian evidence weight `sigma^2 / (sigma^2 + nu^2)` placed on the signal.
pub fn evidence_weight(nu: f64, sigma_r: f64) -> Result<f64> {
    check_finite("nu", nu)?;
    check_finite("sigma_r", sigma_r)?;
    if nu < 0.0 {
        return Err(Error::invalid(format!("nu must be non-negative, got {nu}")));
    }
    if sigma_r <= 0.0 {
        return Err(Error::invalid(format!("sigma_r must be positive, got {sigma_r}")));
    }
    Ok(weight(nu, sigma_r))
}

/// Prior-induced threshold `mu_r^-(1 - alpha)`.
pub fn prior_threshold(mu_r: f64, alpha: f64) -> Result<f64> {
    check_finite("mu_r", mu_r)?;
    check_finite("alpha", alpha)?;
    if mu_r <= 0.0 {
        return Err(Error::invalid(format!("mu_r must be positive, got {mu_r}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1], got {alpha}")));
    }
    Ok(mu_r.powf(-(1.0 - alpha)))
}

fn check_amounts(self_amt: f64, other_amt: f64) -> Result<()> {
    check_finite("self amount", self_amt)?;
    check_finite("other amount", other_amt)?;
    if self_amt < 0.0 {
        return Err(Error::invalid("self amount must be non-negative"));
    }
    if other_amt <= 0.0 {
        return Err(Error::invalid("other amount must be positive"));
    }
    Ok(())
}

/// Probability of choosing `self` under the log-ratio probit rule.
///
/// A zero `self` amount has log ratio minus infinity and returns exactly 0.
pub fn prob_self(p: &IndividualParams, self_amt: f64, other_amt: f64) -> Result<f64> {
    check_amounts(self_amt, other_amt)?;
    let scale = p.probit_scale()?;
    if self_amt == 0.0 {
        return Ok(0.0);
    }
    let a = p.alpha();
    let ln_delta = -(1.0 - a) * p.mu_r.ln();
    let num = a * (self_amt / other_amt).ln() - p.odds().ln() - ln_delta;
    Ok(std_normal_cdf(num / scale))
}

/// Probability of choosing `A` in the number-comparison task.
///
/// The probit scale is `alpha' * nu`, the zero-preference-noise limit of
/// the altruism rule.
pub fn prob_a(p: &NumberParams, a: f64, b: f64) -> Result<f64> {
    check_finite("A", a)?;
    check_finite("B", b)?;
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::invalid("number amounts must be positive"));
    }
    if p.nu_ab == 0.0 {
        return Err(Error::DeterministicLimit);
    }
    let w = p.alpha();
    let ln_delta = -(1.0 - w) * p.mu_rp.ln();
    let num = w * (a / b).ln() - p.threshold.ln() - ln_delta;
    Ok(std_normal_cdf(num / (w * p.nu_ab)))
}

/// Logistic random-utility benchmark. Amounts are cents and are converted
/// to euros before scaling by the sensitivity.
pub fn prob_self_random_utility(p: &RandomUtilityParams, self_amt: f64, other_amt: f64) -> Result<f64> {
    check_finite("self amount", self_amt)?;
    check_finite("other amount", other_amt)?;
    let u_self = p.sigma_ru * (1.0 - p.beta) * self_amt / 100.0;
    let u_other = p.sigma_ru * p.beta * other_amt / 100.0;
    let m = u_self.max(u_other);
    let es = (u_self - m).exp();
    let eo = (u_other - m).exp();
    Ok(es / (es + eo))
}

/// Linear-encoding counterpart of [`prob_self`] with Gaussian priors.
pub fn prob_self_linear(p: &IndividualParams, self_amt: f64, other_amt: f64) -> Result<f64> {
    check_amounts(self_amt, other_amt)?;
    let scale = p.probit_scale()?;
    let a = p.alpha();
    let delta = 1.0 - (1.0 - a) * p.mu_r;
    let num = a * (self_amt / other_amt) - p.odds() - delta;
    Ok(std_normal_cdf(num / scale))
}

/// Ratio `self/other` at which [`prob_self`] equals one half. Does not
/// depend on the preference noise.
pub fn indifference_ratio(p: &IndividualParams) -> f64 {
    let a = p.alpha();
    (p.odds() * p.delta()).powf(1.0 / a)
}

/// Which choice function to evaluate over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChoiceRule {
    Probit(IndividualParams),
    Linear(IndividualParams),
    Number(NumberParams),
    RandomUtility(RandomUtilityParams),
}

impl ChoiceRule {
    pub fn prob(&self, first: f64, second: f64) -> Result<f64> {
        match self {
            ChoiceRule::Probit(p) => prob_self(p, first, second),
            ChoiceRule::Linear(p) => prob_self_linear(p, first, second),
            ChoiceRule::Number(p) => prob_a(p, first, second),
            ChoiceRule::RandomUtility(p) => prob_self_random_utility(p, first, second),
        }
    }
}

/// Average choice probability over `(first, second)` amount pairs.
pub fn mean_choice_over_grid(rule: &ChoiceRule, grid: &[(f64, f64)]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("choice grid"));
    }
    let mut sum = 0.0;
    for &(x, y) in grid {
        sum += rule.prob(x, y)?;
    }
    Ok(sum / grid.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, nu_so: f64, nu_b: f64, mu_r: f64) -> IndividualParams {
        IndividualParams::new(beta, nu_so, nu_b, mu_r).unwrap()
    }

    #[test]
    fn evidence_weight_examples() {
        assert!((evidence_weight(0.313, 1.0).unwrap() - 0.9108).abs() < 1e-4);
        assert_eq!(evidence_weight(0.0, 1.0).unwrap(), 1.0);
        assert!((evidence_weight(0.172, 1.0).unwrap() - 0.971).abs() < 5e-4);
    }

    #[test]
    fn evidence_weight_rejects_bad_input() {
        assert!(evidence_weight(-0.1, 1.0).is_err());
        assert!(evidence_weight(f64::NAN, 1.0).is_err());
        assert!(evidence_weight(0.1, 0.0).is_err());
        assert!(evidence_weight(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn evidence_weight_strictly_decreasing() {
        let mut prev = evidence_weight(0.0, 1.0).unwrap();
        for i in 1..=100 {
            let w = evidence_weight(i as f64 * 0.05, 1.0).unwrap();
            assert!(w < prev);
            prev = w;
        }
    }

    #[test]
    fn prior_threshold_examples() {
        assert_eq!(prior_threshold(1.0, 0.7).unwrap(), 1.0);
        assert!((prior_threshold(0.515, 0.962).unwrap() - 1.0256).abs() < 1e-4);
        assert!((prior_threshold(0.474, 0.939).unwrap() - 1.0466).abs() < 1e-4);
        assert!(prior_threshold(0.0, 0.5).is_err());
        assert!(prior_threshold(-1.0, 0.5).is_err());
    }

    #[test]
    fn prior_threshold_identities() {
        for i in 1..=20 {
            let a = i as f64 / 20.0;
            assert_eq!(prior_threshold(1.0, a).unwrap(), 1.0);
            let mu = 0.1 * i as f64;
            assert_eq!(prior_threshold(mu, 1.0).unwrap(), 1.0);
            assert!(prior_threshold(0.7, a.min(0.99)).unwrap() > 1.0);
        }
    }

    #[test]
    fn prob_self_symmetric_indifference() {
        let p = params(0.5, 0.25, 0.25, 1.0);
        assert_eq!(prob_self(&p, 500.0, 500.0).unwrap(), 0.5);
    }

    #[test]
    fn prob_self_hand_evaluated() {
        // Reference value from a 30-digit evaluation of the probit formula.
        let p = params(0.3, 0.25, 0.25, 1.0);
        let v = prob_self(&p, 474.0, 1000.0).unwrap();
        assert!((v - 0.663_260_721_733_379).abs() < 1e-12, "{v}");
    }

    #[test]
    fn prob_self_log_symmetry() {
        let p = params(0.5, 0.3, 0.2, 1.0);
        for r in [1.1, 1.3, 1.5, 2.0, 3.0] {
            let s = prob_self(&p, r * 100.0, 100.0).unwrap() + prob_self(&p, 100.0, r * 100.0).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prob_self_zero_self_and_degenerate() {
        let p = params(0.3, 0.25, 0.25, 1.0);
        assert_eq!(prob_self(&p, 0.0, 655.0).unwrap(), 0.0);
        let d = params(0.3, 0.0, 0.0, 1.0);
        assert!(matches!(prob_self(&d, 100.0, 655.0), Err(Error::DeterministicLimit)));
        assert!(prob_self(&p, 100.0, 0.0).is_err());
    }

    #[test]
    fn prob_a_examples() {
        let p = NumberParams::new(0.4, 1.0).unwrap();
        let w = 1.0 / (1.0 + 0.16);
        // At A/B = 1/2 only the (1 - alpha') ln 2 term survives.
        let oracle = crate::normal::std_normal_cdf((1.0 - w) * 2.0_f64.ln() / (w * 0.4));
        assert!((prob_a(&p, 500.0, 1000.0).unwrap() - oracle).abs() < 1e-15);
        let crossing = 0.5_f64.powf(1.0 / w);
        assert!((prob_a(&p, crossing * 1000.0, 1000.0).unwrap() - 0.5).abs() < 1e-12);

        let q = NumberParams::new(0.198, 0.515).unwrap();
        let v = prob_a(&q, 600.0, 1000.0).unwrap();
        // Unrounded weights; see the rounded-intermediate check below.
        assert!((v - 0.822_950_683_749_889).abs() < 1e-12, "{v}");
        assert!((v - 0.8223).abs() < 1e-3);

        let sharp = NumberParams::new(1e-4, 1.0).unwrap();
        assert!(prob_a(&sharp, 600.0, 1000.0).unwrap() > 1.0 - 1e-12);
        assert!(prob_a(&sharp, 400.0, 1000.0).unwrap() < 1e-12);
        assert!(prob_a(&q, 0.0, 1000.0).is_err());
    }

    #[test]
    fn prob_a_rounded_weights_reproduce_published_example() {
        use crate::normal::std_normal_cdf;
        let (a, d, nu) = (0.962_f64, 1.026_f64, 0.198_f64);
        let v = std_normal_cdf((a * 0.6_f64.ln() - 0.5_f64.ln() - d.ln()) / (a * nu));
        assert!((v - 0.8223).abs() < 1e-4, "{v}");
    }

    #[test]
    fn random_utility_examples() {
        let eq = RandomUtilityParams::new(0.5, 2.0).unwrap();
        assert_eq!(prob_self_random_utility(&eq, 300.0, 300.0).unwrap(), 0.5);
        let flat = RandomUtilityParams::new(0.3, 1e-12).unwrap();
        assert!((prob_self_random_utility(&flat, 100.0, 5000.0).unwrap() - 0.5).abs() < 1e-9);
        let p = RandomUtilityParams::new(0.3, 1.0).unwrap();
        let v = prob_self_random_utility(&p, 200.0, 300.0).unwrap();
        let oracle = 1.0 / (1.0 + (-(0.7 * 2.0 - 0.3 * 3.0_f64)).exp());
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.6225).abs() < 1e-4);
        let huge = RandomUtilityParams::new(0.3, 1e4).unwrap();
        assert!(prob_self_random_utility(&huge, 1e6, 1.0).unwrap().is_finite());
        assert!(prob_self_random_utility(&p, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn linear_rule_examples() {
        // alpha = 1 requires zero payment noise, leaving delta = 1, so the
        // rule is at one half where self/other = b + 1.
        let p = params(0.375, 0.0, 0.25, 1.0);
        assert!((prob_self_linear(&p, 1600.0, 1000.0).unwrap() - 0.5).abs() < 1e-15);

        let nu = (1.0_f64 / 0.9 - 1.0).sqrt();
        let q = params(0.3, nu, 0.25, 1.0);
        assert!((q.alpha() - 0.9).abs() < 1e-15);
        assert!((1.0 - (1.0 - q.alpha()) * q.mu_r() - 0.9).abs() < 1e-14);

        let r = params(0.3, 0.25, 0.25, 1.0);
        let v = prob_self_linear(&r, 600.0, 1000.0).unwrap();
        // 30-digit reference evaluation.
        assert!((v - 0.009_515_418_880_108_83).abs() < 1e-13, "{v}");
    }

    #[test]
    fn indifference_ratio_examples() {
        assert!((indifference_ratio(&params(0.5, 0.25, 0.25, 1.0)) - 1.0).abs() < 1e-15);
        let p = params(0.3, 0.25, 0.25, 1.0);
        let oracle = (3.0_f64 / 7.0).powf(1.0 / (1.0 / 1.0625));
        let r = indifference_ratio(&p);
        assert!((r - oracle).abs() < 1e-15);
        assert!((r - 0.406_466_413_647_394).abs() < 1e-12);
        assert!((prob_self(&p, r * 1000.0, 1000.0).unwrap() - 0.5).abs() < 1e-12);
        for nb in [0.25, 0.5, 1.0] {
            assert_eq!(indifference_ratio(&p.with_nu_b(nb).unwrap()).to_bits(), r.to_bits());
        }
    }

    #[test]
    fn mean_over_grid_basics() {
        let p = params(0.3, 0.25, 0.25, 1.0);
        let rule = ChoiceRule::Probit(p);
        assert!(mean_choice_over_grid(&rule, &[]).is_err());
        let single = mean_choice_over_grid(&rule, &[(474.0, 1000.0)]).unwrap();
        assert_eq!(single, prob_self(&p, 474.0, 1000.0).unwrap());
    }
}
