//! Posterior summaries, derived quantities, probability statements and
//! predictive curves.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::diagnostics::{ess_bulk, hdi, median, rhat};
use super::draws::PosteriorDraws;
use super::variant::{ModelSpec, Role, Variant};
use crate::design::Task;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    evidence_weight, prior_threshold, prob_a, prob_self, prob_self_random_utility, IndividualParams,
    NumberParams, RandomUtilityParams,
};
use crate::rng::{domain, stream};
use crate::simulate::Group;

/// One row of a posterior summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
    pub rhat: f64,
    pub ess_bulk: f64,
}

pub const HDI_MASS: f64 = 0.95;

/// Summary statistics of one coordinate given its per-chain draws.
pub fn summarize_chains(parameter: &str, chains: &[Vec<f64>]) -> Result<SummaryRow> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::Empty("draws"));
    }
    // Welford updates keep constant draws exact.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in pooled.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let sd = if pooled.len() > 1 {
        (m2 / (pooled.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (hdi_low, hdi_high) = hdi(&pooled, HDI_MASS).unwrap_or((f64::NAN, f64::NAN));
    let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
    let rhat = rhat(&refs).unwrap_or(f64::NAN);
    let ess = ess_bulk(&refs).unwrap_or(f64::NAN);
    Ok(SummaryRow {
        parameter: parameter.to_string(),
        mean,
        median: median(&pooled),
        sd,
        hdi_low,
        hdi_high,
        rhat,
        ess_bulk: ess,
    })
}

fn spec_of(draws: &PosteriorDraws) -> Result<ModelSpec> {
    draws
        .meta
        .as_ref()
        .map(|m| m.spec)
        .ok_or_else(|| Error::invalid("draws carry no model metadata"))
}

fn group_tag(spec: &ModelSpec, role: Role) -> Vec<Option<Group>> {
    let idx = spec.role_index(role).expect("role present");
    if spec.offset_roles().contains(&idx) {
        vec![Some(Group::B), Some(Group::T)]
    } else {
        vec![None]
    }
}

fn tagged(base: &str, g: Option<Group>, what: &str) -> String {
    match g {
        Some(g) => format!("{base}.{}.{what}", g.as_str()),
        None => format!("{base}.{what}"),
    }
}

fn plain_tag(base: &str, g: Option<Group>) -> String {
    match g {
        Some(g) => format!("{base}.{}", g.as_str()),
        None => base.to_string(),
    }
}

/// Appends derived per-draw quantities: log-normal population means
/// `exp(mu + tau^2 / 2)` and medians `exp(mu)` per role and group, the
/// altruism weight on both scales, and evidence weights and prior
/// thresholds at the population means.
pub fn with_derived(draws: &PosteriorDraws) -> Result<PosteriorDraws> {
    let spec = spec_of(draws)?;
    if draws.names.iter().any(|n| n.ends_with(".pop_mean")) {
        return Ok(draws.clone());
    }
    let roles = spec.roles();
    let col = |name: String| draws.index_of(&name).ok_or(Error::Mismatch(format!("missing column {name}")));

    struct Rule {
        name: String,
        f: Box<dyn Fn(&[f64]) -> f64>,
    }
    let mut rules: Vec<Rule> = Vec::new();
    let mut pop_mean_idx = std::collections::HashMap::new();

    for &role in roles {
        let r = role.name();
        let mu = col(format!("mu.{r}"))?;
        let tau = col(format!("tau.{r}"))?;
        for g in group_tag(&spec, role) {
            let delta = match g {
                Some(Group::T) => Some(col(format!("delta_mu.{r}"))?),
                _ => None,
            };
            let m = move |row: &[f64]| row[mu] + delta.map_or(0.0, |d| row[d]);
            pop_mean_idx.insert((role, g), rules.len());
            rules.push(Rule {
                name: tagged(r, g, "pop_mean"),
                f: Box::new(move |row| (m(row) + 0.5 * row[tau] * row[tau]).exp()),
            });
            rules.push(Rule {
                name: tagged(r, g, "pop_median"),
                f: Box::new(move |row| m(row).exp()),
            });
        }
    }
    let dim = draws.dim();
    let at = |role: Role, g: Option<Group>| pop_mean_idx.get(&(role, g)).map(|i| dim + i);

    if spec.role_index(Role::Odds).is_some() {
        let (mu, tau) = (col("mu.b".into())?, col("tau.b".into())?);
        rules.push(Rule {
            name: "beta.pop_mean".into(),
            f: Box::new(move |row| {
                let b = (row[mu] + 0.5 * row[tau] * row[tau]).exp();
                b / (1.0 + b)
            }),
        });
        let b_cols: Vec<usize> = (0..draws.dim()).filter(|&i| draws.names[i].starts_with("b[")).collect();
        if !b_cols.is_empty() {
            rules.push(Rule {
                name: "beta.mean_individual".into(),
                f: Box::new(move |row| b_cols.iter().map(|&i| row[i] / (1.0 + row[i])).sum::<f64>() / b_cols.len() as f64),
            });
        }
    }

    // Evidence weights and thresholds read the pop_mean columns appended
    // above, so they are evaluated on the extended row.
    let mut late: Vec<(String, Box<dyn Fn(&[f64]) -> f64>)> = Vec::new();
    if spec.role_index(Role::NuSo).is_some() {
        for g in group_tag(&spec, Role::NuSo) {
            let nu = at(Role::NuSo, g).expect("pop_mean column");
            late.push((
                plain_tag("alpha", g),
                Box::new(move |row| evidence_weight(row[nu], 1.0).unwrap_or(f64::NAN)),
            ));
            if spec.role_index(Role::MuR).is_some() {
                let mr = at(Role::MuR, None).expect("pop_mean column");
                late.push((
                    plain_tag("delta", g),
                    Box::new(move |row| {
                        let a = evidence_weight(row[nu], 1.0).unwrap_or(f64::NAN);
                        prior_threshold(row[mr], a).unwrap_or(f64::NAN)
                    }),
                ));
            }
        }
    }

    let n_new = rules.len() + late.len();
    let mut names = draws.names.clone();
    names.extend(rules.iter().map(|r| r.name.clone()));
    names.extend(late.iter().map(|r| r.0.clone()));
    let mut values = Vec::with_capacity(draws.total_draws() * (dim + n_new));
    let mut row_buf = Vec::with_capacity(dim + n_new);
    for row in draws.rows() {
        row_buf.clear();
        row_buf.extend_from_slice(row);
        for r in &rules {
            let v = (r.f)(row);
            row_buf.push(v);
        }
        for (_, f) in &late {
            let v = f(&row_buf);
            row_buf.push(v);
        }
        values.extend_from_slice(&row_buf);
    }
    let mut out = PosteriorDraws::new(names, draws.n_chains, draws.n_draws, values)?;
    out.meta = draws.meta.clone();
    Ok(out)
}

/// Whether a column holds a per-participant parameter.
pub fn is_individual(name: &str) -> bool {
    name.ends_with(']')
}

/// Summary rows for every column, including derived quantities.
pub fn summarize(draws: &PosteriorDraws) -> Result<Vec<SummaryRow>> {
    let full = if draws.meta.is_some() { with_derived(draws)? } else { draws.clone() };
    (0..full.dim())
        .map(|i| summarize_chains(&full.names[i], &full.chains_of(i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Cmp {
    fn eval(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Column(usize),
    Value(f64),
}

impl Operand {
    fn get(&self, row: &[f64]) -> f64 {
        match *self {
            Operand::Column(i) => row[i],
            Operand::Value(v) => v,
        }
    }
}

/// Fraction of joint draws satisfying `pred`.
pub fn fraction_where(draws: &PosteriorDraws, pred: impl Fn(&[f64]) -> bool) -> Result<f64> {
    if draws.total_draws() == 0 {
        return Err(Error::Empty("draws"));
    }
    let hits = draws.rows().filter(|r| pred(r)).count();
    Ok(hits as f64 / draws.total_draws() as f64)
}

/// Probability of a comparison such as `"nu_so.T.pop_mean > nu_so.B.pop_mean"`
/// or `"mu_r.pop_mean < 1"`. Operands are column names (derived columns
/// included) or numbers; operators are `>`, `>=`, `<`, `<=`.
pub fn prob_statement(draws: &PosteriorDraws, statement: &str) -> Result<f64> {
    let owned;
    let d = if draws.meta.is_some() {
        owned = with_derived(draws)?;
        &owned
    } else {
        draws
    };
    let parts: Vec<&str> = statement.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::invalid(format!("expected `lhs op rhs`, got {statement:?}")));
    }
    let cmp = match parts[1] {
        ">" => Cmp::Gt,
        ">=" => Cmp::Ge,
        "<" => Cmp::Lt,
        "<=" => Cmp::Le,
        op => return Err(Error::invalid(format!("unknown comparison {op:?}"))),
    };
    let operand = |s: &str| -> Result<Operand> {
        if let Ok(v) = s.parse::<f64>() {
            return Ok(Operand::Value(v));
        }
        d.index_of(s)
            .map(Operand::Column)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {s:?}")))
    };
    let (a, b) = (operand(parts[0])?, operand(parts[2])?);
    fraction_where(d, |r| cmp.eval(a.get(r), b.get(r)))
}

/// Summary of one correlation entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub row: String,
    pub col: String,
    pub mean: f64,
    pub median: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

/// Every entry of the correlation matrix, diagonal and both triangles.
pub fn extract_correlations(draws: &PosteriorDraws) -> Result<Vec<CorrelationSummary>> {
    let spec = spec_of(draws)?;
    let roles = spec.roles();
    let mut out = Vec::new();
    for (i, ri) in roles.iter().enumerate() {
        for (j, rj) in roles.iter().enumerate() {
            let (a, b) = if i >= j { (ri, rj) } else { (rj, ri) };
            let (mean, med, lo, hi) = if i == j {
                (1.0, 1.0, 1.0, 1.0)
            } else {
                let name = format!("omega.{}.{}", a.name(), b.name());
                let idx = draws.index_of(&name).ok_or(Error::Mismatch(format!("missing column {name}")))?;
                let v = draws.column(idx);
                let (lo, hi) = hdi(&v, HDI_MASS).unwrap_or((f64::NAN, f64::NAN));
                (v.iter().sum::<f64>() / v.len() as f64, median(&v), lo, hi)
            };
            out.push(CorrelationSummary {
                row: ri.name().to_string(),
                col: rj.name().to_string(),
                mean,
                median: med,
                hdi_low: lo,
                hdi_high: hi,
            });
        }
    }
    Ok(out)
}

/// How predictive curves average over individuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictiveMode {
    /// Fresh participants drawn from the population distribution.
    Population,
    /// The fitted participants of the run.
    Fitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveConfig {
    pub group: Group,
    pub task: Task,
    pub mode: PredictiveMode,
    /// Fresh participants per draw in population mode.
    pub n_participants: usize,
    /// Draws used, evenly thinned.
    pub max_draws: usize,
    /// Denominator amount in cents; the numerator is `ratio * other`.
    pub other_cents: f64,
    pub seed: u64,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        Self {
            group: Group::B,
            task: Task::Altruism,
            mode: PredictiveMode::Population,
            n_participants: 200,
            max_draws: 400,
            other_cents: 1000.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictivePoint {
    pub ratio: f64,
    pub mean: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

/// Choice probability at `ratio` for one participant's natural-scale
/// parameters in role order.
fn individual_prob(spec: &ModelSpec, v: &[f64], task: Task, ratio: f64, other: f64) -> Result<f64> {
    let get = |role: Role, default: f64| spec.role_index(role).map_or(default, |i| v[i]);
    let (nu_so, nu_b, b, mu_r) = (get(Role::NuSo, 0.0), get(Role::NuB, 0.0), get(Role::Odds, 1.0), get(Role::MuR, 1.0));
    let own = ratio * other;
    if spec.variant == Variant::RandomUtility {
        let p = RandomUtilityParams::new(b / (1.0 + b), get(Role::Sensitivity, 1.0))?;
        return prob_self_random_utility(&p, own, other);
    }
    match task {
        Task::Altruism => prob_self(&IndividualParams::from_odds(b, nu_so, nu_b, mu_r)?, own, other),
        Task::Number => prob_a(&NumberParams::new(nu_so, mu_r)?, own, other),
    }
}

/// Population-average choice curve over `ratios`, summarized across draws
/// by its mean and 95% HDI.
pub fn posterior_predictive(draws: &PosteriorDraws, ratios: &[f64], cfg: &PredictiveConfig) -> Result<Vec<PredictivePoint>> {
    let spec = spec_of(draws)?;
    let meta = draws.meta.as_ref().expect("checked by spec_of");
    if !spec.variant.accepts(cfg.task) {
        return Err(Error::invalid(format!("{} has no {} likelihood", spec.variant, cfg.task.as_str())));
    }
    if ratios.is_empty() {
        return Err(Error::Empty("ratio grid"));
    }
    let roles = spec.roles();
    let k = roles.len();
    let total = draws.total_draws();
    let used = cfg.max_draws.clamp(1, total);
    let col = |name: String| draws.index_of(&name).ok_or(Error::Mismatch(format!("missing column {name}")));
    let mu: Vec<usize> = roles.iter().map(|r| col(format!("mu.{}", r.name()))).collect::<Result<_>>()?;
    let tau: Vec<usize> = roles.iter().map(|r| col(format!("tau.{}", r.name()))).collect::<Result<_>>()?;
    let delta: Vec<Option<usize>> = roles
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if cfg.group == Group::T && spec.offset_roles().contains(&i) {
                col(format!("delta_mu.{}", r.name())).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let first_individual = match meta.participant_ids.first() {
        Some(id) => col(format!("{}[{id}]", roles[0].name()))?,
        None => draws.dim(),
    };
    let members: Vec<usize> = meta
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| **g == cfg.group)
        .map(|(p, _)| p)
        .collect();

    let mut curves = vec![Vec::with_capacity(used); ratios.len()];
    let mut theta = vec![0.0; k];
    let mut w = vec![0.0; k];
    let mut omega = vec![0.0; k * k];
    for s in 0..used {
        let index = s * total / used;
        let row = &draws.values[index * draws.dim()..(index + 1) * draws.dim()];
        let mut sums = vec![0.0; ratios.len()];
        let count = match cfg.mode {
            PredictiveMode::Population => {
                for i in 0..k {
                    omega[i * k + i] = 1.0;
                    for j in 0..i {
                        let v = row[col(format!("omega.{}.{}", roles[i].name(), roles[j].name()))?];
                        omega[i * k + j] = v;
                        omega[j * k + i] = v;
                    }
                }
                let l = linalg::cholesky(&omega, k)?;
                let mut rng = stream(cfg.seed, &[domain::PREDICTIVE, index as u64]);
                for _ in 0..cfg.n_participants {
                    let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    linalg::lower_mul(&l, k, &z, &mut w);
                    for i in 0..k {
                        let mean = row[mu[i]] + delta[i].map_or(0.0, |d| row[d]);
                        theta[i] = (mean + row[tau[i]] * w[i]).exp();
                    }
                    for (acc, &r) in sums.iter_mut().zip(ratios) {
                        *acc += individual_prob(&spec, &theta, cfg.task, r, cfg.other_cents)?;
                    }
                }
                cfg.n_participants
            }
            PredictiveMode::Fitted => {
                for &p in &members {
                    let v = &row[first_individual + p * k..first_individual + (p + 1) * k];
                    for (acc, &r) in sums.iter_mut().zip(ratios) {
                        *acc += individual_prob(&spec, v, cfg.task, r, cfg.other_cents)?;
                    }
                }
                members.len()
            }
        };
        if count == 0 {
            return Err(Error::Empty("participants for the predictive curve"));
        }
        for (c, s) in curves.iter_mut().zip(sums) {
            c.push(s / count as f64);
        }
    }

    ratios
        .iter()
        .zip(curves)
        .map(|(&ratio, c)| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            // Too few draws for an interval: fall back to the range.
            let (hdi_low, hdi_high) = if c.len() >= 20 {
                hdi(&c, HDI_MASS)?
            } else {
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                (lo, c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            };
            Ok(PredictivePoint {
                ratio,
                mean,
                hdi_low,
                hdi_high,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_draws_have_zero_spread() {
        let chains = vec![vec![2.5; 50], vec![2.5; 50]];
        let row = summarize_chains("x", &chains).unwrap();
        assert_eq!(row.sd, 0.0);
        assert_eq!((row.hdi_low, row.hdi_high), (2.5, 2.5));
        assert_eq!(row.rhat, f64::INFINITY);
    }

    #[test]
    fn statements_on_plain_draws() {
        let values: Vec<f64> = (0..100).flat_map(|i| [i as f64 - 49.5, 1.0]).collect();
        let d = PosteriorDraws::new(vec!["x".into(), "one".into()], 1, 100, values).unwrap();
        assert_eq!(prob_statement(&d, "x > 0").unwrap(), 0.5);
        assert_eq!(prob_statement(&d, "one >= 1").unwrap(), 1.0);
        assert_eq!(prob_statement(&d, "x < one").unwrap(), 0.51);
        assert!(prob_statement(&d, "y > 0").is_err());
        assert!(prob_statement(&d, "x == 0").is_err());
    }
}
