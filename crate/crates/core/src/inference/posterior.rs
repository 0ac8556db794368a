//! Log posterior of the hierarchical choice models and its gradient.
//!
//! Individual log-parameters are `theta_i = m_g + tau * (L z_i)` where `m_g`
//! is the base mean plus, for treatment participants, the offset on noise
//! roles. The likelihood gradient with respect to `theta_i` is accumulated
//! per participant from three running sums over records, then pushed
//! through the hierarchy by hand.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::dual::MAX_CORR;
use super::transform::{corr_cholesky, corr_cholesky_free, sample_lkj_cholesky, CorrCholesky};
use super::variant::{Layout, ModelSpec, Role, DIFF_PRIOR_SCALE, LKJ_ETA, TAU_PRIOR_SCALE};
use crate::design::Task;
use crate::error::{Error, Result};
use crate::linalg;
use crate::normal::{std_normal_cdf, std_normal_pdf};
use crate::simulate::{ChoiceDataset, Group};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn log_floor() -> f64 {
    PROB_FLOOR.ln()
}

fn log_ceil() -> f64 {
    (-PROB_FLOOR).ln_1p()
}

fn normal_lpdf(x: f64, loc: f64, scale: f64) -> f64 {
    let u = (x - loc) / scale;
    -0.5 * u * u - scale.ln() - LN_SQRT_2PI
}

#[derive(Debug, Clone, Copy)]
struct ProbitRec {
    ln_ratio: f64,
    y: bool,
    index: u32,
}

#[derive(Debug, Clone, Copy)]
struct LogitRec {
    self_eur: f64,
    other_eur: f64,
    y: bool,
    index: u32,
}

#[derive(Debug, Clone, Default)]
struct ParticipantData {
    altruism: Vec<ProbitRec>,
    number: Vec<ProbitRec>,
    logit: Vec<LogitRec>,
    /// Records whose probability is pinned at the clamp (`self = 0`).
    fixed: Vec<(u32, f64)>,
}

/// Positions of each role in a participant's parameter vector.
#[derive(Debug, Clone, Copy, Default)]
struct Slots {
    nu_so: Option<usize>,
    nu_b: Option<usize>,
    odds: Option<usize>,
    mu_r: Option<usize>,
    sens: Option<usize>,
}

/// Natural-scale parameters of one participant; absent roles take their
/// pinned values (`nu = 0`, `b = 1`, `mu_r = 1`).
#[derive(Debug, Clone, Copy)]
struct Natural {
    nu_so: f64,
    nu_b: f64,
    b: f64,
    ln_b: f64,
    ln_mu: f64,
    sens: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Sums {
    s0: f64,
    s1: f64,
    s2: f64,
}

/// Log posterior of one model variant on one dataset.
#[derive(Debug, Clone)]
pub struct Posterior {
    spec: ModelSpec,
    layout: Layout,
    slots: Slots,
    /// For each role, its slot in the treatment-offset block.
    offset_slot: Vec<Option<usize>>,
    ids: Vec<u32>,
    groups: Vec<Group>,
    parts: Vec<ParticipantData>,
    n_records: usize,
}

/// Population-level quantities shared by all participants.
struct Hierarchy {
    tau: Vec<f64>,
    corr: CorrCholesky,
}

impl Posterior {
    pub fn new(spec: ModelSpec, data: &ChoiceDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("choice dataset"));
        }
        data.validate()?;
        let ids = data.participant_ids();
        let pos: HashMap<u32, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut groups = vec![Group::B; ids.len()];
        let mut parts = vec![ParticipantData::default(); ids.len()];
        let logit = spec.variant.roles().contains(&Role::Sensitivity);

        for (index, r) in data.records.iter().enumerate() {
            if !spec.variant.accepts(r.task) {
                return Err(Error::Data {
                    index,
                    reason: format!("{} records cannot be scored by {}", r.task.as_str(), spec.variant),
                });
            }
            let p = pos[&r.participant_id];
            groups[p] = r.group;
            let part = &mut parts[p];
            let y = r.choice == 1;
            let idx = index as u32;
            if logit {
                part.logit.push(LogitRec {
                    self_eur: r.self_cents as f64 / 100.0,
                    other_eur: r.other_cents as f64 / 100.0,
                    y,
                    index: idx,
                });
            } else if r.self_cents == 0 {
                part.fixed.push((idx, if y { log_floor() } else { log_ceil() }));
            } else {
                let rec = ProbitRec {
                    ln_ratio: (r.self_cents as f64 / r.other_cents as f64).ln(),
                    y,
                    index: idx,
                };
                match r.task {
                    Task::Altruism => part.altruism.push(rec),
                    Task::Number => part.number.push(rec),
                }
            }
        }

        let layout = spec.layout(ids.len());
        let slots = Slots {
            nu_so: spec.role_index(Role::NuSo),
            nu_b: spec.role_index(Role::NuB),
            odds: spec.role_index(Role::Odds),
            mu_r: spec.role_index(Role::MuR),
            sens: spec.role_index(Role::Sensitivity),
        };
        let mut offset_slot = vec![None; layout.k];
        for (s, &k) in layout.offset_roles.iter().enumerate() {
            offset_slot[k] = Some(s);
        }
        Ok(Self {
            spec,
            layout,
            slots,
            offset_slot,
            ids,
            groups,
            parts,
            n_records: data.len(),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn participant_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    fn hierarchy(&self, x: &[f64]) -> Hierarchy {
        let l = &self.layout;
        Hierarchy {
            tau: x[l.log_tau..l.log_tau + l.k].iter().map(|v| v.exp()).collect(),
            corr: corr_cholesky(&x[l.corr..l.z], l.k, LKJ_ETA),
        }
    }

    /// Group mean of the log-parameters.
    fn group_mean(&self, x: &[f64], group: Group, out: &mut [f64]) {
        let l = &self.layout;
        for k in 0..l.k {
            out[k] = x[l.base + k];
            if group == Group::T {
                if let Some(s) = self.offset_slot[k] {
                    out[k] += x[l.diff + s];
                }
            }
        }
    }

    fn theta(&self, x: &[f64], h: &Hierarchy, p: usize, mean: &mut [f64], w: &mut [f64], theta: &mut [f64]) {
        let k = self.layout.k;
        let z = &x[self.layout.z + p * k..self.layout.z + (p + 1) * k];
        self.group_mean(x, self.groups[p], mean);
        linalg::lower_mul(&h.corr.l, k, z, w);
        for j in 0..k {
            theta[j] = mean[j] + h.tau[j] * w[j];
        }
    }

    fn natural_from_theta(&self, theta: &[f64]) -> Natural {
        let s = self.slots;
        let get = |slot: Option<usize>, default: f64| slot.map_or(default, |i| theta[i].exp());
        Natural {
            nu_so: get(s.nu_so, 0.0),
            nu_b: get(s.nu_b, 0.0),
            b: get(s.odds, 1.0),
            ln_b: s.odds.map_or(0.0, |i| theta[i]),
            ln_mu: s.mu_r.map_or(0.0, |i| theta[i]),
            sens: get(s.sens, 1.0),
        }
    }

    fn natural_from_values(&self, v: &[f64]) -> Natural {
        let s = self.slots;
        let get = |slot: Option<usize>, default: f64| slot.map_or(default, |i| v[i]);
        let b = get(s.odds, 1.0);
        Natural {
            nu_so: get(s.nu_so, 0.0),
            nu_b: get(s.nu_b, 0.0),
            b,
            ln_b: b.ln(),
            ln_mu: get(s.mu_r, 1.0).ln(),
            sens: get(s.sens, 1.0),
        }
    }

    /// Log prior of an unconstrained position, Jacobians included.
    pub fn log_prior(&self, x: &[f64]) -> f64 {
        let l = &self.layout;
        let roles = self.spec.roles();
        let mut lp = 0.0;
        for (k, role) in roles.iter().enumerate() {
            let (loc, scale) = role.mean_prior();
            lp += normal_lpdf(x[l.base + k], loc, scale);
        }
        for s in 0..l.offset_roles.len() {
            lp += normal_lpdf(x[l.diff + s], 0.0, DIFF_PRIOR_SCALE);
        }
        for k in 0..l.k {
            let u = x[l.log_tau + k];
            lp += normal_lpdf(u.exp(), 0.0, TAU_PRIOR_SCALE) + LN_2 + u;
        }
        lp += corr_cholesky(&x[l.corr..l.z], l.k, LKJ_ETA).log_density;
        lp += x[l.z..].iter().map(|z| -0.5 * z * z - LN_SQRT_2PI).sum::<f64>();
        lp
    }

    /// Per-record log-likelihood in dataset order.
    pub fn log_likelihood_pointwise(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let h = self.hierarchy(x);
        let k = self.layout.k;
        let (mut mean, mut w, mut theta) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        let mut out = vec![0.0; self.n_records];
        for p in 0..self.parts.len() {
            self.theta(x, &h, p, &mut mean, &mut w, &mut theta);
            let nat = self.natural_from_theta(&theta);
            self.participant_loglik(p, &nat, None, Some(&mut out));
        }
        check_pointwise(&out)?;
        Ok(out)
    }

    /// Per-record log-likelihood from one row of constrained draws.
    pub fn pointwise_from_constrained(&self, row: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(row.len())?;
        if out.len() != self.n_records {
            return Err(Error::Mismatch(format!(
                "pointwise buffer holds {} values, data has {}",
                out.len(),
                self.n_records
            )));
        }
        let k = self.layout.k;
        for p in 0..self.parts.len() {
            let v = &row[self.layout.z + p * k..self.layout.z + (p + 1) * k];
            let nat = self.natural_from_values(v);
            self.participant_loglik(p, &nat, None, Some(out));
        }
        check_pointwise(out)
    }

    /// Log posterior and its gradient at an unconstrained position.
    pub fn log_posterior_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(grad.len())?;
        grad.fill(0.0);
        let l = &self.layout;
        let k = l.k;
        let roles = self.spec.roles();
        let h = self.hierarchy(x);
        let mut lp = 0.0;

        // Priors.
        for (j, role) in roles.iter().enumerate() {
            let (loc, scale) = role.mean_prior();
            let v = x[l.base + j];
            lp += normal_lpdf(v, loc, scale);
            grad[l.base + j] = -(v - loc) / (scale * scale);
        }
        for s in 0..l.offset_roles.len() {
            let v = x[l.diff + s];
            lp += normal_lpdf(v, 0.0, DIFF_PRIOR_SCALE);
            grad[l.diff + s] = -v / (DIFF_PRIOR_SCALE * DIFF_PRIOR_SCALE);
        }
        for j in 0..k {
            let (u, t) = (x[l.log_tau + j], h.tau[j]);
            lp += normal_lpdf(t, 0.0, TAU_PRIOR_SCALE) + LN_2 + u;
            grad[l.log_tau + j] = 1.0 - t * t / (TAU_PRIOR_SCALE * TAU_PRIOR_SCALE);
        }
        lp += h.corr.log_density;
        for m in 0..l.n_corr() {
            grad[l.corr + m] = h.corr.grad_log_density[m];
        }
        for (g, z) in grad[l.z..].iter_mut().zip(&x[l.z..]) {
            lp += -0.5 * z * z - LN_SQRT_2PI;
            *g = -z;
        }

        // Likelihood, back-propagated through the hierarchy.
        let (mut mean, mut w, mut theta, mut g_theta) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        let mut g_l = vec![0.0; k * k];
        let mut g_tau = vec![0.0; k];
        for p in 0..self.parts.len() {
            self.theta(x, &h, p, &mut mean, &mut w, &mut theta);
            let nat = self.natural_from_theta(&theta);
            g_theta.fill(0.0);
            lp += self.participant_loglik(p, &nat, Some(&mut g_theta), None);

            for j in 0..k {
                grad[l.base + j] += g_theta[j];
                if self.groups[p] == Group::T {
                    if let Some(s) = self.offset_slot[j] {
                        grad[l.diff + s] += g_theta[j];
                    }
                }
                g_tau[j] += g_theta[j] * w[j];
            }
            let zoff = l.z + p * k;
            for a in 0..k {
                let ta = h.tau[a] * g_theta[a];
                for b in 0..=a {
                    // d theta_a / d z_b = tau_a L_ab
                    grad[zoff + b] += ta * h.corr.l[a * k + b];
                    g_l[a * k + b] += ta * x[zoff + b];
                }
            }
        }
        for j in 0..k {
            grad[l.log_tau + j] += g_tau[j] * h.tau[j];
        }
        for m in 0..l.n_corr().min(MAX_CORR) {
            let mut s = 0.0;
            for (e, gl) in g_l.iter().enumerate() {
                s += gl * h.corr.dl[e][m];
            }
            grad[l.corr + m] += s;
        }

        if !lp.is_finite() {
            return Err(Error::NonFiniteLogLik(0));
        }
        if let Some(dim) = grad.iter().position(|g| !g.is_finite()) {
            let name = l.coordinate_names(&self.spec).swap_remove(dim);
            return Err(Error::NonFiniteGradient { dim, name });
        }
        Ok(lp)
    }

    /// Log-likelihood of one participant. With `grad`, adds the derivative
    /// with respect to each log-parameter; with `pointwise`, writes each
    /// record's contribution at its dataset index.
    fn participant_loglik(
        &self,
        p: usize,
        nat: &Natural,
        grad: Option<&mut [f64]>,
        mut pointwise: Option<&mut [f64]>,
    ) -> f64 {
        let part = &self.parts[p];
        let s = self.slots;
        let mut ll = 0.0;
        for &(i, v) in &part.fixed {
            ll += v;
            if let Some(out) = pointwise.as_deref_mut() {
                out[i as usize] = v;
            }
        }

        let alpha = 1.0 / (1.0 + nat.nu_so * nat.nu_so);
        let so2a2 = nat.nu_so * nat.nu_so * alpha * alpha;
        let d_alpha = -2.0 * alpha * (1.0 - alpha);
        let prior_shift = (1.0 - alpha) * nat.ln_mu;

        let mut alt = Sums::default();
        let mut num = Sums::default();
        let den_alt = (so2a2 + nat.nu_b * nat.nu_b).sqrt();
        let den_num = nat.nu_so * alpha;
        if !part.altruism.is_empty() {
            let (v, sums) = probit_block(&part.altruism, alpha, -nat.ln_b + prior_shift, den_alt, pointwise.as_deref_mut());
            ll += v;
            alt = sums;
        }
        if !part.number.is_empty() {
            let (v, sums) = probit_block(&part.number, alpha, LN_2 + prior_shift, den_num, pointwise.as_deref_mut());
            ll += v;
            num = sums;
        }
        let mut ru = (0.0, 0.0);
        if !part.logit.is_empty() {
            let (v, g_eta_eta, g_eta_total) = logit_block(&part.logit, nat, pointwise.as_deref_mut());
            ll += v;
            ru = (g_eta_eta, g_eta_total);
        }

        if let Some(g) = grad {
            if !part.altruism.is_empty() {
                let inv = 1.0 / den_alt;
                let inv2 = inv * inv;
                if let Some(i) = s.nu_so {
                    let e = so2a2 * (2.0 * alpha - 1.0) * inv2;
                    g[i] += d_alpha * (alt.s1 - nat.ln_mu * alt.s0) * inv - e * alt.s2;
                }
                if let Some(i) = s.nu_b {
                    g[i] -= nat.nu_b * nat.nu_b * inv2 * alt.s2;
                }
                if let Some(i) = s.odds {
                    g[i] -= alt.s0 * inv;
                }
                if let Some(i) = s.mu_r {
                    g[i] += (1.0 - alpha) * alt.s0 * inv;
                }
            }
            if !part.number.is_empty() {
                let inv = 1.0 / den_num;
                if let Some(i) = s.nu_so {
                    g[i] += d_alpha * (num.s1 - nat.ln_mu * num.s0) * inv - (2.0 * alpha - 1.0) * num.s2;
                }
                if let Some(i) = s.mu_r {
                    g[i] += (1.0 - alpha) * num.s0 * inv;
                }
            }
            if !part.logit.is_empty() {
                if let Some(i) = s.sens {
                    g[i] += ru.0;
                }
                if let Some(i) = s.odds {
                    let onep = 1.0 + nat.b;
                    g[i] -= nat.sens * nat.b / (onep * onep) * ru.1;
                }
            }
        }
        ll
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.layout.dim {
            return Err(Error::Mismatch(format!(
                "position has {n} coordinates, {} expects {}",
                self.spec.variant, self.layout.dim
            )));
        }
        Ok(())
    }

    /// Names of the constrained coordinates, aligned with [`Self::constrain`].
    pub fn constrained_names(&self) -> Vec<String> {
        constrained_names(&self.spec, &self.layout, &self.ids)
    }

    /// Maps an unconstrained position to natural-scale values:
    /// `[mu | delta_mu | tau | omega lower triangle | per-participant params]`.
    pub fn constrain(&self, x: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let k = l.k;
        let h = self.hierarchy(x);
        let mut out = Vec::with_capacity(l.dim);
        out.extend_from_slice(&x[..l.log_tau]);
        out.extend_from_slice(&h.tau);
        let omega = linalg::outer_lower(&h.corr.l, k);
        for i in 1..k {
            for j in 0..i {
                out.push(omega[i * k + j]);
            }
        }
        let (mut mean, mut w, mut theta) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for p in 0..self.parts.len() {
            self.theta(x, &h, p, &mut mean, &mut w, &mut theta);
            out.extend(theta.iter().map(|t| t.exp()));
        }
        out
    }

    /// Inverse of [`Self::constrain`].
    pub fn unconstrain(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(c.len())?;
        let l = &self.layout;
        let k = l.k;
        let mut x = Vec::with_capacity(l.dim);
        x.extend_from_slice(&c[..l.log_tau]);
        let tau = &c[l.log_tau..l.corr];
        if tau.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::invalid("scales must be positive"));
        }
        x.extend(tau.iter().map(|t| t.ln()));
        let mut omega = vec![0.0; k * k];
        let mut m = l.corr;
        for i in 0..k {
            omega[i * k + i] = 1.0;
            for j in 0..i {
                omega[i * k + j] = c[m];
                omega[j * k + i] = c[m];
                m += 1;
            }
        }
        let chol = linalg::cholesky(&omega, k)?;
        x.extend(corr_cholesky_free(&chol, k)?);
        let mut mean = vec![0.0; k];
        for p in 0..self.parts.len() {
            self.group_mean(c, self.groups[p], &mut mean);
            let v = &c[l.z + p * k..l.z + (p + 1) * k];
            // Forward substitution for L z = (ln v - mean) / tau.
            let mut z = vec![0.0; k];
            for a in 0..k {
                if !(v[a] > 0.0) {
                    return Err(Error::invalid("individual parameters must be positive"));
                }
                let mut r = (v[a].ln() - mean[a]) / tau[a];
                for b in 0..a {
                    r -= chol[a * k + b] * z[b];
                }
                z[a] = r / chol[a * k + a];
            }
            x.extend(z);
        }
        Ok(x)
    }

    /// An unconstrained position drawn from the prior.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let l = &self.layout;
        let mut x = Vec::with_capacity(l.dim);
        for role in self.spec.roles() {
            let (loc, scale) = role.mean_prior();
            x.push(Normal::new(loc, scale).expect("valid prior").sample(rng));
        }
        let diff = Normal::new(0.0, DIFF_PRIOR_SCALE).expect("valid prior");
        for _ in 0..l.offset_roles.len() {
            x.push(diff.sample(rng));
        }
        let tau = Normal::new(0.0, TAU_PRIOR_SCALE).expect("valid prior");
        for _ in 0..l.k {
            let t: f64 = tau.sample(rng);
            x.push(t.abs().max(f64::MIN_POSITIVE).ln());
        }
        let chol = sample_lkj_cholesky(l.k, LKJ_ETA, rng)?;
        x.extend(corr_cholesky_free(&chol, l.k)?);
        for _ in 0..l.n_participants * l.k {
            x.push(StandardNormal.sample(rng));
        }
        Ok(x)
    }
}

/// Names of the constrained coordinates of a fit.
pub fn constrained_names(spec: &ModelSpec, layout: &Layout, ids: &[u32]) -> Vec<String> {
    let roles = spec.roles();
    let mut out = Vec::with_capacity(layout.dim);
    out.extend(roles.iter().map(|r| format!("mu.{}", r.name())));
    out.extend(layout.offset_roles.iter().map(|&i| format!("delta_mu.{}", roles[i].name())));
    out.extend(roles.iter().map(|r| format!("tau.{}", r.name())));
    for i in 1..layout.k {
        for j in 0..i {
            out.push(format!("omega.{}.{}", roles[i].name(), roles[j].name()));
        }
    }
    for id in ids {
        out.extend(roles.iter().map(|r| format!("{}[{id}]", r.name())));
    }
    out
}

fn check_pointwise(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFiniteLogLik(i)),
        None => Ok(()),
    }
}

/// Probit records with `z = (alpha * ln r + c) / den`. Returns the
/// log-likelihood and the sums of `g`, `g ln r` and `g z` with
/// `g = d loglik / d z`; clamped records carry no gradient.
fn probit_block(recs: &[ProbitRec], alpha: f64, c: f64, den: f64, mut out: Option<&mut [f64]>) -> (f64, Sums) {
    let (lo, hi) = (log_floor(), log_ceil());
    let inv = 1.0 / den;
    let mut ll = 0.0;
    let mut s = Sums::default();
    for r in recs {
        let z = (alpha * r.ln_ratio + c) * inv;
        let sz = if r.y { z } else { -z };
        let p = std_normal_cdf(sz);
        let v = if p < PROB_FLOOR {
            lo
        } else if p > 1.0 - PROB_FLOOR {
            hi
        } else {
            let g = std_normal_pdf(z) / p;
            let g = if r.y { g } else { -g };
            s.s0 += g;
            s.s1 += g * r.ln_ratio;
            s.s2 += g * z;
            p.ln()
        };
        ll += v;
        if let Some(o) = out.as_deref_mut() {
            o[r.index as usize] = v;
        }
    }
    (ll, s)
}

/// Logistic records with `eta = sens * (self - b * other) / (1 + b)`.
/// Returns the log-likelihood, `sum (y - p) eta` and
/// `sum (y - p) (self + other)`.
fn logit_block(recs: &[LogitRec], nat: &Natural, mut out: Option<&mut [f64]>) -> (f64, f64, f64) {
    let (lo, hi) = (log_floor(), log_ceil());
    let scale = nat.sens / (1.0 + nat.b);
    let (mut ll, mut a, mut t) = (0.0, 0.0, 0.0);
    for r in recs {
        let eta = scale * (r.self_eur - nat.b * r.other_eur);
        let p = 1.0 / (1.0 + (-eta).exp());
        // ln p and ln (1 - p) without cancellation.
        let ln_p = -softplus(-eta);
        let ln_q = -softplus(eta);
        let (v, pc) = if r.y { (ln_p, p) } else { (ln_q, 1.0 - p) };
        let v = if pc < PROB_FLOOR {
            lo
        } else if pc > 1.0 - PROB_FLOOR {
            hi
        } else {
            let resid = if r.y { 1.0 - p } else { -p };
            a += resid * eta;
            t += resid * (r.self_eur + r.other_eur);
            v
        };
        ll += v;
        if let Some(o) = out.as_deref_mut() {
            o[r.index as usize] = v;
        }
    }
    (ll, a, t)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::variant::Variant;
    use crate::simulate::ChoiceRecord;

    fn record(pid: u32, group: Group, task: Task, s: u32, o: u32, choice: u8) -> ChoiceRecord {
        ChoiceRecord {
            participant_id: pid,
            group,
            task,
            game_id: 0,
            repetition: 0,
            round: 0,
            self_cents: s,
            other_cents: o,
            choice,
        }
    }

    #[test]
    fn rejects_foreign_task() {
        let ds = ChoiceDataset::new(vec![record(0, Group::B, Task::Number, 300, 655, 1)]).unwrap();
        let err = Posterior::new(ModelSpec::new(Variant::AltruismFull), &ds).unwrap_err();
        assert!(matches!(err, Error::Data { index: 0, .. }));
    }

    #[test]
    fn zero_data_gradient_on_z_is_minus_z() {
        // A participant whose only record is pinned at the clamp contributes
        // no likelihood gradient, leaving the standard-normal score.
        let ds = ChoiceDataset::new(vec![record(3, Group::T, Task::Altruism, 0, 655, 0)]).unwrap();
        let post = Posterior::new(ModelSpec::new(Variant::AltruismFull), &ds).unwrap();
        let x: Vec<f64> = (0..post.dim()).map(|i| 0.1 * i as f64 - 0.7).collect();
        let mut g = vec![0.0; post.dim()];
        post.log_posterior_and_grad(&x, &mut g).unwrap();
        let z0 = post.layout().z;
        for i in z0..post.dim() {
            assert_eq!(g[i], -x[i]);
        }
    }

    #[test]
    fn symmetric_records_score_ln_half() {
        // beta = 0.5 (b = 1) and self = other put every z at zero.
        let recs: Vec<_> = (0..10).map(|_| record(0, Group::B, Task::Altruism, 500, 500, 1)).collect();
        let ds = ChoiceDataset::new(recs).unwrap();
        let post = Posterior::new(ModelSpec::new(Variant::AltruismFull), &ds).unwrap();
        let k = post.layout().k;
        let mut c = vec![0.0; post.dim()];
        c[post.layout().log_tau..post.layout().corr].fill(0.5);
        c[post.layout().z..].copy_from_slice(&[0.3, 0.2, 1.0, 1.0][..k]);
        let x = post.unconstrain(&c).unwrap();
        let pw = post.log_likelihood_pointwise(&x).unwrap();
        let total: f64 = pw.iter().sum();
        assert!((total - 10.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constrain_round_trip() {
        let recs = vec![
            record(0, Group::B, Task::Altruism, 300, 655, 1),
            record(5, Group::T, Task::Altruism, 900, 926, 0),
        ];
        let ds = ChoiceDataset::new(recs).unwrap();
        let post = Posterior::new(ModelSpec::new(Variant::AltruismFull), &ds).unwrap();
        let x: Vec<f64> = (0..post.dim()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let back = post.unconstrain(&post.constrain(&x)).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(post.constrained_names()[post.layout().z + 4], "nu_so[5]");
    }
}
