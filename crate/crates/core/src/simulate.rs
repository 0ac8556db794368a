//! Synthetic populations and choice datasets from the log-normal hierarchy.
//!
//! Individual log-parameters `(ln nu_so, ln nu_b, ln b, ln mu_r)` are drawn
//! as `mu_group + diag(tau) L z` with `L` the Cholesky factor of the shared
//! correlation matrix. Only the two noise means depend on the group.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{trial_key, Task, TrialSpec};
use crate::error::{Error, Result};
use crate::linalg::{check_correlation, cholesky, lower_mul};
use crate::model::{prob_a, prob_self, IndividualParams, NumberParams};
use crate::rng::{domain, stream};

/// Experimental condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// Baseline: amounts shown as plain numbers.
    B,
    /// Treatment: amounts shown as to-be-calculated sums.
    T,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::B => "B",
            Group::T => "T",
        }
    }
}

impl std::str::FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" | "b" | "baseline" => Ok(Group::B),
            "T" | "t" | "treatment" => Ok(Group::T),
            other => Err(Error::invalid(format!("unknown group {other:?}"))),
        }
    }
}

/// Population-level parameters on the log scale.
///
/// `mu` is ordered `(nu_so B, nu_so T, nu_b B, nu_b T, b, mu_r)`; `tau` and
/// the rows of `omega` are ordered `(nu_so, nu_b, b, mu_r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub mu: [f64; 6],
    pub tau: [f64; 4],
    pub omega: [[f64; 4]; 4],
}

impl HyperParams {
    /// Hierarchy without correlations.
    pub fn independent(mu: [f64; 6], tau: [f64; 4]) -> Self {
        let mut omega = [[0.0; 4]; 4];
        for (i, row) in omega.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { mu, tau, omega }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("hyper means must be finite"));
        }
        if self.tau.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::invalid("tau must be positive"));
        }
        check_correlation(&self.omega_flat(), 4)?;
        Ok(())
    }

    pub fn omega_flat(&self) -> Vec<f64> {
        self.omega.iter().flatten().copied().collect()
    }

    /// Log-scale mean vector `(nu_so, nu_b, b, mu_r)` of a group.
    pub fn group_mean(&self, group: Group) -> [f64; 4] {
        let m = &self.mu;
        match group {
            Group::B => [m[0], m[2], m[4], m[5]],
            Group::T => [m[1], m[3], m[4], m[5]],
        }
    }

    /// Lower Cholesky factor of `omega`; fails unless positive definite.
    pub fn omega_cholesky(&self) -> Result<Vec<f64>> {
        self.validate()?;
        cholesky(&self.omega_flat(), 4)
    }
}

fn draw_one<R: Rng + ?Sized>(hyper: &HyperParams, chol: &[f64], group: Group, rng: &mut R) -> Result<IndividualParams> {
    let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let mut w = [0.0; 4];
    lower_mul(chol, 4, &z, &mut w);
    let mean = hyper.group_mean(group);
    let th: [f64; 4] = std::array::from_fn(|k| (mean[k] + hyper.tau[k] * w[k]).exp());
    IndividualParams::from_odds(th[2], th[0], th[1], th[3])
}

/// Draws `n` participants of one group.
pub fn draw_participants<R: Rng + ?Sized>(hyper: &HyperParams, n: usize, group: Group, rng: &mut R) -> Result<Vec<IndividualParams>> {
    if n == 0 {
        return Err(Error::invalid("need at least one participant"));
    }
    let chol = hyper.omega_cholesky()?;
    (0..n).map(|_| draw_one(hyper, &chol, group, rng)).collect()
}

/// A participant with the parameters that generated their data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: u32,
    pub group: Group,
    pub params: IndividualParams,
}

impl Participant {
    /// Number-task parameters sharing this participant's payment noise and
    /// prior mean.
    pub fn number_params(&self) -> Result<NumberParams> {
        NumberParams::new(self.params.nu_so(), self.params.mu_r())
    }
}

/// One binary decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub participant_id: u32,
    pub group: Group,
    pub task: Task,
    pub game_id: u32,
    pub repetition: u32,
    pub round: u32,
    pub self_cents: u32,
    pub other_cents: u32,
    /// 1 if `self` (or `A`) was chosen.
    pub choice: u8,
}

/// Per-trial Bernoulli choices of one participant.
///
/// Each trial draws its uniform from its own keyed stream; `self` is chosen
/// iff `u < p`.
pub fn simulate_choices(participant: &Participant, trials: &[TrialSpec], seed: u64) -> Result<Vec<ChoiceRecord>> {
    let number = participant.number_params()?;
    trials
        .iter()
        .map(|t| {
            let (x, y) = t.amounts();
            let p = match t.task {
                Task::Altruism => prob_self(&participant.params, x, y)?,
                Task::Number => prob_a(&number, x, y)?,
            };
            let mut rng = stream(seed, &[domain::CHOICE, participant.id as u64, trial_key(t)]);
            let u: f64 = rng.random();
            Ok(ChoiceRecord {
                participant_id: participant.id,
                group: participant.group,
                task: t.task,
                game_id: t.game_id,
                repetition: t.repetition,
                round: t.round,
                self_cents: t.self_cents,
                other_cents: t.other_cents,
                choice: u8::from(u < p),
            })
        })
        .collect()
}

/// Choice records of a whole study.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDataset {
    pub records: Vec<ChoiceRecord>,
}

impl ChoiceDataset {
    pub fn new(records: Vec<ChoiceRecord>) -> Result<Self> {
        let ds = Self { records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut groups = std::collections::HashMap::new();
        for (index, r) in self.records.iter().enumerate() {
            if r.choice > 1 {
                return Err(Error::Data {
                    index,
                    reason: format!("choice must be 0 or 1, got {}", r.choice),
                });
            }
            if r.other_cents == 0 {
                return Err(Error::Data {
                    index,
                    reason: "other amount must be positive".into(),
                });
            }
            if r.task == Task::Number && r.self_cents == 0 {
                return Err(Error::Data {
                    index,
                    reason: "number-task amount A must be positive".into(),
                });
            }
            if let Some(g) = groups.insert(r.participant_id, r.group) {
                if g != r.group {
                    return Err(Error::Data {
                        index,
                        reason: format!("participant {} appears in both groups", r.participant_id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sorted participant ids.
    pub fn participant_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.participant_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn filter_task(&self, task: Task) -> ChoiceDataset {
        ChoiceDataset {
            records: self.records.iter().filter(|r| r.task == task).copied().collect(),
        }
    }

    /// Fraction of `self` choices among the records of a group and task.
    pub fn choice_rate(&self, group: Group, task: Task) -> Option<f64> {
        let (n, k) = self
            .records
            .iter()
            .filter(|r| r.group == group && r.task == task)
            .fold((0usize, 0usize), |(n, k), r| (n + 1, k + r.choice as usize));
        (n > 0).then(|| k as f64 / n as f64)
    }
}

/// Generating parameters of a simulated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub hyper: HyperParams,
    pub participants: Vec<Participant>,
}

/// Draws `n_baseline + n_treatment` participants and simulates every trial
/// for each. Participants `0..n_baseline` are baseline, the rest treatment.
pub fn simulate_dataset(
    hyper: &HyperParams,
    trials: &[TrialSpec],
    n_baseline: usize,
    n_treatment: usize,
    seed: u64,
) -> Result<(ChoiceDataset, Truth)> {
    if n_baseline == 0 || n_treatment == 0 {
        return Err(Error::invalid("each group needs at least one participant"));
    }
    if trials.is_empty() {
        return Err(Error::Empty("trial list"));
    }
    let chol = hyper.omega_cholesky()?;
    let n = n_baseline + n_treatment;
    let participants: Vec<Participant> = (0..n)
        .into_par_iter()
        .map(|i| {
            let group = if i < n_baseline { Group::B } else { Group::T };
            let mut rng = stream(seed, &[domain::PARTICIPANT, i as u64]);
            let params = draw_one(hyper, &chol, group, &mut rng)?;
            Ok(Participant {
                id: i as u32,
                group,
                params,
            })
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<ChoiceRecord> = participants
        .par_iter()
        .map(|p| simulate_choices(p, trials, seed))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    records.sort_by_key(|r| (r.participant_id, r.task, r.round));
    Ok((
        ChoiceDataset { records },
        Truth {
            seed,
            hyper: hyper.clone(),
            participants,
        },
    ))
}

/// A homogeneous population: every participant shares `params`.
pub fn simulate_homogeneous(
    params: &IndividualParams,
    group: Group,
    n: usize,
    trials: &[TrialSpec],
    seed: u64,
) -> Result<ChoiceDataset> {
    let mut records = Vec::with_capacity(n * trials.len());
    for id in 0..n as u32 {
        let p = Participant {
            id,
            group,
            params: *params,
        };
        records.extend(simulate_choices(&p, trials, seed)?);
    }
    Ok(ChoiceDataset { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{altruism_grid, expand_and_shuffle};
    use crate::rng::stream;

    fn hyper() -> HyperParams {
        let mut h = HyperParams::independent([-1.2, -0.9, -1.6, -1.6, -0.8, 0.05], [0.3, 0.3, 0.2, 0.3]);
        h.omega[0][1] = 0.5;
        h.omega[1][0] = 0.5;
        h
    }

    #[test]
    fn tiny_tau_gives_identical_participants() {
        let h = HyperParams::independent([-1.0, -1.0, -1.5, -1.5, -0.5, 0.2], [1e-12; 4]);
        let ps = draw_participants(&h, 5, Group::B, &mut stream(1, &[])).unwrap();
        for p in &ps {
            assert!((p.nu_so() - (-1.0_f64).exp()).abs() < 1e-10);
            assert!((p.odds() - (-0.5_f64).exp()).abs() < 1e-10);
            assert!((p.mu_r() - 0.2_f64.exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_pd_omega() {
        let mut h = hyper();
        h.omega[0][2] = 0.99;
        h.omega[2][0] = 0.99;
        h.omega[1][2] = -0.99;
        h.omega[2][1] = -0.99;
        assert!(draw_participants(&h, 3, Group::B, &mut stream(1, &[])).is_err());
    }

    #[test]
    fn odds_mean_matches_lognormal_mean() {
        let mut h = hyper();
        h.mu[4] = -0.795;
        h.tau[2] = 0.206;
        let ps = draw_participants(&h, 100_000, Group::B, &mut stream(9, &[])).unwrap();
        let mean = ps.iter().map(|p| p.odds()).sum::<f64>() / ps.len() as f64;
        let expect = (-0.795_f64 + 0.206 * 0.206 / 2.0).exp();
        assert!((expect - 0.4613).abs() < 1e-4);
        assert!((mean - expect).abs() < 0.003, "{mean}");
    }

    #[test]
    fn empirical_log_covariance_matches() {
        let h = hyper();
        let ps = draw_participants(&h, 100_000, Group::T, &mut stream(2, &[])).unwrap();
        let logs: Vec<[f64; 4]> = ps
            .iter()
            .map(|p| [p.nu_so().ln(), p.nu_b().ln(), p.odds().ln(), p.mu_r().ln()])
            .collect();
        let n = logs.len() as f64;
        let mean: Vec<f64> = (0..4).map(|k| logs.iter().map(|x| x[k]).sum::<f64>() / n).collect();
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let c = logs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0);
                let s = h.tau[i] * h.omega[i][j] * h.tau[j];
                diff2 += (c - s).powi(2);
                norm2 += s * s;
            }
        }
        assert!((diff2 / norm2).sqrt() < 0.02);
        let gm = h.group_mean(Group::T);
        for k in 0..4 {
            assert!((mean[k] - gm[k]).abs() < 4.0 * h.tau[k] / n.sqrt());
        }
    }

    #[test]
    fn forced_choices() {
        let p = Participant {
            id: 0,
            group: Group::B,
            params: IndividualParams::new(0.01, 0.05, 0.05, 1.0).unwrap(),
        };
        let trials: Vec<TrialSpec> = (0..50)
            .map(|i| TrialSpec {
                task: Task::Altruism,
                game_id: 0,
                repetition: i,
                self_cents: 100_000,
                other_cents: 1,
                round: i,
            })
            .collect();
        assert!(simulate_choices(&p, &trials, 3).unwrap().iter().all(|r| r.choice == 1));
    }

    #[test]
    fn symmetric_case_rate() {
        let params = IndividualParams::new(0.5, 0.3, 0.3, 1.0).unwrap();
        let trials: Vec<TrialSpec> = (0..100)
            .map(|i| TrialSpec {
                task: Task::Altruism,
                game_id: 0,
                repetition: i,
                self_cents: 700,
                other_cents: 700,
                round: i,
            })
            .collect();
        let ds = simulate_homogeneous(&params, Group::B, 100, &trials, 5).unwrap();
        let rate = ds.choice_rate(Group::B, Task::Altruism).unwrap();
        let sd = (0.25_f64 / 1e4).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * sd, "{rate}");
    }

    #[test]
    fn dataset_shapes_and_determinism() {
        let trials = expand_and_shuffle(&altruism_grid(), 5, 1);
        let (ds, truth) = simulate_dataset(&hyper(), &trials[..1], 1, 1, 3).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(truth.participants.len(), 2);
        let (a, _) = simulate_dataset(&hyper(), &trials, 150, 150, 4).unwrap();
        assert_eq!(a.len(), 72_000);
        let (b, _) = simulate_dataset(&hyper(), &trials, 150, 150, 4).unwrap();
        assert_eq!(a, b);
        assert!(simulate_dataset(&hyper(), &trials, 0, 1, 4).is_err());
    }

    #[test]
    fn group_only_moves_noise_means() {
        let h = hyper();
        let (b, t) = (h.group_mean(Group::B), h.group_mean(Group::T));
        assert_eq!(b[2], t[2]);
        assert_eq!(b[3], t[3]);
        assert_ne!(b[0], t[0]);
    }
}
