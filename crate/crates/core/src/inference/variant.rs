//! Model variants and the layout of their unconstrained parameter vector.

use serde::{Deserialize, Serialize};

use crate::design::Task;
use crate::error::{Error, Result};

/// Individual-level parameter, estimated on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Payment (or magnitude) signal noise.
    NuSo,
    /// Preference signal noise.
    NuB,
    /// Preference odds `beta / (1 - beta)`.
    Odds,
    /// Prior mean of the payment ratio.
    MuR,
    /// Logistic sensitivity of the random-utility benchmark.
    Sensitivity,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::NuSo => "nu_so",
            Role::NuB => "nu_b",
            Role::Odds => "b",
            Role::MuR => "mu_r",
            Role::Sensitivity => "sigma_ru",
        }
    }

    /// Whether the population mean differs between groups.
    pub fn is_noise(self) -> bool {
        matches!(self, Role::NuSo | Role::NuB | Role::Sensitivity)
    }

    /// Location and scale of the normal prior on the log-scale base mean.
    pub fn mean_prior(self) -> (f64, f64) {
        match self {
            // Logistic sensitivity lives on the euro scale, far from the
            // probit priors' region.
            Role::Sensitivity => (0.0, 1.0),
            _ => (MEAN_PRIOR_LOC, MEAN_PRIOR_SCALE),
        }
    }
}

pub const MEAN_PRIOR_LOC: f64 = -0.5;
pub const MEAN_PRIOR_SCALE: f64 = 0.25;
pub const DIFF_PRIOR_SCALE: f64 = 0.25;
pub const TAU_PRIOR_SCALE: f64 = 0.25;
pub const LKJ_ETA: f64 = 2.0;

/// The estimable model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    AltruismFull,
    /// Payment prior mean pinned to 1.
    AltruismMu1,
    /// Preference noise pinned to 0.
    AltruismNub0,
    /// Payment noise pinned to 0.
    AltruismNuso0,
    RandomUtility,
    NumberMain,
    /// Magnitude prior mean pinned to 1.
    NumberMu1,
    /// Both tasks with a joint payment/magnitude noise.
    CombinedFull,
    CombinedNub0,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::AltruismFull,
        Variant::AltruismMu1,
        Variant::AltruismNub0,
        Variant::AltruismNuso0,
        Variant::RandomUtility,
        Variant::NumberMain,
        Variant::NumberMu1,
        Variant::CombinedFull,
        Variant::CombinedNub0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::AltruismFull => "altruism-full",
            Variant::AltruismMu1 => "altruism-mu1",
            Variant::AltruismNub0 => "altruism-nub0",
            Variant::AltruismNuso0 => "altruism-nuso0",
            Variant::RandomUtility => "random-utility",
            Variant::NumberMain => "number-main",
            Variant::NumberMu1 => "number-mu1",
            Variant::CombinedFull => "combined-full",
            Variant::CombinedNub0 => "combined-nub0",
        }
    }

    pub fn roles(self) -> &'static [Role] {
        use Role::*;
        match self {
            Variant::AltruismFull | Variant::CombinedFull => &[NuSo, NuB, Odds, MuR],
            Variant::AltruismMu1 => &[NuSo, NuB, Odds],
            Variant::AltruismNub0 | Variant::CombinedNub0 => &[NuSo, Odds, MuR],
            Variant::AltruismNuso0 => &[NuB, Odds],
            Variant::RandomUtility => &[Sensitivity, Odds],
            Variant::NumberMain => &[NuSo, MuR],
            Variant::NumberMu1 => &[NuSo],
        }
    }

    pub fn accepts(self, task: Task) -> bool {
        match self {
            Variant::NumberMain | Variant::NumberMu1 => task == Task::Number,
            Variant::CombinedFull | Variant::CombinedNub0 => true,
            _ => task == Task::Altruism,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model variant {s:?}")))
    }
}

/// A variant plus structural options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Let noise means differ between baseline and treatment.
    pub group_specific_noise: bool,
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            group_specific_noise: true,
        }
    }

    pub fn roles(&self) -> &'static [Role] {
        self.variant.roles()
    }

    pub fn k(&self) -> usize {
        self.roles().len()
    }

    pub fn role_index(&self, role: Role) -> Option<usize> {
        self.roles().iter().position(|&r| r == role)
    }

    /// Roles with a treatment offset on their mean.
    pub fn offset_roles(&self) -> Vec<usize> {
        if !self.group_specific_noise {
            return Vec::new();
        }
        self.roles()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_noise())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn layout(&self, n_participants: usize) -> Layout {
        Layout::new(self, n_participants)
    }
}

/// Offsets into the unconstrained vector:
/// `[base means | treatment offsets | log tau | correlation coords | z]`,
/// where `z` holds `k` standard-normal innovations per participant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub k: usize,
    pub n_participants: usize,
    pub offset_roles: Vec<usize>,
    pub base: usize,
    pub diff: usize,
    pub log_tau: usize,
    pub corr: usize,
    pub z: usize,
    pub dim: usize,
}

impl Layout {
    fn new(spec: &ModelSpec, n: usize) -> Self {
        let k = spec.k();
        let offset_roles = spec.offset_roles();
        let base = 0;
        let diff = base + k;
        let log_tau = diff + offset_roles.len();
        let corr = log_tau + k;
        let z = corr + k * (k - 1) / 2;
        let dim = z + n * k;
        Self {
            k,
            n_participants: n,
            offset_roles,
            base,
            diff,
            log_tau,
            corr,
            z,
            dim,
        }
    }

    pub fn n_corr(&self) -> usize {
        self.k * (self.k - 1) / 2
    }

    /// Number of population-level coordinates (everything before `z`).
    pub fn n_hyper(&self) -> usize {
        self.z
    }

    /// Human-readable names of the unconstrained coordinates.
    pub fn coordinate_names(&self, spec: &ModelSpec) -> Vec<String> {
        let roles = spec.roles();
        let mut out = Vec::with_capacity(self.dim);
        out.extend(roles.iter().map(|r| format!("mu.{}", r.name())));
        out.extend(self.offset_roles.iter().map(|&i| format!("delta_mu.{}", roles[i].name())));
        out.extend(roles.iter().map(|r| format!("log_tau.{}", r.name())));
        for i in 1..self.k {
            for j in 0..i {
                out.push(format!("cpc.{}.{}", roles[i].name(), roles[j].name()));
            }
        }
        for p in 0..self.n_participants {
            out.extend(roles.iter().map(|r| format!("z.{}[{p}]", r.name())));
        }
        out
    }
}
