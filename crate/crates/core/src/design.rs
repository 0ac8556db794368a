//! Stimulus generation for the altruism and number-comparison tasks.
//!
//! All amounts are integer cents. The altruism grid crosses four `other`
//! payments with the indifference `self` amounts of twelve altruism weights
//! `beta = k/20`, `k = 0..12`; each game is repeated five times.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, stream};

/// The four `other` payments, in cents.
pub const OTHER_AMOUNTS_CENTS: [u32; 4] = [655, 926, 1310, 1852];
/// `other` payment of the practice block.
pub const PRACTICE_OTHER_CENTS: u32 = 1000;
/// Number of altruism-weight steps `beta = k/20`.
pub const BETA_STEPS: u32 = 12;
pub const REPETITIONS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Altruism,
    Number,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Altruism => "altruism",
            Task::Number => "number",
        }
    }

    fn key(self) -> u64 {
        match self {
            Task::Altruism => 0,
            Task::Number => 1,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "altruism" => Ok(Task::Altruism),
            "number" => Ok(Task::Number),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

/// One unique `(self, other)` stimulus before repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Game {
    pub task: Task,
    pub game_id: u32,
    /// `self` for the altruism task, `A` for the number task.
    pub self_cents: u32,
    /// `other` for the altruism task, `B` for the number task.
    pub other_cents: u32,
}

/// A single presented trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSpec {
    pub task: Task,
    pub game_id: u32,
    pub repetition: u32,
    pub self_cents: u32,
    pub other_cents: u32,
    pub round: u32,
}

impl TrialSpec {
    pub fn amounts(&self) -> (f64, f64) {
        (self.self_cents as f64, self.other_cents as f64)
    }
}

/// Indifference `self` amount for `beta = k/20`, truncated to the cent.
fn indifference_cents(other: u32, k: u32) -> u32 {
    // other * (k/20) / (1 - k/20) = other * k / (20 - k), in exact integers.
    (other as u64 * k as u64 / (20 - k) as u64) as u32
}

fn grid_for(task: Task, other: u32, ks: impl Iterator<Item = u32>, start: u32) -> Vec<Game> {
    ks.enumerate()
        .map(|(i, k)| Game {
            task,
            game_id: start + i as u32,
            self_cents: indifference_cents(other, k),
            other_cents: other,
        })
        .collect()
}

/// The 48 unique altruism games.
pub fn altruism_grid() -> Vec<Game> {
    OTHER_AMOUNTS_CENTS
        .iter()
        .enumerate()
        .flat_map(|(j, &o)| grid_for(Task::Altruism, o, 0..BETA_STEPS, j as u32 * BETA_STEPS))
        .collect()
}

/// The 40 number-comparison games: the altruism grid without the `A = 0`
/// and `A > B` rows.
pub fn number_grid() -> Vec<Game> {
    let per = BETA_STEPS - 2;
    OTHER_AMOUNTS_CENTS
        .iter()
        .enumerate()
        .flat_map(|(j, &o)| grid_for(Task::Number, o, 1..BETA_STEPS - 1, j as u32 * per))
        .collect()
}

/// Practice block: `other` fixed at 10.00 and the twelve grid `self` values.
pub fn practice_trials() -> Vec<Game> {
    grid_for(Task::Altruism, PRACTICE_OTHER_CENTS, 0..BETA_STEPS, 0)
}

/// Repeats every game and shuffles the trials with a seeded Fisher-Yates
/// pass. Rounds are numbered in presentation order.
pub fn expand_and_shuffle(games: &[Game], repetitions: u32, seed: u64) -> Vec<TrialSpec> {
    let mut trials: Vec<TrialSpec> = games
        .iter()
        .flat_map(|g| {
            (0..repetitions).map(move |rep| TrialSpec {
                task: g.task,
                game_id: g.game_id,
                repetition: rep,
                self_cents: g.self_cents,
                other_cents: g.other_cents,
                round: 0,
            })
        })
        .collect();
    let task_key = games.first().map(|g| g.task.key()).unwrap_or(0);
    let mut rng = stream(seed, &[domain::SHUFFLE, task_key]);
    trials.shuffle(&mut rng);
    for (i, t) in trials.iter_mut().enumerate() {
        t.round = i as u32;
    }
    trials
}

/// Presentation order of the two addends within each sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct DisplayOrder {
    pub self_swapped: bool,
    pub other_swapped: bool,
}

/// Split of both payments into two addends each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SumDecomposition {
    pub self1: u32,
    pub self2: u32,
    pub other1: u32,
    pub other2: u32,
    pub display_order: DisplayOrder,
}

impl SumDecomposition {
    pub fn self_total(&self) -> u32 {
        self.self1 + self.self2
    }
    pub fn other_total(&self) -> u32 {
        self.other1 + self.other2
    }

    /// Addends in on-screen order: `([self left, self right], [other left, other right])`.
    pub fn displayed(&self) -> ([u32; 2], [u32; 2]) {
        let s = if self.display_order.self_swapped {
            [self.self2, self.self1]
        } else {
            [self.self1, self.self2]
        };
        let o = if self.display_order.other_swapped {
            [self.other2, self.other1]
        } else {
            [self.other1, self.other2]
        };
        (s, o)
    }

    /// Builds a decomposition from the two random draws, checking the
    /// ordering constraints.
    pub fn from_draws(self_cents: u32, other_cents: u32, self1: u32, other1: u32) -> Result<Self> {
        if other_cents == 0 {
            return Err(Error::invalid("other amount must be positive"));
        }
        if self1 > self_cents || other1 > other_cents {
            return Err(Error::invalid("addend exceeds its total"));
        }
        if self_cents > 0 && !(0 < other1 && other1 < self1 && self1 <= self_cents.min(other_cents)) {
            return Err(Error::invalid(format!(
                "draws self1={self1}, other1={other1} violate 0 < other1 < self1 <= min(self, other)"
            )));
        }
        if self_cents == 0 && self1 != 0 {
            return Err(Error::invalid("self1 must be zero when self is zero"));
        }
        Ok(Self {
            self1,
            self2: self_cents - self1,
            other1,
            other2: other_cents - other1,
            display_order: DisplayOrder::default(),
        })
    }
}

/// Random split of `self` and `other` such that `self1 > other1`.
///
/// `self1` is uniform on `1..=min(self, other)` (redrawn while it equals 1)
/// and `other1` uniform on `1..self1`. A zero `self` keeps both self addends
/// at zero and splits `other` uniformly.
pub fn decompose_sum<R: Rng + ?Sized>(self_cents: u32, other_cents: u32, rng: &mut R) -> Result<SumDecomposition> {
    if other_cents == 0 {
        return Err(Error::invalid("other amount must be positive"));
    }
    if self_cents == 0 {
        let other1 = if other_cents >= 2 {
            rng.random_range(1..other_cents)
        } else {
            0
        };
        return SumDecomposition::from_draws(0, other_cents, 0, other1);
    }
    let upper = self_cents.min(other_cents);
    if upper < 2 {
        return Err(Error::invalid(format!(
            "cannot split ({self_cents}, {other_cents}) with a strictly smaller other addend"
        )));
    }
    let self1 = loop {
        let s = rng.random_range(1..=upper);
        if s >= 2 {
            break s;
        }
    };
    let other1 = rng.random_range(1..self1);
    SumDecomposition::from_draws(self_cents, other_cents, self1, other1)
}

/// Per-participant display order for one trial's decomposition.
pub fn shuffle_positions(decomposition: &SumDecomposition, participant_seed: u64, trial_key: u64) -> SumDecomposition {
    let mut rng = stream(participant_seed, &[domain::DISPLAY, trial_key]);
    let mut out = *decomposition;
    out.display_order = DisplayOrder {
        self_swapped: rng.random(),
        other_swapped: rng.random(),
    };
    out
}

/// A trial together with its (treatment-only) sum decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignTrial {
    pub spec: TrialSpec,
    pub decomposition: SumDecomposition,
}

/// Full seeded design: 240 altruism and 200 number-comparison trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub seed: u64,
    pub trials: Vec<DesignTrial>,
}

impl ExperimentDesign {
    pub fn generate(seed: u64) -> Result<Self> {
        let mut trials = Vec::with_capacity(440);
        for games in [altruism_grid(), number_grid()] {
            for spec in expand_and_shuffle(&games, REPETITIONS, seed) {
                let key = [domain::DECOMPOSE, spec.task.key(), spec.game_id as u64, spec.repetition as u64];
                let mut rng = stream(seed, &key);
                let decomposition = decompose_sum(spec.self_cents, spec.other_cents, &mut rng)?;
                trials.push(DesignTrial { spec, decomposition });
            }
        }
        Ok(Self { seed, trials })
    }

    pub fn task_trials(&self, task: Task) -> Vec<TrialSpec> {
        self.trials.iter().filter(|t| t.spec.task == task).map(|t| t.spec).collect()
    }
}

/// Stable integer key of a trial, for keyed random streams.
pub fn trial_key(t: &TrialSpec) -> u64 {
    (t.task.key() << 40) | ((t.game_id as u64) << 20) | t.repetition as u64
}
