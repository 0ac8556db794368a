//! Simulation and estimation toolkit for noisy-Bayesian models of binary
//! altruistic choice and number comparison.
//!
//! The crate covers stimulus design ([`design`]), pure choice probabilities
//! ([`model`]), synthetic populations ([`simulate`]), hierarchical MCMC
//! estimation ([`inference`]) and WAIC model comparison ([`compare`]).

pub mod compare;
pub mod design;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod model;
pub mod normal;
pub mod rng;
pub mod simulate;

pub use compare::{compare, waic, ComparisonRow, WaicAccumulator, WaicResult};
pub use design::{
    altruism_grid, decompose_sum, expand_and_shuffle, number_grid, practice_trials, shuffle_positions,
    DesignTrial, ExperimentDesign, Game, SumDecomposition, Task, TrialSpec,
};
pub use error::{Error, Result};
pub use model::{
    evidence_weight, indifference_ratio, mean_choice_over_grid, prior_threshold, prob_a, prob_self,
    prob_self_linear, prob_self_random_utility, ChoiceRule, IndividualParams, NumberParams,
    RandomUtilityParams,
};
pub use simulate::{ChoiceDataset, ChoiceRecord, Group, HyperParams};
