use std::path::{Path, PathBuf};

use cognoise::io::{read_csv, read_json, write_choices, write_json, TrialRow};
use cognoise::simulate::simulate_dataset;
use cognoise::{ExperimentDesign, Group, HyperParams, TrialSpec};

use crate::config::{require_file, TaskSelection};
use crate::error::{CliError, CliResult};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON `HyperParams` file; defaults to values near the published fit.
    #[arg(long)]
    hyper: Option<PathBuf>,
    /// Simulate on this `trials.csv` instead of generating a design.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<TaskSelection>,
    /// Keep only the first `rounds` presentation rounds of each task.
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    n_baseline: Option<usize>,
    #[arg(long)]
    n_treatment: Option<usize>,
}

/// Log-scale hyperparameters near the published altruism estimates.
pub fn default_hyper() -> HyperParams {
    let mut h = HyperParams::independent(
        [0.31f64.ln(), 0.40f64.ln(), 0.19f64.ln(), 0.19f64.ln(), -0.80, 1.05f64.ln()],
        [0.3, 0.3, 0.2, 0.3],
    );
    h.omega[0][1] = 0.5;
    h.omega[1][0] = 0.5;
    h
}

/// Baseline rows of a `trials.csv` as trial specs.
fn read_design(path: &Path) -> CliResult<Vec<TrialSpec>> {
    let rows: Vec<TrialRow> = read_csv(path)?;
    let trials: Vec<TrialSpec> = rows
        .iter()
        .filter(|r| r.group == Group::B)
        .map(|r| TrialSpec {
            task: r.task,
            game_id: r.game_id,
            repetition: r.repetition,
            self_cents: r.self_cents,
            other_cents: r.other_cents,
            round: r.round,
        })
        .collect();
    if trials.is_empty() {
        return Err(CliError::data(format!("{} has no baseline trials", path.display())));
    }
    Ok(trials)
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let cfg = &ctx.config;
    let seed = ctx.require_seed("simulate")?;
    let hyper_path = a.hyper.or_else(|| cfg.hyper.clone());
    let design_path = a.design.or_else(|| cfg.design.clone());
    for (p, what) in [(&hyper_path, "hyper file"), (&design_path, "design file")] {
        if let Some(p) = p {
            require_file(p, what)?;
        }
    }
    let task = a.task.or(cfg.task).unwrap_or(TaskSelection::Altruism);
    let rounds = a.rounds.or(cfg.rounds);
    let n_b = a.n_baseline.or(cfg.n_baseline).unwrap_or(40);
    let n_t = a.n_treatment.or(cfg.n_treatment).unwrap_or(40);

    let hyper: HyperParams = match &hyper_path {
        Some(p) => read_json(p).map_err(|e| CliError::config(e.to_string()))?,
        None => default_hyper(),
    };
    hyper.validate()?;
    let all = match &design_path {
        Some(p) => read_design(p)?,
        None => ExperimentDesign::generate(seed)?.trials.iter().map(|t| t.spec).collect(),
    };
    let trials: Vec<TrialSpec> = all
        .into_iter()
        .filter(|t| task.tasks().contains(&t.task) && rounds.is_none_or(|r| t.round < r))
        .collect();
    if trials.is_empty() {
        return Err(CliError::config("the task and round selection leaves no trials"));
    }

    let (data, truth) = simulate_dataset(&hyper, &trials, n_b, n_t, seed)?;
    let choices = ctx.output("choices.csv")?;
    write_choices(&choices, &data)?;
    write_json(&ctx.output("truth.json")?, &truth)?;
    println!("wrote {} records for {} participants to {}", data.len(), n_b + n_t, choices.display());
    Ok(())
}
