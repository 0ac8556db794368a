use cognoise::io::{trial_rows, write_csv};
use cognoise::ExperimentDesign;

use crate::error::CliResult;
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {}

/// Writes `trials.csv`; the seed defaults to 0.
pub fn run(ctx: &Context, _args: Args) -> CliResult<()> {
    let design = ExperimentDesign::generate(ctx.seed.unwrap_or(0))?;
    let path = ctx.output("trials.csv")?;
    write_csv(&path, &trial_rows(&design))?;
    println!("wrote {}", path.display());
    Ok(())
}
