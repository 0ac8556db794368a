use std::path::PathBuf;

use cognoise::compare::waic_from_draws;
use cognoise::inference::{DrawsReader, ModelSpec, Posterior};
use cognoise::io::{read_choices, write_csv};
use cognoise::{compare, WaicResult};

use super::fit::{model_data, FitRecord};
use super::DRAWS_FILE;
use crate::config::require_file;
use crate::error::{CliError, CliResult};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Fit output directories, all fitted to the same choices file.
    #[arg(required = true, num_args = 2..)]
    fits: Vec<PathBuf>,
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let records: Vec<FitRecord> = a.fits.iter().map(|d| FitRecord::load(d)).collect::<CliResult<_>>()?;
    for d in &a.fits {
        require_file(&d.join(DRAWS_FILE), "draws file")?;
    }
    let data_path = &records[0].data;
    if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| &r.data != data_path) {
        return Err(CliError::data(format!(
            "{} was fitted to {}, not {}",
            a.fits[i].display(),
            r.data.display(),
            data_path.display()
        )));
    }
    require_file(data_path, "data file")?;
    let data = read_choices(data_path)?;

    let mut results: Vec<(String, WaicResult)> = Vec::with_capacity(records.len());
    for (dir, rec) in a.fits.iter().zip(&records) {
        let post = Posterior::new(ModelSpec::new(rec.model), &model_data(&data, rec.model)?)?;
        let mut reader = DrawsReader::open(&dir.join(DRAWS_FILE))?;
        let w = waic_from_draws(&mut reader, &post)?;
        results.push((rec.model.to_string(), w));
    }
    let table = compare(&results)?;
    let path = ctx.output("comparison.csv")?;
    write_csv(&path, &table)?;
    for r in &table {
        println!(
            "{:<16} elpd {:>12.2}  p_waic {:>8.2}  se {:>8.2}  d_elpd {:>9.2}  d_se {:>8.2}",
            r.model, r.elpd_waic, r.p_waic, r.se, r.d_elpd, r.d_se
        );
    }
    Ok(())
}
