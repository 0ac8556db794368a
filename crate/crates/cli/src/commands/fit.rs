use std::path::{Path, PathBuf};

use cognoise::inference::{
    sample_posterior, summarize, ChainMeta, ModelSpec, Posterior, SamplerConfig, SummaryRow, Variant,
    DIVERGENCE_WARN_RATE,
};
use cognoise::io::{read_choices, read_json, write_csv, write_json};
use cognoise::ChoiceDataset;
use serde::{Deserialize, Serialize};

use super::{DRAWS_FILE, FIT_FILE, SUMMARY_FILE};
use crate::config::{require_dir, require_file, SamplerSettings};
use crate::error::{CliError, CliResult};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// A `choices.csv` file.
    #[arg(long)]
    data: PathBuf,
    /// Model variant, e.g. `altruism-full` or `random-utility`.
    #[arg(long)]
    model: Option<Variant>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    target_accept: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
}

/// `fit.json`: what was fitted to which data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub model: Variant,
    /// Canonical path of the choices file.
    pub data: PathBuf,
    pub records: usize,
    pub participants: usize,
    pub sampler: SamplerConfig,
}

impl FitRecord {
    pub fn load(dir: &Path) -> CliResult<Self> {
        require_dir(dir, "fit directory")?;
        let path = dir.join(FIT_FILE);
        require_file(&path, "fit record")?;
        Ok(read_json(&path)?)
    }
}

#[derive(Debug, Serialize)]
struct Extremum {
    parameter: String,
    value: f64,
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    divergence_rate: f64,
    warnings: Vec<String>,
    /// Largest R-hat over population-level rows.
    max_rhat: Option<Extremum>,
    /// Smallest bulk ESS over population-level rows.
    min_ess_bulk: Option<Extremum>,
    chains: Vec<ChainMeta>,
}

/// The records of `data` that `variant` models.
pub fn model_data(data: &ChoiceDataset, variant: Variant) -> CliResult<ChoiceDataset> {
    let records = data.records.iter().filter(|r| variant.accepts(r.task)).copied().collect::<Vec<_>>();
    if records.is_empty() {
        return Err(CliError::data(format!("the data hold no records that {variant} models")));
    }
    Ok(ChoiceDataset::new(records)?)
}

fn extremum(rows: &[SummaryRow], key: impl Fn(&SummaryRow) -> f64, max: bool) -> Option<Extremum> {
    rows.iter()
        .filter(|r| !r.parameter.ends_with(']') && key(r).is_finite())
        .max_by(|a, b| {
            let o = key(a).total_cmp(&key(b));
            if max { o } else { o.reverse() }
        })
        .map(|r| Extremum {
            parameter: r.parameter.clone(),
            value: key(r),
        })
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let cfg = &ctx.config;
    let seed = ctx.require_seed("fit")?;
    require_file(&a.data, "data file")?;
    let variant = a.model.or(cfg.model).unwrap_or(Variant::AltruismFull);
    let flags = SamplerSettings {
        chains: a.chains,
        warmup: a.warmup,
        draws: a.draws,
        target_accept: a.target_accept,
        max_depth: a.max_depth,
        init_radius: None,
    };
    let sampler = cfg.sampler.merged(&flags).build(seed)?;
    let data_path = a
        .data
        .canonicalize()
        .map_err(|e| CliError::data(format!("{}: {e}", a.data.display())))?;

    let data = model_data(&read_choices(&data_path)?, variant)?;
    let post = Posterior::new(ModelSpec::new(variant), &data)?;
    let draws = sample_posterior(&post, &sampler)?;
    draws.write(&ctx.output(DRAWS_FILE)?)?;
    let rows = summarize(&draws)?;
    write_csv(&ctx.output(SUMMARY_FILE)?, &rows)?;
    let meta = draws.meta.clone().expect("sampler attaches metadata");
    write_json(
        &ctx.output("diagnostics.json")?,
        &Diagnostics {
            divergence_rate: meta.divergence_rate,
            warnings: meta.warnings.clone(),
            max_rhat: extremum(&rows, |r| r.rhat, true),
            min_ess_bulk: extremum(&rows, |r| r.ess_bulk, false),
            chains: meta.chains.clone(),
        },
    )?;
    write_json(
        &ctx.output(FIT_FILE)?,
        &FitRecord {
            model: variant,
            data: data_path,
            records: post.n_records(),
            participants: post.participant_ids().len(),
            sampler,
        },
    )?;
    for w in &meta.warnings {
        eprintln!("warning: {w}");
    }
    println!("fitted {variant} to {} records; outputs in {}", post.n_records(), ctx.out.display());
    if meta.divergence_rate > DIVERGENCE_WARN_RATE {
        return Err(CliError::sampler(format!(
            "{:.1}% of post-warmup transitions diverged",
            100.0 * meta.divergence_rate
        )));
    }
    Ok(())
}
