use std::fmt::Write as _;
use std::path::PathBuf;

use cognoise::inference::{extract_correlations, prob_statement, summarize, with_derived, PosteriorDraws};

use super::fit::FitRecord;
use super::DRAWS_FILE;
use crate::config::require_file;
use crate::error::{CliError, CliResult};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Fit output directory.
    #[arg(long)]
    fit: PathBuf,
    /// Extra statements such as `"mu_r.pop_mean < 1"`; repeatable.
    #[arg(long = "prob")]
    probs: Vec<String>,
    /// Leave out the default statements.
    #[arg(long)]
    no_default_probs: bool,
}

/// Default statements with their labels: payment noise higher under
/// treatment, payment prior mean below one, higher treatment threshold.
const DEFAULTS: [(&str, &str); 3] = [
    ("P(nu_so,T > nu_so,B)", "nu_so.T.pop_mean > nu_so.B.pop_mean"),
    ("P(mu_r < 1)", "mu_r.pop_mean < 1"),
    ("P(delta_T > delta_B)", "delta.T > delta.B"),
];

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}")
    } else {
        format!("{x}")
    }
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    let rec = FitRecord::load(&a.fit)?;
    let draws_path = a.fit.join(DRAWS_FILE);
    require_file(&draws_path, "draws file")?;
    let draws = with_derived(&PosteriorDraws::read(&draws_path)?)?;
    let meta = draws.meta.clone().ok_or_else(|| CliError::data("draws file carries no metadata"))?;

    let mut statements: Vec<(String, String)> = Vec::new();
    if !a.no_default_probs {
        for (label, stmt) in DEFAULTS {
            let applies = stmt.split_whitespace().step_by(2).all(|op| op.parse::<f64>().is_ok() || draws.index_of(op).is_some());
            if applies {
                statements.push((label.to_string(), stmt.to_string()));
            }
        }
    }
    statements.extend(a.probs.iter().map(|s| (format!("P({s})"), s.clone())));

    let mut md = String::new();
    writeln!(md, "# Posterior summary: {}\n", rec.model).unwrap();
    writeln!(
        md,
        "{} records from {} participants; {} chains x {} draws after {} warmup iterations (seed {}).",
        rec.records, rec.participants, meta.config.chains, meta.config.draws, meta.config.warmup, meta.config.seed
    )
    .unwrap();
    writeln!(md, "Post-warmup divergence rate: {:.2}%.\n", 100.0 * meta.divergence_rate).unwrap();
    for w in &meta.warnings {
        writeln!(md, "> Warning: {w}\n").unwrap();
    }

    writeln!(md, "## Population parameters\n").unwrap();
    writeln!(md, "| parameter | mean | median | sd | hdi 2.5% | hdi 97.5% | R-hat | ESS |").unwrap();
    writeln!(md, "|---|---:|---:|---:|---:|---:|---:|---:|").unwrap();
    for r in summarize(&draws)?.iter().filter(|r| !r.parameter.ends_with(']')) {
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {:.0} |",
            r.parameter,
            num(r.mean),
            num(r.median),
            num(r.sd),
            num(r.hdi_low),
            num(r.hdi_high),
            num(r.rhat),
            r.ess_bulk
        )
        .unwrap();
    }

    if !statements.is_empty() {
        writeln!(md, "\n## Posterior probabilities\n").unwrap();
        writeln!(md, "| statement | definition | probability |").unwrap();
        writeln!(md, "|---|---|---:|").unwrap();
        for (label, stmt) in &statements {
            let p = prob_statement(&draws, stmt).map_err(|e| CliError::config(e.to_string()))?;
            writeln!(md, "| {label} | `{stmt}` | {p:.3} |").unwrap();
        }
    }

    let corr = extract_correlations(&draws)?;
    let off: Vec<_> = corr.iter().filter(|c| c.row < c.col).collect();
    if !off.is_empty() {
        writeln!(md, "\n## Correlations of individual parameters\n").unwrap();
        writeln!(md, "| pair | mean | median | hdi 2.5% | hdi 97.5% |").unwrap();
        writeln!(md, "|---|---:|---:|---:|---:|").unwrap();
        for c in off {
            writeln!(
                md,
                "| {} / {} | {} | {} | {} | {} |",
                c.row,
                c.col,
                num(c.mean),
                num(c.median),
                num(c.hdi_low),
                num(c.hdi_high)
            )
            .unwrap();
        }
    }

    let path = ctx.output("report.md")?;
    std::fs::write(&path, md).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}
