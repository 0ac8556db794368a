use std::collections::BTreeMap;
use std::path::PathBuf;

use cognoise::inference::{Role, SummaryRow};
use cognoise::io::{read_csv, read_json, write_csv, write_json};
use cognoise::simulate::Truth;
use serde::Serialize;

use super::fit::FitRecord;
use super::SUMMARY_FILE;
use crate::config::require_file;
use crate::error::{CliError, CliResult};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// The `truth.json` written by `simulate`.
    #[arg(long)]
    truth: PathBuf,
    /// Fit output directory.
    #[arg(long)]
    fit: PathBuf,
}

#[derive(Debug, Serialize)]
struct CoverageRow {
    quantity: String,
    truth: f64,
    mean: f64,
    hdi_low: f64,
    hdi_high: f64,
    covered: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    model: String,
    hyper_covered: usize,
    hyper_total: usize,
    /// Share of participants whose 95% HDI covers their true value, per role.
    individual_coverage: BTreeMap<String, f64>,
}

/// Index of a role in the truth's `tau` and `omega` ordering.
fn truth_slot(role: Role) -> Option<usize> {
    match role {
        Role::NuSo => Some(0),
        Role::NuB => Some(1),
        Role::Odds => Some(2),
        Role::MuR => Some(3),
        Role::Sensitivity => None,
    }
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    require_file(&a.truth, "truth file")?;
    let rec = FitRecord::load(&a.fit)?;
    let summary_path = a.fit.join(SUMMARY_FILE);
    require_file(&summary_path, "summary file")?;
    let truth: Truth = read_json(&a.truth)?;
    let rows: Vec<SummaryRow> = read_csv(&summary_path)?;
    let by_name: BTreeMap<&str, &SummaryRow> = rows.iter().map(|r| (r.parameter.as_str(), r)).collect();

    let spec = cognoise::inference::ModelSpec::new(rec.model);
    let roles = spec.roles();
    let h = &truth.hyper;
    // Population medians exp(mu) per role and group.
    let mut targets: Vec<(String, f64)> = Vec::new();
    for &role in roles {
        let Some(slot) = truth_slot(role) else { continue };
        let r = role.name();
        let grouped = by_name.contains_key(format!("{r}.T.pop_median").as_str());
        let (mu_b, mu_t) = match slot {
            0 => (h.mu[0], h.mu[1]),
            1 => (h.mu[2], h.mu[3]),
            2 => (h.mu[4], h.mu[4]),
            _ => (h.mu[5], h.mu[5]),
        };
        if grouped {
            targets.push((format!("{r}.B.pop_median"), mu_b.exp()));
            targets.push((format!("{r}.T.pop_median"), mu_t.exp()));
        } else if mu_b == mu_t {
            targets.push((format!("{r}.pop_median"), mu_b.exp()));
        }
        targets.push((format!("tau.{r}"), h.tau[slot]));
    }
    for (i, &ri) in roles.iter().enumerate() {
        for &rj in &roles[..i] {
            if let (Some(a), Some(b)) = (truth_slot(ri), truth_slot(rj)) {
                targets.push((format!("omega.{}.{}", ri.name(), rj.name()), h.omega[a][b]));
            }
        }
    }

    let mut out = Vec::new();
    for (name, value) in targets {
        let row = by_name
            .get(name.as_str())
            .ok_or_else(|| CliError::data(format!("{} has no row {name}", summary_path.display())))?;
        out.push(CoverageRow {
            quantity: name,
            truth: value,
            mean: row.mean,
            hdi_low: row.hdi_low,
            hdi_high: row.hdi_high,
            covered: row.hdi_low <= value && value <= row.hdi_high,
        });
    }
    let hyper_total = out.len();
    let hyper_covered = out.iter().filter(|r| r.covered).count();

    let mut individual_coverage = BTreeMap::new();
    for &role in roles {
        let value = |p: &cognoise::IndividualParams| match role {
            Role::NuSo => Some(p.nu_so()),
            Role::NuB => Some(p.nu_b()),
            Role::Odds => Some(p.odds()),
            Role::MuR => Some(p.mu_r()),
            Role::Sensitivity => None,
        };
        let mut hits = 0;
        let mut n = 0;
        for part in &truth.participants {
            let (Some(v), Some(row)) = (value(&part.params), by_name.get(format!("{}[{}]", role.name(), part.id).as_str()))
            else {
                continue;
            };
            n += 1;
            if row.hdi_low <= v && v <= row.hdi_high {
                hits += 1;
            }
            out.push(CoverageRow {
                quantity: row.parameter.clone(),
                truth: v,
                mean: row.mean,
                hdi_low: row.hdi_low,
                hdi_high: row.hdi_high,
                covered: row.hdi_low <= v && v <= row.hdi_high,
            });
        }
        if n > 0 {
            individual_coverage.insert(role.name().to_string(), hits as f64 / n as f64);
        }
    }

    write_csv(&ctx.output("coverage.csv")?, &out)?;
    let report = Report {
        model: rec.model.to_string(),
        hyper_covered,
        hyper_total,
        individual_coverage,
    };
    write_json(&ctx.output("recovery.json")?, &report)?;
    println!("95% HDIs cover {hyper_covered}/{hyper_total} population quantities");
    for (role, share) in &report.individual_coverage {
        println!("  {role}: {:.1}% of participants covered", 100.0 * share);
    }
    Ok(())
}
