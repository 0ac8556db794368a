use std::fmt::Write as _;

use clap::ValueEnum;
use cognoise::io::write_csv;
use cognoise::{
    indifference_ratio, mean_choice_over_grid, ChoiceRule, IndividualParams, NumberParams, RandomUtilityParams,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Probit,
    Linear,
    Number,
    RandomUtility,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value = "probit")]
    rule: Rule,
    /// Altruism weight (also the random-utility weight).
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    /// Prior mean of the ratio (the magnitude prior for `number`).
    #[arg(long, default_value_t = 1.0)]
    mu_r: f64,
    /// Payment noise levels (magnitude noise for `number`).
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    nu_so: Vec<f64>,
    /// Preference noise levels; unused by `number` and `random-utility`.
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    nu_b: Vec<f64>,
    /// Logistic scales for `random-utility`, in euros.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    sigma_ru: Vec<f64>,
    /// Denominator amount in cents; the numerator is `ratio * other`.
    #[arg(long, default_value_t = 1000.0)]
    other_cents: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 0.1)]
    min_ratio: f64,
    #[arg(long, default_value_t = 10.0)]
    max_ratio: f64,
}

/// One curve's parameters and grid summaries (`curve_settings.csv`).
#[derive(Debug, Serialize)]
struct Setting {
    setting: String,
    rule: Rule,
    beta: Option<f64>,
    mu_r: Option<f64>,
    nu_so: Option<f64>,
    nu_b: Option<f64>,
    sigma_ru: Option<f64>,
    grid_average: f64,
    crossing_ratio: f64,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Ratio at which the choice probability is one half, by bisection on the
/// log ratio.
fn crossing(rule: &ChoiceRule, other: f64) -> CliResult<f64> {
    if let ChoiceRule::Probit(p) = rule {
        return Ok(indifference_ratio(p));
    }
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    let f = |x: f64| -> CliResult<f64> { Ok(rule.prob(x.exp() * other, other)? - 0.5) };
    if f(lo)? > 0.0 || f(hi)? < 0.0 {
        return Ok(f64::NAN);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn settings(a: &Args) -> CliResult<Vec<(Setting, ChoiceRule)>> {
    let blank = |label: String| Setting {
        setting: label,
        rule: a.rule,
        beta: None,
        mu_r: None,
        nu_so: None,
        nu_b: None,
        sigma_ru: None,
        grid_average: f64::NAN,
        crossing_ratio: f64::NAN,
    };
    let mut out = Vec::new();
    match a.rule {
        Rule::Probit | Rule::Linear => {
            for &nu_so in &a.nu_so {
                for &nu_b in &a.nu_b {
                    let p = IndividualParams::new(a.beta, nu_so, nu_b, a.mu_r)?;
                    let rule = if a.rule == Rule::Probit { ChoiceRule::Probit(p) } else { ChoiceRule::Linear(p) };
                    let mut s = blank(format!("nu_so={nu_so} nu_b={nu_b}"));
                    (s.beta, s.mu_r, s.nu_so, s.nu_b) = (Some(a.beta), Some(a.mu_r), Some(nu_so), Some(nu_b));
                    out.push((s, rule));
                }
            }
        }
        Rule::Number => {
            for &nu in &a.nu_so {
                let mut s = blank(format!("nu_ab={nu}"));
                (s.mu_r, s.nu_so) = (Some(a.mu_r), Some(nu));
                out.push((s, ChoiceRule::Number(NumberParams::new(nu, a.mu_r)?)));
            }
        }
        Rule::RandomUtility => {
            for &sigma in &a.sigma_ru {
                let mut s = blank(format!("sigma_ru={sigma}"));
                (s.beta, s.sigma_ru) = (Some(a.beta), Some(sigma));
                out.push((s, ChoiceRule::RandomUtility(RandomUtilityParams::new(a.beta, sigma)?)));
            }
        }
    }
    Ok(out)
}

pub fn run(ctx: &Context, a: Args) -> CliResult<()> {
    if a.points < 2 || !(a.min_ratio > 0.0 && a.max_ratio > a.min_ratio) {
        return Err(CliError::config("need at least 2 points and 0 < min-ratio < max-ratio"));
    }
    if !(a.other_cents > 0.0) {
        return Err(CliError::config("--other-cents must be positive"));
    }
    let mut settings = settings(&a)?;
    let ratios = log_grid(a.min_ratio, a.max_ratio, a.points);
    let grid: Vec<(f64, f64)> = ratios.iter().map(|r| (r * a.other_cents, a.other_cents)).collect();

    let mut columns = Vec::with_capacity(settings.len());
    for (s, rule) in &mut settings {
        columns.push(grid.iter().map(|&(x, y)| rule.prob(x, y)).collect::<Result<Vec<f64>, _>>()?);
        s.grid_average = mean_choice_over_grid(rule, &grid)?;
        s.crossing_ratio = crossing(rule, a.other_cents)?;
    }

    let mut text = String::from("ratio");
    for (s, _) in &settings {
        text.push(',');
        text.push_str(&s.setting);
    }
    text.push('\n');
    for (i, r) in ratios.iter().enumerate() {
        write!(text, "{r}").unwrap();
        for c in &columns {
            write!(text, ",{}", c[i]).unwrap();
        }
        text.push('\n');
    }
    let path = ctx.output("curves.csv")?;
    std::fs::write(&path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let rows: Vec<Setting> = settings.into_iter().map(|(s, _)| s).collect();
    write_csv(&ctx.output("curve_settings.csv")?, &rows)?;
    for s in &rows {
        println!("{}: grid average {:.4}, crossing ratio {:.4}", s.setting, s.grid_average, s.crossing_ratio);
    }
    Ok(())
}
