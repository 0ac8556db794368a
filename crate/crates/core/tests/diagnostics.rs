use cognoise::inference::{
    extract_correlations, hdi, prob_statement, rhat, summarize, ModelSpec, PosteriorDraws, SamplerConfig, Variant,
};
use cognoise::inference::{DrawsMeta, SummaryRow};
use cognoise::rng::stream;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Shortest interval over all pairs of sorted draws holding at least
/// `ceil(mass * n)` points; ties go to the lowest start.
fn brute_hdi(x: &[f64], mass: f64) -> (f64, f64) {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let need = (mass * s.len() as f64 - 1e-9).ceil() as usize;
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..s.len() {
        for j in i..s.len() {
            if j - i + 1 >= need && s[j] - s[i] < best.0 {
                best = (s[j] - s[i], i, j);
            }
        }
    }
    (s[best.1], s[best.2])
}

#[test]
fn hdi_equals_brute_force_on_random_samples() {
    let mut rng = stream(2024, &[]);
    let skew = Exp::new(1.0).unwrap();
    for case in 0..1000 {
        let n = rng.random_range(20..160);
        let x: Vec<f64> = (0..n)
            .map(|_| match case % 3 {
                0 => StandardNormal.sample(&mut rng),
                1 => skew.sample(&mut rng),
                // Heavy ties.
                _ => (rng.random_range(0..6) as f64) * 0.5,
            })
            .collect();
        let mass = [0.5, 0.8, 0.9, 0.95][case % 4];
        assert_eq!(hdi(&x, mass).unwrap(), brute_hdi(&x, mass), "case {case}");
    }
}

#[test]
fn hdi_errors_and_degenerate_inputs() {
    assert!(hdi(&[1.0; 19], 0.95).is_err());
    assert!(hdi(&[1.0; 40], 1.0).is_err());
    assert!(hdi(&[1.0; 40], 0.0).is_err());
    assert_eq!(hdi(&[2.5; 40], 0.95).unwrap(), (2.5, 2.5));
}

#[test]
fn iid_normal_rhat_is_near_one() {
    let chains: Vec<Vec<f64>> = (0..4)
        .map(|c| {
            let mut rng = stream(77, &[c]);
            (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect()
        })
        .collect();
    let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
    let r = rhat(&refs).unwrap();
    assert!((0.999..=1.01).contains(&r), "{r}");
}

fn meta(spec: ModelSpec) -> DrawsMeta {
    DrawsMeta {
        spec,
        config: SamplerConfig::default(),
        participant_ids: vec![],
        groups: vec![],
        n_records: 0,
        chains: vec![],
        divergence_rate: 0.0,
        warnings: vec![],
    }
}

/// Draws of a two-role model (`random-utility`: sigma_ru with group offset,
/// b without) with no participants.
fn small_draws(seed: u64, n_draws: usize) -> PosteriorDraws {
    let names: Vec<String> = ["mu.sigma_ru", "mu.b", "delta_mu.sigma_ru", "tau.sigma_ru", "tau.b", "omega.b.sigma_ru"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rng = stream(seed, &[]);
    let mut values = Vec::new();
    for _ in 0..2 * n_draws {
        let z: f64 = StandardNormal.sample(&mut rng);
        values.extend([
            0.1 * z,
            -0.8 + 0.05 * z,
            0.2 + 0.1 * rng.random::<f64>(),
            0.3 + 0.01 * rng.random::<f64>(),
            0.2,
            0.5 + 0.1 * (rng.random::<f64>() - 0.5),
        ]);
    }
    let mut d = PosteriorDraws::new(names, 2, n_draws, values).unwrap();
    d.meta = Some(meta(ModelSpec::new(Variant::RandomUtility)));
    d
}

fn one_pass(x: &[f64]) -> (f64, f64) {
    // Welford mean and sample SD.
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for &v in x {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    (mean, (m2 / (n - 1.0)).sqrt())
}

#[test]
fn summary_matches_one_pass_statistics() {
    let d = small_draws(3, 500);
    let rows: Vec<SummaryRow> = summarize(&d).unwrap();
    for name in ["mu.sigma_ru", "mu.b", "tau.sigma_ru", "omega.b.sigma_ru"] {
        let row = rows.iter().find(|r| r.parameter == name).unwrap();
        let (m, sd) = one_pass(&d.column(d.index_of(name).unwrap()));
        assert!((row.mean - m).abs() < 1e-10, "{name}");
        assert!((row.sd - sd).abs() < 1e-10, "{name}");
        assert!(row.hdi_low <= row.median && row.median <= row.hdi_high);
    }
    let constant = rows.iter().find(|r| r.parameter == "tau.b").unwrap();
    assert_eq!(constant.sd, 0.0);
    assert_eq!((constant.hdi_low, constant.hdi_high), (0.2, 0.2));
    assert_eq!(constant.rhat, f64::INFINITY);
}

#[test]
fn derived_rows_use_lognormal_transforms() {
    let d = small_draws(4, 200);
    let rows = summarize(&d).unwrap();
    let get = |n: &str| rows.iter().find(|r| r.parameter == n).unwrap_or_else(|| panic!("{n}"));
    // b is shared: median exp(mu), mean exp(mu + tau^2/2) with tau = 0.2.
    let mu_b = get("mu.b").mean;
    assert!((get("b.pop_median").mean - mu_b.exp()).abs() < 1e-3);
    assert!((get("b.pop_mean").mean / get("b.pop_median").mean - 0.02f64.exp()).abs() < 1e-12);
    assert!(rows.iter().any(|r| r.parameter == "sigma_ru.T.pop_mean"));
    assert!(rows.iter().any(|r| r.parameter == "sigma_ru.B.pop_median"));
}

#[test]
fn prob_statements() {
    let d = small_draws(5, 500);
    assert_eq!(prob_statement(&d, "mu.b < 0").unwrap(), 1.0);
    assert_eq!(prob_statement(&d, "tau.b >= 0.2").unwrap(), 1.0);
    assert_eq!(prob_statement(&d, "tau.b > 0.2").unwrap(), 0.0);
    let half = prob_statement(&d, "mu.sigma_ru > 0").unwrap();
    assert!((half - 0.5).abs() < 0.05, "{half}");
    assert!(prob_statement(&d, "mu.nothing > 0").is_err());
    assert!(prob_statement(&d, "mu.b ~ 0").is_err());
}

#[test]
fn correlation_summaries_are_symmetric_with_unit_diagonal() {
    let d = small_draws(6, 300);
    let c = extract_correlations(&d).unwrap();
    let find = |a: &str, b: &str| c.iter().find(|s| s.row == a && s.col == b).unwrap();
    assert_eq!(find("b", "b").mean, 1.0);
    assert_eq!(find("sigma_ru", "sigma_ru").hdi_high, 1.0);
    let (x, y) = (find("b", "sigma_ru"), find("sigma_ru", "b"));
    assert_eq!((x.mean, x.median, x.hdi_low, x.hdi_high), (y.mean, y.median, y.hdi_low, y.hdi_high));
    assert!((find("b", "sigma_ru").mean - 0.5).abs() < 0.01);
}
