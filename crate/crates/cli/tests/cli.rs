use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cognoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cognoise"))
        .args(args)
        .env("COGNOISE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cognoise(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{line}: {e}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_SAMPLER: [&str; 6] = ["--chains", "2", "--warmup", "150", "--draws", "100"];

/// Design, then a small simulated dataset on it, in `dir`.
fn simulated(dir: &Path, n: &str) -> PathBuf {
    ok(&["--seed", "7", "--out", s(dir), "design"]);
    let trials = dir.join("trials.csv");
    ok(&[
        "--seed", "7", "--out", s(dir), "simulate", "--design", s(&trials), "--rounds", "60", "--n-baseline", n,
        "--n-treatment", n,
    ]);
    dir.join("choices.csv")
}

fn fit(dir: &Path, data: &Path, model: &str) -> PathBuf {
    let out = dir.join(model);
    let mut args = vec!["--seed", "3", "--out", s(&out), "fit", "--data", s(data), "--model", model];
    args.extend(SMALL_SAMPLER);
    ok(&args);
    out
}

#[test]
fn design_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&["--seed", "5", "--out", s(&a), "design"]);
    ok(&["--seed", "5", "--out", s(&b), "design"]);
    ok(&["--seed", "6", "--out", s(&c), "design"]);
    let read = |d: &Path| std::fs::read(d.join("trials.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let text = String::from_utf8(read(&a)).unwrap();
    assert_eq!(text.lines().count(), 881);
}

fn settings(dir: &Path) -> Vec<(f64, f64)> {
    let text = std::fs::read_to_string(dir.join("curve_settings.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[7].parse().unwrap(), f[8].parse().unwrap())
        })
        .collect()
}

#[test]
fn curves_follow_the_noise_directions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    ok(&["--out", s(d), "curves", "--beta", "0.5", "--mu-r", "1"]);
    let (_, cross) = settings(d)[0];
    assert!((cross - 1.0).abs() < 1e-12, "{cross}");
    let curves = std::fs::read_to_string(d.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 201);

    ok(&["--out", s(d), "curves", "--nu-so", "0.25,0.5,1", "--nu-b", "0.25"]);
    let by_so = settings(d);
    assert!(by_so.windows(2).all(|w| w[1].0 > w[0].0), "{by_so:?}");

    ok(&["--out", s(d), "curves", "--nu-so", "0.25", "--nu-b", "0.25,0.5,1"]);
    let by_b = settings(d);
    assert!(by_b.windows(2).all(|w| w[1].0 < w[0].0), "{by_b:?}");
    assert!(by_b.windows(2).all(|w| w[1].1.to_bits() == w[0].1.to_bits()));

    ok(&["--out", s(d), "curves", "--rule", "random-utility", "--beta", "0.25", "--sigma-ru", "0.5,2"]);
    for (_, cross) in settings(d) {
        assert!((cross - 1.0 / 3.0).abs() < 1e-9, "{cross}");
    }
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = simulated(d, "4");
    let truth: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["participants"].as_array().unwrap().len(), 8);

    let fit_dir = fit(d, &data, "altruism-full");
    for f in ["fit.json", "draws.bin", "summary.csv", "diagnostics.json"] {
        assert!(fit_dir.join(f).is_file(), "{f}");
    }
    let summary = std::fs::read_to_string(fit_dir.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rhat = header.iter().position(|h| *h == "rhat").unwrap();
    let mut rows = 0;
    for l in lines {
        let v: f64 = l.split(',').nth(rhat).unwrap().parse().unwrap();
        assert!(v.is_finite() && v > 0.5, "{l}");
        rows += 1;
    }
    assert!(rows > 8 * 4);

    // Reruns reproduce the draws byte for byte.
    let again = d.join("again");
    let mut args = vec!["--seed", "3", "--out", s(&again), "fit", "--data", s(&data), "--model", "altruism-full"];
    args.extend(SMALL_SAMPLER);
    ok(&args);
    assert_eq!(std::fs::read(fit_dir.join("draws.bin")).unwrap(), std::fs::read(again.join("draws.bin")).unwrap());
    assert_eq!(std::fs::read(fit_dir.join("summary.csv")).unwrap(), std::fs::read(again.join("summary.csv")).unwrap());

    // Reports are byte-identical on regeneration.
    let (r1, r2) = (d.join("r1"), d.join("r2"));
    ok(&["--out", s(&r1), "report", "--fit", s(&fit_dir)]);
    ok(&["--out", s(&r2), "report", "--fit", s(&fit_dir)]);
    let report = std::fs::read_to_string(r1.join("report.md")).unwrap();
    assert_eq!(report, std::fs::read_to_string(r2.join("report.md")).unwrap());
    assert!(report.contains("P(nu_so,T > nu_so,B)"));
    assert!(report.contains("P(mu_r < 1)"));
    assert!(report.contains("P(delta_T > delta_B)"));
    assert!(report.contains("## Correlations"));

    let r3 = d.join("r3");
    ok(&["--out", s(&r3), "report", "--fit", s(&fit_dir), "--no-default-probs"]);
    let bare = std::fs::read_to_string(r3.join("report.md")).unwrap();
    assert!(!bare.contains("## Posterior probabilities"));
    assert!(bare.contains("## Population parameters"));

    let rec = d.join("rec");
    let out = ok(&["--out", s(&rec), "recover", "--truth", s(&d.join("truth.json")), "--fit", s(&fit_dir)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("population quantities"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rec.join("recovery.json")).unwrap()).unwrap();
    // 6 medians, 4 scales, 6 correlations.
    assert_eq!(report["hyper_total"], 16);
    assert_eq!(report["individual_coverage"].as_object().unwrap().len(), 4);
    let coverage = std::fs::read_to_string(rec.join("coverage.csv")).unwrap();
    assert_eq!(coverage.lines().count(), 1 + 16 + 8 * 4);
}

#[test]
fn compare_lists_the_five_altruism_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = simulated(d, "3");
    let models = ["altruism-full", "altruism-mu1", "altruism-nub0", "altruism-nuso0", "random-utility"];
    let fits: Vec<PathBuf> = models.iter().map(|m| fit(d, &data, m)).collect();
    let cmp = d.join("cmp");
    let mut args = vec!["--out", s(&cmp), "compare"];
    args.extend(fits.iter().map(|p| s(p)));
    ok(&args);
    let table = std::fs::read_to_string(cmp.join("comparison.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "model,elpd_waic,p_waic,se,d_elpd,d_se");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 5);
    let mut names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    names.sort_unstable();
    let mut want = models.to_vec();
    want.sort_unstable();
    assert_eq!(names, want);
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 0.0);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn recovery_with_low_prior_mean_reports_it_below_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let hyper = d.join("hyper.json");
    std::fs::write(
        &hyper,
        r#"{"mu": [-1.17, -0.92, -1.66, -1.66, -0.8, -0.6931471805599453],
            "tau": [0.3, 0.3, 0.2, 0.3],
            "omega": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}"#,
    )
    .unwrap();
    ok(&["--seed", "21", "--out", s(d), "simulate", "--hyper", s(&hyper), "--rounds", "120", "--n-baseline", "20", "--n-treatment", "20"]);
    let fit_dir = d.join("fit");
    let data = d.join("choices.csv");
    ok(&[
        "--seed", "3", "--out", s(&fit_dir), "fit", "--data", s(&data), "--chains", "2", "--warmup", "300", "--draws", "500",
    ]);
    let rep = d.join("rep");
    ok(&["--out", s(&rep), "report", "--fit", s(&fit_dir), "--no-default-probs", "--prob", "mu_r.pop_mean < 1"]);
    let text = std::fs::read_to_string(rep.join("report.md")).unwrap();
    let line = text.lines().find(|l| l.contains("`mu_r.pop_mean < 1`")).unwrap();
    let p: f64 = line.rsplit('|').nth(1).unwrap().trim().parse().unwrap();
    assert!(p > 0.95, "{line}");
}

#[test]
fn config_file_supplies_seed_and_sampler() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"seed": 9, "out": "{}", "rounds": 30, "n_baseline": 2, "n_treatment": 2,
                 "sampler": {{"chains": 2, "warmup": 60, "draws": 30}}}}"#,
            s(&d.join("run"))
        ),
    )
    .unwrap();
    ok(&["--config", s(&cfg), "simulate"]);
    let data = d.join("run").join("choices.csv");
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 1 + 4 * 30);
    ok(&["--config", s(&cfg), "fit", "--data", s(&data)]);
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("run").join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["sampler"]["draws"], 30);
    assert_eq!(fit["sampler"]["seed"], 9);
}

#[test]
fn failures_exit_with_codes_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = cognoise(&["--out", s(d), "fit", "--data", "/nonexistent/choices.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");

    let out = cognoise(&["--seed", "1", "--out", s(d), "fit", "--data", "/nonexistent/choices.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = d.join("bad.csv");
    std::fs::write(&bad, "participant_id,group\n1,Q\n").unwrap();
    let out = cognoise(&["--seed", "1", "--out", s(d), "fit", "--data", s(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["kind"], "data");

    let cfg = d.join("bad.json");
    std::fs::write(&cfg, r#"{"seed": "seven"}"#).unwrap();
    let out = cognoise(&["--config", s(&cfg), "design"]);
    assert_eq!(out.status.code(), Some(2));

    let out = cognoise(&["--out", s(d), "curves", "--beta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = cognoise(&["--out", s(d), "compare", s(d)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_rejects_fits_of_different_data() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let da = simulated(&a, "2");
    let db = simulated(&b, "2");
    let fa = fit(&a, &da, "altruism-full");
    let fb = fit(&b, &db, "random-utility");
    let out = cognoise(&["--out", s(dir.path()), "compare", s(&fa), s(&fb)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_json(&out)["error"]["message"].as_str().unwrap().contains("fitted to"));
}
