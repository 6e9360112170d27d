use std::path::Path;
use std::process::{Command, Output};

use pairscatter_cli::commands;
use pairscatter_cli::config::RunConfig;
use pairscatter_cli::CliError;

const SMALL: &str = r#"
[model]
kd = 400.0
theta0 = 0.5

[grid]
n = 8192

[run]
realizations = 100

[presets]
fig6_plus_z_over_d = [0.0, 0.25, 0.5]
fig6_minus_z_over_z0 = [0.0, -2.0, -6.0]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairscatter"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    bin()
        .arg(args[0])
        .arg("--config")
        .arg(&config)
        .args(&args[1..])
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn digests(dir: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(dir.join("manifest.toml")).unwrap();
    text.lines()
        .filter(|l| l.starts_with("sha256"))
        .map(String::from)
        .collect()
}

#[test]
fn theory_plus_has_two_to_one_peak() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = run(tmp.path(), &["theory", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("theory.csv"));
    assert_eq!(
        header,
        "theta_rad,gamma_total,gamma_peak_term,gamma_background_term"
    );
    let centre = rows
        .iter()
        .min_by(|a, b| a[0].abs().total_cmp(&b[0].abs()))
        .unwrap();
    assert_eq!(centre[0], 0.0);
    assert!((centre[1] / centre[3] - 2.0).abs() < 1e-12);
}

#[test]
fn theory_minus_part_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = run(
        tmp.path(),
        &[
            "theory",
            "--variant",
            "minus",
            "--z-over-z0",
            "-1",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("theory.csv"));
    assert_eq!(
        header,
        "theta_rad,gamma_total,gamma_peak_term,gamma_background_term,gamma_minus_1,gamma_minus_2"
    );
    let centre = rows.iter().find(|r| r[0] == 0.0).unwrap();
    assert!((centre[5] / centre[4] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!((centre[4] + centre[5] - centre[1]).abs() < 1e-12 * centre[1]);
}

#[test]
fn crystal_beyond_half_depth_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = run(
        tmp.path(),
        &[
            "theory",
            "--z-over-d",
            "0.6",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("z <= d/2"));
}

#[test]
fn simulate_smoke_and_rerun_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = run(
            tmp.path(),
            &["simulate", "--seed", "17", "--out", dir.to_str().unwrap()],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (header, rows) = read_csv(&a.join("curve.csv"));
    assert_eq!(header, "theta_rad,mean,std_error");
    assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite())));
    assert_eq!(digests(&a), digests(&b));
    assert_eq!(
        std::fs::read(a.join("curve.csv")).unwrap(),
        std::fs::read(b.join("curve.csv")).unwrap()
    );
}

#[test]
fn simulate_needs_enough_realizations() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = run(
        tmp.path(),
        &[
            "simulate",
            "--realizations",
            "99",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<String>> = ["1", "4", "8"]
        .iter()
        .map(|t| {
            let out = tmp.path().join(format!("w{t}"));
            let o = run(
                tmp.path(),
                &[
                    "simulate",
                    "--realizations",
                    "300",
                    "--threads",
                    t,
                    "--out",
                    out.to_str().unwrap(),
                ],
            );
            assert!(o.status.success());
            digests(&out)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn sweep_writes_columns_and_rejects_empty_list() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = run(
        tmp.path(),
        &[
            "sweep",
            "--variant",
            "minus",
            "--z-list",
            "0,-1,-3",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(
        header,
        "z_over_z0,fwhm_over_theta0,fwhm_err,amp_norm,amp_err"
    );
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][3], 1.0);

    let cfg = RunConfig::parse(SMALL).unwrap();
    let err = commands::sweep(&cfg, Some(&[]), &tmp.path().join("e")).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn validate_passes_on_defaults_of_small_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = run(tmp.path(), &["validate", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(out.join("validation.toml").exists());
}

#[test]
fn validate_reports_coarse_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("coarse.toml");
    std::fs::write(
        &config,
        SMALL.replace("n = 8192", "n = 8192\ndx_over_xi0 = 1.0"),
    )
    .unwrap();
    let out = tmp.path().join("v");
    let o = bin()
        .args([
            "validate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let report = std::fs::read_to_string(out.join("validation.toml")).unwrap();
    assert!(report.contains("sampling rule"), "{report}");
}

#[test]
fn validate_warns_in_weak_scattering_regime() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    // k d theta0^2 = 10
    let theta0 = (10.0f64 / 400.0).sqrt().to_string();
    let o = run(
        tmp.path(),
        &[
            "validate",
            "--theta0",
            &theta0,
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("WARN k d theta0^2 = 10.000"));
}

#[test]
fn unknown_preset_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = run(
        tmp.path(),
        &["reproduce", "fig9", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig6_bundle_has_both_panels() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = run(
        tmp.path(),
        &["reproduce", "fig6", "--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for panel in ["plus", "minus"] {
        let (header, rows) = read_csv(&out.join(panel).join("sweep.csv"));
        assert_eq!(
            header,
            "z_over_z0,fwhm_over_theta0,fwhm_err,amp_norm,amp_err"
        );
        assert_eq!(rows.len(), 3);
    }
    assert!(out.join("summary.txt").exists());
    let plus = read_csv(&out.join("plus/sweep_theory.csv")).1;
    assert!(plus.windows(2).all(|w| w[1][1] > w[0][1]));
}
