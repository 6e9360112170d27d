//! The five subcommands. Each is a pure function of the resolved config
//! to output bytes, apart from the manifest's timing fields.

use std::fmt::Write as _;
use std::path::Path;

use pairscatter_core::analysis::{
    fit_envelope_width, summarize_cut, sweep_z, theory_params, CutSummary, Profile, SweepResult,
};
use pairscatter_core::engine::GUARD_BAND_LIMIT;
use pairscatter_core::optics::estimate_mask_correlation;
use pairscatter_core::theory::{theory_curve, TheoryCurve};
use pairscatter_core::{
    fresnel_propagate, Complex64, ComplexField, CorrelationCurve, Engine, EnsembleSpec,
    ScatterConfig, Variant,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{csv, OutputDir, RunManifest};

pub const MIN_SIMULATE_REALIZATIONS: usize = 100;

pub const THEORY_HEADER: [&str; 4] = [
    "theta_rad",
    "gamma_total",
    "gamma_peak_term",
    "gamma_background_term",
];
pub const MINUS_PARTS_HEADER: [&str; 2] = ["gamma_minus_1", "gamma_minus_2"];
pub const CURVE_HEADER: [&str; 3] = ["theta_rad", "mean", "std_error"];
pub const SWEEP_HEADER: [&str; 5] = [
    "z_over_z0",
    "fwhm_over_theta0",
    "fwhm_err",
    "amp_norm",
    "amp_err",
];

/// Relative angles `theta_b - theta_a` of the reported cut, matching the
/// engine's bin selection.
pub fn cut_axis(config: &ScatterConfig, q_a: f64) -> Vec<f64> {
    let grid = config.grid;
    let k = grid.k();
    let window = config.theta_window.unwrap_or(f64::INFINITY);
    let mut theta: Vec<f64> = (0..grid.n())
        .map(|i| (grid.momentum(i) - q_a) / k)
        .filter(|t| t.abs() <= window * (1.0 + 1e-12))
        .collect();
    theta.sort_by(f64::total_cmp);
    theta
}

fn theory_csv(curve: &TheoryCurve) -> String {
    match &curve.parts {
        Some((g1, g2)) => {
            let header: Vec<&str> = THEORY_HEADER
                .iter()
                .chain(&MINUS_PARTS_HEADER)
                .copied()
                .collect();
            csv(
                &header,
                &[
                    &curve.theta,
                    &curve.total,
                    &curve.peak,
                    &curve.background,
                    g1,
                    g2,
                ],
            )
        }
        None => csv(
            &THEORY_HEADER,
            &[&curve.theta, &curve.total, &curve.peak, &curve.background],
        ),
    }
}

fn curve_csv(curve: &CorrelationCurve) -> String {
    csv(
        &CURVE_HEADER,
        &[&curve.theta, &curve.values, &curve.std_errors],
    )
}

fn theory_for(config: &ScatterConfig, q_a: f64) -> Result<TheoryCurve> {
    let axis = cut_axis(config, q_a);
    Ok(theory_curve(
        &axis,
        &theory_params(config)?,
        config.geometry.variant(),
        q_a / config.grid.k(),
    )?)
}

/// Runs every pre-compute rule and returns the warnings as text.
fn preflight(config: &ScatterConfig) -> Result<Vec<String>> {
    let warnings = config.validate()?;
    Ok(warnings.iter().map(|w| w.to_string()).collect())
}

fn snapped_qa(cfg: &RunConfig, config: &ScatterConfig) -> f64 {
    config.grid.snap_momentum(cfg.run.qa)
}

pub fn theory(cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    let config = cfg.scatter()?;
    let warnings = config.check_static()?;
    let mut dir = OutputDir::create(out)?;
    dir.warnings = warnings.iter().map(|w| w.to_string()).collect();
    let curve = theory_for(&config, snapped_qa(cfg, &config))?;
    dir.stage("theory");
    dir.write("theory.csv", &theory_csv(&curve))?;
    dir.finish("theory", cfg)
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(RunManifest, Option<CutSummary>)> {
    if cfg.run.realizations < MIN_SIMULATE_REALIZATIONS {
        return Err(CliError::Config(format!(
            "run.realizations must be at least {MIN_SIMULATE_REALIZATIONS}, got {}",
            cfg.run.realizations
        )));
    }
    let config = cfg.scatter()?;
    let mut dir = OutputDir::create(out)?;
    dir.warnings = preflight(&config)?;
    dir.stage("validate");
    let q_a = snapped_qa(cfg, &config);
    let curve = Engine::new(config.clone())?.average_cut(q_a, cfg.run.threads)?;
    dir.stage("simulate");
    dir.write("curve.csv", &curve_csv(&curve))?;
    let summary = summarize_cut(&curve, &theory_params(&config)?, config.geometry.variant()).ok();
    Ok((dir.finish("simulate", cfg)?, summary))
}

fn sweep_csvs(result: &SweepResult) -> (String, String) {
    let data = csv(
        &SWEEP_HEADER,
        &[
            &result.z_tilde,
            &result.fwhm_over_theta0,
            &result.fwhm_err,
            &result.amp_norm,
            &result.amp_err,
        ],
    );
    let theory = csv(
        &["z_over_z0", "fwhm_over_theta0", "amp_norm"],
        &[
            &result.z_tilde,
            &result.theory_fwhm_over_theta0,
            &result.theory_amp_norm,
        ],
    );
    (data, theory)
}

fn run_sweep(
    cfg: &RunConfig,
    z_list: &[f64],
    dir: &mut OutputDir,
    prefix: &str,
) -> Result<SweepResult> {
    if z_list.is_empty() {
        return Err(CliError::Config(
            "sweep needs at least one crystal position".into(),
        ));
    }
    let base = cfg.scatter_at(0.0)?;
    for &z in z_list {
        dir.warnings.extend(preflight(&cfg.scatter_at(z)?)?);
    }
    dir.warnings.dedup();
    dir.stage(&format!("{prefix}validate"));
    let result = sweep_z(&base, z_list, cfg.run.threads)?;
    dir.stage(&format!("{prefix}sweep"));
    let (data, theory) = sweep_csvs(&result);
    dir.write(&format!("{prefix}sweep.csv"), &data)?;
    dir.write(&format!("{prefix}sweep_theory.csv"), &theory)?;
    for (i, curve) in result.curves.iter().enumerate() {
        dir.write(&format!("{prefix}curves/z{i:02}.csv"), &curve_csv(curve))?;
    }
    Ok(result)
}

/// `z_over_z0` overrides the configured list when given.
pub fn sweep(
    cfg: &RunConfig,
    z_over_z0: Option<&[f64]>,
    out: &Path,
) -> Result<(RunManifest, SweepResult)> {
    let list = z_over_z0.unwrap_or(&cfg.presets.sweep_z_over_z0);
    let z_list = list
        .iter()
        .map(|t| cfg.z_from_z0(*t))
        .collect::<Result<Vec<_>>>()?;
    let mut dir = OutputDir::create(out)?;
    let result = run_sweep(cfg, &z_list, &mut dir, "")?;
    Ok((dir.finish("sweep", cfg)?, result))
}

/// One line of the validation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rules_ok: bool,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rules_ok && self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = write!(s, "{verdict} {:<24}", c.name);
            if let (Some(v), Some(t)) = (c.value, c.threshold) {
                let _ = write!(s, " {v:.3e} (limit {t:.1e})");
            }
            if !c.message.is_empty() {
                let _ = write!(s, " {}", c.message);
            }
            s.push('\n');
        }
        for w in &self.warnings {
            let _ = writeln!(s, "WARN {w}");
        }
        s
    }
}

const OMEGA_RMS_LIMIT: f64 = 0.03;
const TWO_OMEGA_RMS_LIMIT: f64 = 0.05;
const UNITARITY_LIMIT: f64 = 1e-10;
/// Position samples pooled by the mask-statistics check.
const MASK_SAMPLES: usize = 10_000_000;

fn threshold_check(name: &str, value: f64, limit: f64) -> Check {
    Check {
        name: name.into(),
        passed: value < limit,
        value: Some(value),
        threshold: Some(limit),
        message: String::new(),
    }
}

pub fn validation_report(cfg: &RunConfig) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let config = match cfg.scatter() {
        Ok(c) => c,
        Err(e) if e.exit_code() == 2 => {
            checks.push(Check {
                name: "configuration".into(),
                passed: false,
                value: None,
                threshold: None,
                message: e.to_string(),
            });
            return Ok(ValidationReport {
                rules_ok: false,
                warnings: Vec::new(),
                checks,
            });
        }
        Err(e) => return Err(e),
    };
    let (rules_ok, warnings) = match config.check_static() {
        Ok(w) => (true, w.iter().map(|w| w.to_string()).collect()),
        Err(e) => {
            checks.push(Check {
                name: "configuration".into(),
                passed: false,
                value: None,
                threshold: None,
                message: e.to_string(),
            });
            (false, Vec::new())
        }
    };
    if rules_ok {
        checks.push(Check {
            name: "configuration".into(),
            passed: true,
            value: None,
            threshold: None,
            message: String::new(),
        });
        let grid = config.grid;
        let xi0 = config.diffuser.xi0();
        let masks = (MASK_SAMPLES / grid.len()).clamp(100, 10_000);
        let max_lag = (3.0 * xi0 / grid.dx()).floor() as usize;
        let stats = estimate_mask_correlation(
            &grid,
            &config.diffuser,
            &EnsembleSpec::new(masks, cfg.run.seed),
            max_lag.min(grid.n() - 1),
            cfg.run.threads,
        )?;
        checks.push(threshold_check(
            "mask_correlation_omega",
            stats.omega_rms_error(xi0),
            OMEGA_RMS_LIMIT,
        ));
        checks.push(threshold_check(
            "mask_correlation_2omega",
            stats.two_omega_rms_error(),
            TWO_OMEGA_RMS_LIMIT,
        ));

        let waist = config.pump.waist;
        let beam = ComplexField::from_fn(grid, |x, y| {
            Complex64::new((-(x * x + y * y) / (waist * waist)).exp(), 0.0)
        });
        let d = config.geometry.d();
        let k = grid.k();
        let full = fresnel_propagate(&beam, d, k)?;
        let drift = (full.norm_sqr() / beam.norm_sqr() - 1.0).abs();
        checks.push(threshold_check(
            "propagator_norm_drift",
            drift,
            UNITARITY_LIMIT,
        ));
        let halves = fresnel_propagate(&fresnel_propagate(&beam, 0.5 * d, k)?, 0.5 * d, k)?;
        let back = fresnel_propagate(&full, -d, k)?;
        let scale = beam.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let max_diff = |a: &ComplexField, b: &ComplexField| {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max)
                / scale
        };
        checks.push(threshold_check(
            "propagator_semigroup",
            max_diff(&halves, &full),
            UNITARITY_LIMIT,
        ));
        checks.push(threshold_check(
            "propagator_inverse",
            max_diff(&back, &beam),
            UNITARITY_LIMIT,
        ));

        if config.geometry.variant() == Variant::Plus {
            checks.push(threshold_check(
                "guard_band_energy",
                config.guard_band_energy()?,
                GUARD_BAND_LIMIT,
            ));
        }
    }
    Ok(ValidationReport {
        rules_ok,
        warnings,
        checks,
    })
}

pub fn validate(cfg: &RunConfig, out: &Path) -> Result<(RunManifest, ValidationReport)> {
    let mut dir = OutputDir::create(out)?;
    let report = validation_report(cfg)?;
    dir.stage("validate");
    dir.warnings = report.warnings.clone();
    dir.write("validation.toml", &toml::to_string(&report)?)?;
    Ok((dir.finish("validate", cfg)?, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig4c,
    Fig5c,
    Fig6,
    Fig7,
    Map,
}

impl std::str::FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig4c" => Ok(Preset::Fig4c),
            "fig5c" => Ok(Preset::Fig5c),
            "fig6" => Ok(Preset::Fig6),
            "fig7" => Ok(Preset::Fig7),
            "map" => Ok(Preset::Map),
            other => Err(CliError::Config(format!(
                "unknown preset `{other}` (expected fig4c, fig5c, fig6, fig7 or map)"
            ))),
        }
    }
}

/// Simulation and theory for one crystal position, written as
/// `<tag>_sim.csv`, `<tag>_theory.csv` and `<tag>_normalized.csv`.
fn paired_run(
    cfg: &RunConfig,
    config: &ScatterConfig,
    tag: &str,
    dir: &mut OutputDir,
) -> Result<(CorrelationCurve, CutSummary)> {
    let curve = Engine::new(config.clone())?.average_cut(0.0, cfg.run.threads)?;
    let theory = theory_for(config, 0.0)?;
    let summary = summarize_cut(&curve, &theory_params(config)?, config.geometry.variant())?;
    dir.stage(tag);
    dir.write(&format!("{tag}_sim.csv"), &curve_csv(&curve))?;
    dir.write(&format!("{tag}_theory.csv"), &theory_csv(&theory))?;
    let pair = &summary.pair;
    dir.write(
        &format!("{tag}_normalized.csv"),
        &csv(
            &["theta_rad", "sim", "sim_std_error", "theory"],
            &[
                &pair.sim.theta,
                &pair.sim.values,
                &pair.sim.std_errors,
                &pair.theory.values,
            ],
        ),
    )?;
    Ok((curve, summary))
}

fn preset_configs(
    cfg: &RunConfig,
    variant: &str,
    z_list: &[f64],
) -> Result<(RunConfig, Vec<ScatterConfig>)> {
    let mut c = cfg.clone();
    c.model.variant = variant.into();
    let configs = z_list
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let mut s = c.scatter_at(z)?;
            s.ensemble.master_seed = cfg.run.seed.wrapping_add(i as u64);
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((c, configs))
}

fn width_table(rows: &[(f64, f64, &CutSummary)], theta0: f64) -> String {
    let mut s =
        String::from("z_over_d      z_over_z0     fwhm/theta0             theory       amp_raw\n");
    for (zd, zt, sum) in rows {
        let _ = writeln!(
            s,
            "{zd:<12.4} {zt:<12.4} {:.5} +- {:.5}   {:.5}      {:.5e}",
            sum.fwhm.value / theta0,
            sum.fwhm.uncertainty / theta0,
            sum.theory_fwhm / theta0,
            sum.amplitude.value
        );
    }
    s
}

fn sweep_table(r: &SweepResult) -> String {
    let mut s = format!(
        "{} variant\nz_over_z0    fwhm/theta0 (theory)         amp_norm (theory)\n",
        r.variant
    );
    for i in 0..r.z_tilde.len() {
        let _ = writeln!(
            s,
            "{:<12.4} {:.5} +- {:.5} ({:.5})   {:.4} +- {:.4} ({:.4})",
            r.z_tilde[i],
            r.fwhm_over_theta0[i],
            r.fwhm_err[i],
            r.theory_fwhm_over_theta0[i],
            r.amp_norm[i],
            r.amp_err[i],
            r.theory_amp_norm[i]
        );
    }
    s
}

pub fn reproduce(cfg: &RunConfig, preset: Preset, out: &Path) -> Result<RunManifest> {
    let mut dir = OutputDir::create(out)?;
    let theta0 = cfg.model.theta0;
    let p = &cfg.presets;
    let summary = match preset {
        Preset::Fig4c | Preset::Fig5c => {
            let (variant, z_list) = if preset == Preset::Fig4c {
                let d = cfg.d()?;
                (
                    "plus",
                    p.fig4c_z_over_d.iter().map(|f| f * d).collect::<Vec<_>>(),
                )
            } else {
                (
                    "minus",
                    p.fig5c_z_over_z0
                        .iter()
                        .map(|t| cfg.z_from_z0(*t))
                        .collect::<Result<Vec<_>>>()?,
                )
            };
            let (c, configs) = preset_configs(cfg, variant, &z_list)?;
            for s in &configs {
                dir.warnings.extend(preflight(s)?);
            }
            dir.warnings.dedup();
            dir.stage("validate");
            let z0 = c.diffuser()?.z0();
            let d = c.d()?;
            let mut summaries = Vec::new();
            for (i, s) in configs.iter().enumerate() {
                let (_, sum) = paired_run(cfg, s, &format!("z{i:02}"), &mut dir)?;
                summaries.push((s.geometry.z() / d, s.geometry.z() / z0, sum));
            }
            let rows: Vec<(f64, f64, &CutSummary)> =
                summaries.iter().map(|(a, b, s)| (*a, *b, s)).collect();
            format!("{variant} variant\n{}", width_table(&rows, theta0))
        }
        Preset::Fig6 => {
            let d = cfg.d()?;
            let mut plus = cfg.clone();
            plus.model.variant = "plus".into();
            let plus_z: Vec<f64> = p.fig6_plus_z_over_d.iter().map(|f| f * d).collect();
            let a = run_sweep(&plus, &plus_z, &mut dir, "plus/")?;
            let mut minus = cfg.clone();
            minus.model.variant = "minus".into();
            let minus_z = p
                .fig6_minus_z_over_z0
                .iter()
                .map(|t| cfg.z_from_z0(*t))
                .collect::<Result<Vec<_>>>()?;
            let b = run_sweep(&minus, &minus_z, &mut dir, "minus/")?;
            format!("{}\n{}", sweep_table(&a), sweep_table(&b))
        }
        Preset::Fig7 => {
            let z_list = p
                .fig7_z_over_z0
                .iter()
                .map(|t| cfg.z_from_z0(*t))
                .collect::<Result<Vec<_>>>()?;
            let (c, configs) = preset_configs(cfg, "minus", &z_list)?;
            for s in &configs {
                dir.warnings.extend(preflight(s)?);
            }
            dir.warnings.dedup();
            dir.stage("validate");
            let z0 = c.diffuser()?.z0();
            let (mut zt, mut fit, mut predicted) = (Vec::new(), Vec::new(), Vec::new());
            for (i, s) in configs.iter().enumerate() {
                let (curve, sum) = paired_run(cfg, s, &format!("z{i:02}"), &mut dir)?;
                let t = s.geometry.z() / z0;
                let profile = Profile::from(&curve);
                let exclude = 4.0 * sum.theory_fwhm;
                let fixed = (t != 0.0).then_some(theta0);
                let w = fit_envelope_width(&profile, exclude, fixed, 0.1 * theta0, 3.0 * theta0)?;
                zt.push(t);
                fit.push(w.width / theta0);
                predicted.push(((1.0 + t * t) / (1.0 + 3.0 * t * t)).sqrt());
            }
            dir.write(
                "background_widths.csv",
                &csv(
                    &[
                        "z_over_z0",
                        "fit_width_over_theta0",
                        "theory_width_over_theta0",
                    ],
                    &[&zt, &fit, &predicted],
                ),
            )?;
            let mut s = String::from("z_over_z0    background width/theta0 (theory)\n");
            for i in 0..zt.len() {
                let _ = writeln!(s, "{:<12.4} {:.4} ({:.4})", zt[i], fit[i], predicted[i]);
            }
            s
        }
        Preset::Map => {
            let config = cfg.scatter()?;
            dir.warnings = preflight(&config)?;
            dir.stage("validate");
            let k = config.grid.k();
            let qas: Vec<f64> = p
                .map_theta_a_over_theta0
                .iter()
                .map(|t| config.grid.snap_momentum(t * theta0 * k))
                .collect();
            let map = Engine::new(config.clone())?.average_map(&qas, cfg.run.threads)?;
            dir.stage("map");
            let (mut ta, mut tb, mut mean, mut se) =
                (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            let mut s = String::from("theta_a/theta0  envelope centre theta_b/theta0 (theory)\n");
            let params = theory_params(&config)?;
            for row in &map.rows {
                let a = row.q_a / k;
                ta.extend(std::iter::repeat_n(a, row.len()));
                tb.extend(row.theta.iter().map(|t| a + t));
                mean.extend_from_slice(&row.values);
                se.extend_from_slice(&row.std_errors);
                let theory = theory_curve(&row.theta, &params, config.geometry.variant(), a)?;
                let centre = |v: &[f64]| {
                    let w: f64 = v.iter().sum();
                    row.theta
                        .iter()
                        .zip(v)
                        .map(|(t, v)| (a + t) * v)
                        .sum::<f64>()
                        / w
                };
                let _ = writeln!(
                    s,
                    "{:<15.4} {:.4} ({:.4})",
                    a / theta0,
                    centre(&row.values) / theta0,
                    centre(&theory.total) / theta0
                );
            }
            dir.write(
                "map.csv",
                &csv(
                    &["theta_a_rad", "theta_b_rad", "mean", "std_error"],
                    &[&ta, &tb, &mean, &se],
                ),
            )?;
            s
        }
    };
    dir.write("summary.txt", &summary)?;
    print!("{summary}");
    dir.finish("reproduce", cfg)
}
