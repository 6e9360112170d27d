//! Post-processing of averaged cuts: two-step normalization, background
//! subtraction, widths, enhancement ratios and depth sweeps.

use crate::engine::{CorrelationCurve, Engine, ScatterConfig};
use crate::error::{invalid, Error, Result};
use crate::model::{GeometrySpec, Variant};
use crate::theory::{theory_curve, theory_peak_width, TheoryParams};

/// A sampled curve whose values may be negative (after subtraction).
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub theta: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl Profile {
    pub fn new(theta: Vec<f64>, values: Vec<f64>, std_errors: Vec<f64>) -> Result<Self> {
        if values.len() != theta.len() || std_errors.len() != theta.len() {
            return Err(Error::AxisMismatch);
        }
        Ok(Self {
            theta,
            values,
            std_errors,
        })
    }

    /// Noise-free profile.
    pub fn exact(theta: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = theta.len();
        Self::new(theta, values, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn nearest(&self, theta: f64) -> usize {
        self.theta
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - theta).abs().total_cmp(&(b.1 - theta).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

impl From<&CorrelationCurve> for Profile {
    fn from(c: &CorrelationCurve) -> Self {
        Self {
            theta: c.theta.clone(),
            values: c.values.clone(),
            std_errors: c.std_errors.clone(),
        }
    }
}

/// A value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub uncertainty: f64,
}

pub fn trapezoid(theta: &[f64], values: &[f64]) -> f64 {
    theta
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Simulation and theory after dividing each by its own area and then both
/// by the theory maximum. The scale factors let companion curves (such as
/// the theory background) be brought onto the same footing.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPair {
    pub sim: Profile,
    pub theory: Profile,
    pub sim_scale: f64,
    pub theory_scale: f64,
}

pub fn normalize_pair(sim: &Profile, theory: &Profile) -> Result<NormalizedPair> {
    if sim.theta != theory.theta {
        return Err(Error::AxisMismatch);
    }
    let sim_area = trapezoid(&sim.theta, &sim.values);
    let th_area = trapezoid(&theory.theta, &theory.values);
    if !(sim_area.is_finite() && sim_area > 0.0 && th_area.is_finite() && th_area > 0.0) {
        return Err(Error::ZeroArea);
    }
    let th_max = theory
        .values
        .iter()
        .fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        / th_area;
    let sim_scale = 1.0 / (sim_area * th_max);
    let theory_scale = 1.0 / (th_area * th_max);
    let scale = |p: &Profile, s: f64| Profile {
        theta: p.theta.clone(),
        values: p.values.iter().map(|v| v * s).collect(),
        std_errors: p.std_errors.iter().map(|v| v * s).collect(),
    };
    Ok(NormalizedPair {
        sim: scale(sim, sim_scale),
        theory: scale(theory, theory_scale),
        sim_scale,
        theory_scale,
    })
}

/// Result of [`subtract_background`].
#[derive(Debug, Clone, PartialEq)]
pub struct Subtracted {
    pub profile: Profile,
    /// Some point went negative by more than three standard errors.
    pub negative_flag: bool,
}

pub fn subtract_background(curve: &Profile, background: &Profile) -> Result<Subtracted> {
    if curve.theta.len() != background.theta.len()
        || curve
            .theta
            .iter()
            .zip(&background.theta)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
    {
        return Err(Error::AxisMismatch);
    }
    let values: Vec<f64> = curve
        .values
        .iter()
        .zip(&background.values)
        .map(|(c, b)| c - b)
        .collect();
    let std_errors: Vec<f64> = curve
        .std_errors
        .iter()
        .zip(&background.std_errors)
        .map(|(a, b)| a.hypot(*b))
        .collect();
    let negative_flag = values
        .iter()
        .zip(&std_errors)
        .any(|(v, s)| *v < -3.0 * s && *v < 0.0);
    Ok(Subtracted {
        profile: Profile {
            theta: curve.theta.clone(),
            values,
            std_errors,
        },
        negative_flag,
    })
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn half_crossings(theta: &[f64], values: &[f64]) -> Result<(usize, f64, f64)> {
    let i = argmax(values);
    if i == 0 || i + 1 >= values.len() {
        return Err(Error::PeakAtEdge);
    }
    let half = 0.5 * values[i];
    let cross = |j: usize, k: usize| {
        // linear interpolation between samples j (above) and k (below)
        let (v0, v1) = (values[j], values[k]);
        theta[j] + (half - v0) * (theta[k] - theta[j]) / (v1 - v0)
    };
    let left = (0..i)
        .rev()
        .find(|&k| values[k] < half)
        .map(|k| cross(k + 1, k))
        .ok_or(Error::NoCrossing("left"))?;
    let right = (i + 1..values.len())
        .find(|&k| values[k] < half)
        .map(|k| cross(k - 1, k))
        .ok_or(Error::NoCrossing("right"))?;
    Ok((i, left, right))
}

/// Full width at half maximum by linear interpolation of the two
/// half-maximum crossings around the global maximum. The uncertainty
/// combines the width shifts caused by moving each influential sample by
/// its standard error.
pub fn fwhm(profile: &Profile) -> Result<Measured> {
    let (i, left, right) = half_crossings(&profile.theta, &profile.values)?;
    let width = right - left;
    let half = 0.5 * profile.values[i];
    let mut influential = vec![i];
    if let Some(k) = (0..i).rev().find(|&k| profile.values[k] < half) {
        influential.extend([k, k + 1]);
    }
    if let Some(k) = (i + 1..profile.len()).find(|&k| profile.values[k] < half) {
        influential.extend([k - 1, k]);
    }
    influential.sort_unstable();
    influential.dedup();
    let mut var = 0.0;
    let mut values = profile.values.clone();
    for j in influential {
        let s = profile.std_errors[j];
        if s == 0.0 {
            continue;
        }
        let orig = values[j];
        values[j] = orig + s;
        let up = half_crossings(&profile.theta, &values).map(|(_, l, r)| r - l);
        values[j] = orig - s;
        let down = half_crossings(&profile.theta, &values).map(|(_, l, r)| r - l);
        values[j] = orig;
        let shift = match (up, down) {
            (Ok(u), Ok(d)) => 0.5 * (u - d),
            (Ok(u), Err(_)) => u - width,
            (Err(_), Ok(d)) => width - d,
            _ => 0.0,
        };
        var += shift * shift;
    }
    Ok(Measured {
        value: width,
        uncertainty: var.sqrt(),
    })
}

/// Minimum number of samples in the background window.
pub const MIN_BACKGROUND_SAMPLES: usize = 8;

/// Peak value at `theta = 0` over the background extrapolated to `theta = 0`.
///
/// The background is a weighted least-squares quadratic in `theta^2` over
/// `4 peak_width < |theta| <= theta0`, which follows the broad envelope's
/// curvature instead of averaging over it.
pub fn enhancement_ratio(profile: &Profile, peak_width: f64, theta0: f64) -> Result<Measured> {
    let centre = profile.nearest(0.0);
    let peak = profile.values[centre];
    let peak_se = profile.std_errors[centre];
    let lo = 4.0 * peak_width;
    let rows: Vec<(f64, f64, f64)> = profile
        .theta
        .iter()
        .zip(&profile.values)
        .zip(&profile.std_errors)
        .filter(|((t, _), _)| t.abs() > lo && t.abs() <= theta0)
        .map(|((t, v), s)| (t * t, *v, *s))
        .collect();
    if rows.len() < MIN_BACKGROUND_SAMPLES {
        return Err(Error::InsufficientBackground {
            got: rows.len(),
            min: MIN_BACKGROUND_SAMPLES,
        });
    }
    let weighted = rows.iter().all(|r| r.2 > 0.0);
    let scale = theta0 * theta0;
    let design: Vec<[f64; 3]> = rows
        .iter()
        .map(|r| [1.0, r.0 / scale, (r.0 / scale).powi(2)])
        .collect();
    let weights: Vec<f64> = rows
        .iter()
        .map(|r| if weighted { r.2.powi(-2) } else { 1.0 })
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (coef, cov) = weighted_least_squares(&design, &ys, &weights)?;
    let background = coef[0];
    if background <= 0.0 {
        return Err(Error::Degenerate(
            "background extrapolates to a non-positive value".into(),
        ));
    }
    let bg_var = if weighted {
        cov[0][0]
    } else {
        let dof = (rows.len() - 3) as f64;
        let rss: f64 = design
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - (0..3).map(|j| x[j] * coef[j]).sum::<f64>()).powi(2))
            .sum();
        cov[0][0] * rss / dof
    };
    let ratio = peak / background;
    let rel =
        (peak_se / background).powi(2) + (peak * bg_var.sqrt() / (background * background)).powi(2);
    Ok(Measured {
        value: ratio,
        uncertainty: rel.sqrt(),
    })
}

fn invert3(m: [[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !det.is_finite() || det.abs() < 1e-300 {
        return Err(Error::Degenerate("singular normal equations".into()));
    }
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            *x = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Ok(inv)
}

fn weighted_least_squares(
    x: &[[f64; 3]],
    y: &[f64],
    w: &[f64],
) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for ((row, yi), wi) in x.iter().zip(y).zip(w) {
        for r in 0..3 {
            aty[r] += wi * row[r] * yi;
            for c in 0..3 {
                ata[r][c] += wi * row[r] * row[c];
            }
        }
    }
    let cov = invert3(ata)?;
    let coef = [0, 1, 2].map(|r| (0..3).map(|c| cov[r][c] * aty[c]).sum());
    Ok((coef, cov))
}

/// Least-squares fit of `sum_i a_i exp(-theta^2 / 4 w_i^2)` with the
/// listed widths fixed; returns amplitudes and the residual sum of squares.
fn linear_gaussians(profile: &Profile, widths: &[f64], mask: &[bool]) -> Option<(Vec<f64>, f64)> {
    let m = widths.len();
    let basis = |t: f64| widths.iter().map(move |w| (-t * t / (4.0 * w * w)).exp());
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    let weight = |s: f64| if s > 0.0 { s.powi(-2) } else { 1.0 };
    for i in (0..profile.len()).filter(|&i| mask[i]) {
        let row: Vec<f64> = basis(profile.theta[i]).collect();
        let w = weight(profile.std_errors[i]);
        for r in 0..m {
            aty[r] += w * row[r] * profile.values[i];
            for c in 0..m {
                ata[r][c] += w * row[r] * row[c];
            }
        }
    }
    let amps = match m {
        1 => vec![aty[0] / ata[0][0]],
        2 => {
            let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
            if det.abs() <= 1e-12 * ata[0][0] * ata[1][1] {
                return None;
            }
            vec![
                (aty[0] * ata[1][1] - aty[1] * ata[0][1]) / det,
                (aty[1] * ata[0][0] - aty[0] * ata[1][0]) / det,
            ]
        }
        _ => return None,
    };
    let rss = (0..profile.len())
        .filter(|&i| mask[i])
        .map(|i| {
            let model: f64 = basis(profile.theta[i]).zip(&amps).map(|(b, a)| a * b).sum();
            weight(profile.std_errors[i]) * (profile.values[i] - model).powi(2)
        })
        .sum();
    amps.iter().all(|a| a.is_finite()).then_some((amps, rss))
}

/// Fitted envelope `A exp(-theta^2 / 4 w^2)`, optionally next to a second
/// component of known width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub width: f64,
    pub amplitude: f64,
    pub fixed_amplitude: Option<f64>,
}

/// Fits the broad envelope of a cut outside `|theta| <= exclude`. With
/// `fixed_width = Some(w0)` the model is `a exp(-t^2/4 w0^2) + b
/// exp(-t^2/4 w^2)` and `w` is the fitted width; otherwise a single
/// Gaussian. The free width is searched within `[lo, hi]`.
pub fn fit_envelope_width(
    profile: &Profile,
    exclude: f64,
    fixed_width: Option<f64>,
    lo: f64,
    hi: f64,
) -> Result<EnvelopeFit> {
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("width range", "need 0 < lo < hi"));
    }
    let mask: Vec<bool> = profile.theta.iter().map(|t| t.abs() > exclude).collect();
    let count = mask.iter().filter(|m| **m).count();
    if count < MIN_BACKGROUND_SAMPLES {
        return Err(Error::InsufficientBackground {
            got: count,
            min: MIN_BACKGROUND_SAMPLES,
        });
    }
    let widths = |w: f64| match fixed_width {
        Some(w0) => vec![w0, w],
        None => vec![w],
    };
    let cost = |lw: f64| {
        linear_gaussians(profile, &widths(lw.exp()), &mask)
            .map(|(_, rss)| -rss)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (la, lb) = (lo.ln(), hi.ln());
    let steps = 400;
    let best = (0..=steps)
        .map(|i| la + (lb - la) * i as f64 / steps as f64)
        .map(|lw| (lw, cost(lw)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(lw, _)| lw)
        .expect("non-empty scan");
    let h = (lb - la) / steps as f64;
    let lw = crate::theory::golden_max(cost, (best - h).max(la), (best + h).min(lb), 1e-10);
    let width = lw.exp();
    let (amps, _) = linear_gaussians(profile, &widths(width), &mask)
        .ok_or_else(|| Error::Degenerate("envelope fit is singular".into()))?;
    Ok(match fixed_width {
        Some(_) => EnvelopeFit {
            width,
            amplitude: amps[1],
            fixed_amplitude: Some(amps[0]),
        },
        None => EnvelopeFit {
            width,
            amplitude: amps[0],
            fixed_amplitude: None,
        },
    })
}

/// Abscissa of the maximum of `y(x)`, refined by a least-squares parabola
/// through up to five samples around the largest one.
pub fn quadratic_vertex(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::AxisMismatch);
    }
    let i = argmax(y);
    if i == 0 || i + 1 == x.len() {
        return Err(Error::PeakAtEdge);
    }
    let lo = i.saturating_sub(2);
    let hi = (i + 2).min(x.len() - 1);
    let design: Vec<[f64; 3]> = (lo..=hi)
        .map(|j| [1.0, x[j] - x[i], (x[j] - x[i]).powi(2)])
        .collect();
    let ys: Vec<f64> = (lo..=hi).map(|j| y[j]).collect();
    let (c, _) = weighted_least_squares(&design, &ys, &vec![1.0; ys.len()])?;
    if c[2] >= 0.0 {
        return Ok(x[i]);
    }
    Ok((x[i] - 0.5 * c[1] / c[2]).clamp(x[lo], x[hi]))
}

/// Width and amplitude of the enhancement peak versus crystal position.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variant: Variant,
    pub z_values: Vec<f64>,
    pub z_tilde: Vec<f64>,
    pub fwhm_over_theta0: Vec<f64>,
    pub fwhm_err: Vec<f64>,
    pub amp_norm: Vec<f64>,
    pub amp_err: Vec<f64>,
    pub theory_fwhm_over_theta0: Vec<f64>,
    pub theory_amp_norm: Vec<f64>,
    /// Averaged cut for each entry of `z_values`.
    pub curves: Vec<CorrelationCurve>,
    /// Set where background subtraction went negative beyond 3 sigma.
    pub negative_flags: Vec<bool>,
}

/// Per-entry analysis of one averaged cut against theory.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSummary {
    pub pair: NormalizedPair,
    pub peak: Subtracted,
    pub fwhm: Measured,
    pub theory_fwhm: f64,
    /// Raw mean at `theta = 0`.
    pub amplitude: Measured,
    pub theory_amplitude: f64,
}

pub fn theory_params(config: &ScatterConfig) -> Result<TheoryParams> {
    TheoryParams::new(
        config.grid.k(),
        config.geometry.d(),
        config.geometry.z(),
        config.diffuser.theta0(),
        config.grid.dim(),
    )
}

/// Normalizes a cut against theory, subtracts the theory background and
/// measures the enhancement peak.
pub fn summarize_cut(
    curve: &CorrelationCurve,
    params: &TheoryParams,
    variant: Variant,
) -> Result<CutSummary> {
    let k = params.k;
    let theory = theory_curve(&curve.theta, params, variant, curve.q_a / k)?;
    let sim = Profile::from(curve);
    let pair = normalize_pair(
        &sim,
        &Profile::exact(theory.theta.clone(), theory.total.clone())?,
    )?;
    let background = Profile::exact(
        theory.theta.clone(),
        theory
            .background
            .iter()
            .map(|b| b * pair.theory_scale)
            .collect(),
    )?;
    let peak = subtract_background(&pair.sim, &background)?;
    let width = fwhm(&peak.profile)?;
    let centre = sim.nearest(0.0);
    Ok(CutSummary {
        fwhm: width,
        theory_fwhm: theory_peak_width(params, variant)?,
        amplitude: Measured {
            value: sim.values[centre],
            uncertainty: sim.std_errors[centre],
        },
        theory_amplitude: theory.total[centre],
        pair,
        peak,
    })
}

/// Simulates, normalizes and measures every crystal position in `z_list`.
/// Entry `i` uses master seed `base + i`; amplitudes are relative to a
/// `z = 0` run (taken from the list when present).
pub fn sweep_z(base: &ScatterConfig, z_list: &[f64], threads: usize) -> Result<SweepResult> {
    if z_list.is_empty() {
        return Err(invalid("z_list", "need at least one crystal position"));
    }
    let variant = base.geometry.variant();
    let d = base.geometry.d();
    let configs = z_list
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let mut c = base.clone();
            c.geometry = GeometrySpec::new(d, z, variant)?;
            c.ensemble.master_seed = base.ensemble.master_seed.wrapping_add(i as u64);
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::with_capacity(configs.len());
    let mut curves = Vec::with_capacity(configs.len());
    for c in &configs {
        let curve = Engine::new(c.clone())?.average_cut(0.0, threads)?;
        summaries.push(summarize_cut(&curve, &theory_params(c)?, variant)?);
        curves.push(curve);
    }
    let reference_index = z_list.iter().position(|z| *z == 0.0);
    let (ref_amp, ref_theory) = match reference_index {
        Some(i) => (summaries[i].amplitude, summaries[i].theory_amplitude),
        None => {
            let mut c = base.clone();
            c.geometry = GeometrySpec::new(d, 0.0, variant)?;
            c.ensemble.master_seed = base.ensemble.master_seed.wrapping_add(z_list.len() as u64);
            let curve = Engine::new(c.clone())?.average_cut(0.0, threads)?;
            let s = summarize_cut(&curve, &theory_params(&c)?, variant)?;
            (s.amplitude, s.theory_amplitude)
        }
    };
    let theta0 = base.diffuser.theta0();
    let z0 = base.diffuser.z0();
    let mut out = SweepResult {
        variant,
        z_values: z_list.to_vec(),
        z_tilde: z_list.iter().map(|z| z / z0).collect(),
        fwhm_over_theta0: Vec::new(),
        fwhm_err: Vec::new(),
        amp_norm: Vec::new(),
        amp_err: Vec::new(),
        theory_fwhm_over_theta0: Vec::new(),
        theory_amp_norm: Vec::new(),
        curves,
        negative_flags: Vec::new(),
    };
    for (i, s) in summaries.iter().enumerate() {
        out.fwhm_over_theta0.push(s.fwhm.value / theta0);
        out.fwhm_err.push(s.fwhm.uncertainty / theta0);
        let a = s.amplitude.value / ref_amp.value;
        let err = if Some(i) == reference_index {
            0.0
        } else {
            a * ((s.amplitude.uncertainty / s.amplitude.value).powi(2)
                + (ref_amp.uncertainty / ref_amp.value).powi(2))
            .sqrt()
        };
        out.amp_norm.push(a);
        out.amp_err.push(err);
        out.theory_fwhm_over_theta0.push(s.theory_fwhm / theta0);
        out.theory_amp_norm.push(s.theory_amplitude / ref_theory);
        out.negative_flags.push(s.peak.negative_flag);
    }
    Ok(out)
}
