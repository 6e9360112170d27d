//! Closed-form correlation functions in the strong-spreading regime.
//!
//! All results are defined up to a common overall constant. The two
//! contributions of the plane-wave-pump case carry equal weight at `z = 0`
//! so that the total reduces to the scattered-pump result there.

use crate::error::{invalid, Error, Result};
use crate::model::Variant;

/// `2 sqrt(2 ln 2)`: FWHM of a unit-variance Gaussian.
pub const GAUSSIAN_FWHM: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub k: f64,
    pub d: f64,
    /// Signed crystal position.
    pub z: f64,
    pub theta0: f64,
    pub dim: usize,
    weight_exponent: f64,
}

impl TheoryParams {
    pub fn new(k: f64, d: f64, z: f64, theta0: f64, dim: usize) -> Result<Self> {
        for (name, v) in [("k", k), ("d", d), ("theta0", theta0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !z.is_finite() {
            return Err(invalid("z", "must be finite"));
        }
        if dim != 1 && dim != 2 {
            return Err(invalid("dim", format!("must be 1 or 2, got {dim}")));
        }
        Ok(Self {
            k,
            d,
            z,
            theta0,
            dim,
            weight_exponent: -0.5 * dim as f64,
        })
    }

    /// Dimensionless form: `k = 1`, `d = kd`, `z = z_over_d * kd`.
    pub fn from_kd(kd: f64, theta0: f64, z_over_d: f64, dim: usize) -> Result<Self> {
        Self::new(1.0, kd, z_over_d * kd, theta0, dim)
    }

    pub fn with_z(&self, z: f64) -> Result<Self> {
        let mut p = Self::new(self.k, self.d, z, self.theta0, self.dim)?;
        p.weight_exponent = self.weight_exponent;
        Ok(p)
    }

    /// Replaces the exponent of `(1 + z_tilde^2)` in the second-contribution
    /// weight. The default is `-dim / 2`.
    pub fn with_weight_exponent(mut self, exponent: f64) -> Self {
        self.weight_exponent = exponent;
        self
    }

    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    pub fn kd(&self) -> f64 {
        self.k * self.d
    }

    pub fn xi0(&self) -> f64 {
        1.0 / (self.k * self.theta0)
    }

    pub fn z0(&self) -> f64 {
        1.0 / (self.k * self.theta0 * self.theta0)
    }

    pub fn z_tilde(&self) -> f64 {
        self.z / self.z0()
    }

    fn require(&self, variant: Variant) -> Result<()> {
        let slack = 1e-12 * self.d;
        let ok = match variant {
            Variant::Plus => self.z >= -slack && self.z <= 0.5 * self.d + slack,
            Variant::Minus => self.z <= slack,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry {
                z: self.z,
                variant: variant.as_str(),
                rule: match variant {
                    Variant::Plus => "0 <= z <= d/2",
                    Variant::Minus => "z <= 0",
                },
            })
        }
    }

    /// Peak width `1 / (k d theta0 (1 - z/d))`.
    pub fn delta_plus(&self) -> Result<f64> {
        self.require(Variant::Plus)?;
        Ok(1.0 / (self.kd() * self.theta0 * (1.0 - self.z / self.d)))
    }

    /// `1 / (k d theta0 (1 + 2|z|/d))`.
    pub fn delta_minus_1(&self) -> Result<f64> {
        self.require(Variant::Minus)?;
        Ok(1.0 / (self.kd() * self.theta0 * (1.0 + 2.0 * self.z.abs() / self.d)))
    }

    /// `sqrt(1 + z_tilde^2) / (k d theta0 sqrt(1 + 2|z|/d))`.
    pub fn delta_minus_2(&self) -> Result<f64> {
        self.require(Variant::Minus)?;
        let zt = self.z_tilde();
        Ok((1.0 + zt * zt).sqrt()
            / (self.kd() * self.theta0 * (1.0 + 2.0 * self.z.abs() / self.d).sqrt()))
    }

    /// Weight of the second contribution relative to its `z = 0` value.
    pub fn minus_weight(&self) -> f64 {
        let zt = self.z_tilde();
        (1.0 + zt * zt).powf(self.weight_exponent)
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(p: &TheoryParams, vs: &[&[f64]]) -> Result<()> {
    if vs.iter().any(|v| v.len() != p.dim) {
        return Err(invalid(
            "theta",
            format!("angle vectors must have {} components", p.dim),
        ));
    }
    Ok(())
}

/// Far-field intensity of one scattering event, `exp(-q^2 xi0^2)`.
pub fn f_omega(q: &[f64], p: &TheoryParams) -> f64 {
    (-sq(q) * p.xi0().powi(2)).exp()
}

/// Self-convolution of [`f_omega`] at doubled frequency, normalized so that
/// the `2 omega` mask has `<|V|^2> = 2`: `2^(1 - dim/2) exp(-q^2 xi0^2 / 2)`.
pub fn f_2omega(q: &[f64], p: &TheoryParams) -> f64 {
    2f64.powf(1.0 - 0.5 * p.dim as f64) * (-0.5 * sq(q) * p.xi0().powi(2)).exp()
}

/// Background and enhancement contributions at one detector pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParts {
    pub background: f64,
    pub peak: f64,
}

impl GammaParts {
    pub fn total(&self) -> f64 {
        self.background + self.peak
    }
}

/// The two contributions of the plane-wave-pump correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinusParts {
    pub first: GammaParts,
    pub second: GammaParts,
}

impl MinusParts {
    pub fn gamma_1(&self) -> f64 {
        self.first.total()
    }

    pub fn gamma_2(&self) -> f64 {
        self.second.total()
    }

    pub fn combined(&self) -> GammaParts {
        GammaParts {
            background: self.first.background + self.second.background,
            peak: self.first.peak + self.second.peak,
        }
    }

    pub fn total(&self) -> f64 {
        self.gamma_1() + self.gamma_2()
    }
}

/// Scattered-pump correlation
/// `2 exp(-(ta + tb)^2 / 4 theta0^2) [1 + exp(-(ta - tb)^2 / 2 dplus^2)]`.
pub fn gamma_plus(theta_a: &[f64], theta_b: &[f64], p: &TheoryParams) -> Result<GammaParts> {
    check_dim(p, &[theta_a, theta_b])?;
    let dp = p.delta_plus()?;
    let sum: Vec<f64> = theta_a.iter().zip(theta_b).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = theta_a.iter().zip(theta_b).map(|(a, b)| a - b).collect();
    let envelope = 2.0 * (-sq(&sum) / (4.0 * p.theta0 * p.theta0)).exp();
    Ok(GammaParts {
        background: envelope,
        peak: envelope * (-sq(&diff) / (2.0 * dp * dp)).exp(),
    })
}

/// Plane-wave-pump correlation, split into its two contributions.
pub fn gamma_minus(theta_a: &[f64], theta_b: &[f64], p: &TheoryParams) -> Result<MinusParts> {
    check_dim(p, &[theta_a, theta_b])?;
    let d1 = p.delta_minus_1()?;
    let d2 = p.delta_minus_2()?;
    let zt2 = p.z_tilde().powi(2);
    let t02 = p.theta0 * p.theta0;
    let sum: Vec<f64> = theta_a.iter().zip(theta_b).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = theta_a.iter().zip(theta_b).map(|(a, b)| a - b).collect();
    let env1 = (-sq(&sum) / (4.0 * t02)).exp();
    let cross = 3.0 * sq(theta_a) + 3.0 * sq(theta_b) - 2.0 * dot(theta_a, theta_b);
    let env2 = p.minus_weight() * (-(sq(&sum) + zt2 * cross) / (4.0 * (1.0 + zt2) * t02)).exp();
    let dd = sq(&diff);
    Ok(MinusParts {
        first: GammaParts {
            background: env1,
            peak: env1 * (-dd / (2.0 * d1 * d1)).exp(),
        },
        second: GammaParts {
            background: env2,
            peak: env2 * (-dd / (2.0 * d2 * d2)).exp(),
        },
    })
}

fn cut_angles(p: &TheoryParams, theta_a: f64, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; p.dim];
    let mut b = vec![0.0; p.dim];
    a[0] = theta_a;
    b[0] = theta_a + theta;
    (a, b)
}

/// Either correlation's background/peak split at one point of the cut
/// `theta_b = theta_a + theta`.
pub fn gamma_at(
    p: &TheoryParams,
    variant: Variant,
    theta_a: f64,
    theta: f64,
) -> Result<GammaParts> {
    let (a, b) = cut_angles(p, theta_a, theta);
    match variant {
        Variant::Plus => gamma_plus(&a, &b, p),
        Variant::Minus => Ok(gamma_minus(&a, &b, p)?.combined()),
    }
}

/// Theory sampled along a cut at fixed `theta_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    pub theta: Vec<f64>,
    pub total: Vec<f64>,
    pub peak: Vec<f64>,
    pub background: Vec<f64>,
    /// Plane-wave pump only: the two contributions' totals.
    pub parts: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn theory_curve(
    theta_axis: &[f64],
    p: &TheoryParams,
    variant: Variant,
    theta_a: f64,
) -> Result<TheoryCurve> {
    let mut curve = TheoryCurve {
        theta: theta_axis.to_vec(),
        total: Vec::with_capacity(theta_axis.len()),
        peak: Vec::with_capacity(theta_axis.len()),
        background: Vec::with_capacity(theta_axis.len()),
        parts: (variant == Variant::Minus).then(|| (Vec::new(), Vec::new())),
    };
    for &t in theta_axis {
        let (a, b) = cut_angles(p, theta_a, t);
        let parts = match variant {
            Variant::Plus => gamma_plus(&a, &b, p)?,
            Variant::Minus => {
                let m = gamma_minus(&a, &b, p)?;
                if let Some((g1, g2)) = curve.parts.as_mut() {
                    g1.push(m.gamma_1());
                    g2.push(m.gamma_2());
                }
                m.combined()
            }
        };
        curve.total.push(parts.total());
        curve.peak.push(parts.peak);
        curve.background.push(parts.background);
    }
    Ok(curve)
}

/// Background terms along the `theta_a = 0` cut.
pub fn theory_background(
    theta_axis: &[f64],
    p: &TheoryParams,
    variant: Variant,
) -> Result<Vec<f64>> {
    Ok(theory_curve(theta_axis, p, variant, 0.0)?.background)
}

fn minus_peak_profile(p: &TheoryParams) -> Result<impl Fn(f64) -> f64> {
    let d1 = p.delta_minus_1()?;
    let d2 = p.delta_minus_2()?;
    let zt2 = p.z_tilde().powi(2);
    let t02 = p.theta0 * p.theta0;
    let w = p.minus_weight();
    let c2 = (1.0 + 3.0 * zt2) / (4.0 * (1.0 + zt2) * t02);
    Ok(move |t: f64| {
        let t2 = t * t;
        (-t2 / (4.0 * t02) - t2 / (2.0 * d1 * d1)).exp()
            + w * (-c2 * t2 - t2 / (2.0 * d2 * d2)).exp()
    })
}

/// FWHM of the enhancement term along the `theta_a = 0` cut.
pub fn theory_peak_width(p: &TheoryParams, variant: Variant) -> Result<f64> {
    match variant {
        Variant::Plus => Ok(GAUSSIAN_FWHM * p.delta_plus()?),
        Variant::Minus => {
            // sum of two centred Gaussians: decreasing in |theta|
            let f = minus_peak_profile(p)?;
            let half = 0.5 * f(0.0);
            let mut hi = p.delta_minus_1()?.max(p.delta_minus_2()?);
            while f(hi) > half {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > half {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            Ok(lo + hi)
        }
    }
}

/// Maximizes `f` on `[a, b]` by golden-section search.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > rel_tol * 0.5 * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Largest `|z_tilde|` scanned when locating the width maximum.
pub const WIDTH_SCAN_MAX: f64 = 50.0;

/// `|z_tilde|` at which the plane-wave-pump peak is widest.
pub fn theory_width_max_location(p: &TheoryParams) -> Result<f64> {
    let ratio = p.d / p.z0();
    if ratio <= 1.0 {
        return Err(Error::Degenerate(format!(
            "d / z0 = {ratio:.3e}: the diffuser does not decorrelate within d, no width maximum"
        )));
    }
    let z0 = p.z0();
    let width = |zt: f64| {
        p.with_z(-zt * z0)
            .and_then(|q| theory_peak_width(&q, Variant::Minus))
            .unwrap_or(f64::NAN)
    };
    let step = 0.01;
    let count = (WIDTH_SCAN_MAX / step) as usize;
    let samples: Vec<f64> = (0..=count).map(|i| width(i as f64 * step)).collect();
    if samples.iter().any(|w| !w.is_finite()) {
        return Err(Error::Degenerate(
            "peak width is not finite over the scan".into(),
        ));
    }
    let best = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    if best == 0 || best == count {
        return Err(Error::Degenerate(format!(
            "width has no interior maximum for |z_tilde| in [0, {WIDTH_SCAN_MAX}]"
        )));
    }
    let (a, b) = ((best - 1) as f64 * step, (best + 1) as f64 * step);
    Ok(golden_max(width, a, b, 1e-6))
}
