//! Fresnel propagation, diffuser masks and pointwise transmission.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{ComplexField, DiffuserSpec, EnsembleSpec, TransverseGrid, RULE_SLACK};
use crate::spectral::{Scratch, Spectral};
use crate::stats::reduce_ensemble;

/// Sign of the Fresnel phase: a field propagated by `s` picks up
/// `exp(FRESNEL_SIGN * i q^2 s / 2 kappa)` per momentum component.
pub const FRESNEL_SIGN: f64 = 1.0;

/// Smallest allowed window, in units of `xi0`.
pub const MIN_WINDOW_XI0: f64 = 16.0;

/// `exp(i q^2 s / 2 kappa) * scale` in storage order.
pub(crate) fn fresnel_kernel(
    grid: &TransverseGrid,
    s: f64,
    kappa: f64,
    scale: f64,
) -> Vec<Complex64> {
    let a = FRESNEL_SIGN * s / (2.0 * kappa);
    (0..grid.len())
        .map(|idx| Complex64::from_polar(scale, a * grid.momentum_sq(idx)))
        .collect()
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa > 0.0 {
        Ok(())
    } else {
        Err(invalid("kappa", format!("must be positive, got {kappa}")))
    }
}

/// Free-space propagation over a fixed distance, with the kernel
/// precomputed for repeated use.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectral: Spectral,
    kernel: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: TransverseGrid, s: f64, kappa: f64) -> Result<Self> {
        Self::with_spectral(&Spectral::new(grid), s, kappa)
    }

    pub fn with_spectral(spectral: &Spectral, s: f64, kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        if !s.is_finite() {
            return Err(invalid("s", "must be finite"));
        }
        let grid = *spectral.grid();
        let kernel = fresnel_kernel(&grid, s, kappa, 1.0 / grid.len() as f64);
        Ok(Self {
            spectral: spectral.clone(),
            kernel,
        })
    }

    pub fn grid(&self) -> &TransverseGrid {
        self.spectral.grid()
    }

    pub fn scratch(&self) -> Scratch {
        self.spectral.scratch()
    }

    pub fn apply_in_place(&self, data: &mut [Complex64], scratch: &mut Scratch) {
        self.spectral.forward(data, scratch);
        data.iter_mut().zip(&self.kernel).for_each(|(v, h)| *v *= h);
        self.spectral.inverse(data, scratch);
    }

    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        if field.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let mut values = field.values().to_vec();
        self.apply_in_place(&mut values, &mut self.scratch());
        Ok(ComplexField::from_parts(*self.grid(), values))
    }
}

/// Propagates `field` by `s` (negative is backward) at wavenumber `kappa`.
pub fn fresnel_propagate(field: &ComplexField, s: f64, kappa: f64) -> Result<ComplexField> {
    if s == 0.0 {
        check_kappa(kappa)?;
        return Ok(field.clone());
    }
    Propagator::new(*field.grid(), s, kappa)?.apply(field)
}

/// One diffuser realization at the fundamental frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffuserMask {
    pub at_omega: ComplexField,
    pub realization_seed: u64,
}

/// Errors unless `dx <= xi0 / 4`.
pub fn check_sampling(grid: &TransverseGrid, spec: &DiffuserSpec) -> Result<()> {
    let limit = spec.xi0() / 4.0;
    if grid.dx() > limit * (1.0 + RULE_SLACK) {
        return Err(Error::Sampling {
            dx: grid.dx(),
            limit,
        });
    }
    Ok(())
}

/// Reusable mask generator: white complex-Gaussian noise shaped in
/// momentum space by `exp(-q^2 xi0^2 / 2)`.
#[derive(Debug, Clone)]
pub struct MaskSynthesizer {
    spectral: Spectral,
    filter: Vec<f64>,
}

impl MaskSynthesizer {
    pub fn new(grid: TransverseGrid, spec: &DiffuserSpec) -> Result<Self> {
        Self::with_spectral(&Spectral::new(grid), spec)
    }

    pub fn with_spectral(spectral: &Spectral, spec: &DiffuserSpec) -> Result<Self> {
        let grid = *spectral.grid();
        if ((grid.k() - spec.k()) / grid.k()).abs() > 1e-12 {
            return Err(invalid("k", "diffuser and grid use different wavenumbers"));
        }
        check_sampling(&grid, spec)?;
        if grid.window() < MIN_WINDOW_XI0 * spec.xi0() {
            return Err(Error::WindowTooSmall {
                window: grid.window(),
                required: MIN_WINDOW_XI0 * spec.xi0(),
            });
        }
        let xi2 = spec.xi0() * spec.xi0();
        let raw: Vec<f64> = (0..grid.len())
            .map(|idx| (-0.5 * grid.momentum_sq(idx) * xi2).exp())
            .collect();
        // sum g^2 fixes <|V|^2> = 1 exactly on the lattice
        let norm = raw.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok(Self {
            spectral: spectral.clone(),
            filter: raw.into_iter().map(|g| g / norm).collect(),
        })
    }

    pub fn grid(&self) -> &TransverseGrid {
        self.spectral.grid()
    }

    pub fn scratch(&self) -> Scratch {
        self.spectral.scratch()
    }

    pub fn fill(&self, seed: u64, out: &mut [Complex64], scratch: &mut Scratch) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for (v, g) in out.iter_mut().zip(&self.filter) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v = Complex64::new(re, im) * (half * g);
        }
        self.spectral.inverse(out, scratch);
    }

    pub fn synthesize(&self, seed: u64) -> DiffuserMask {
        let grid = *self.grid();
        let mut values = vec![Complex64::default(); grid.len()];
        self.fill(seed, &mut values, &mut self.scratch());
        DiffuserMask {
            at_omega: ComplexField::from_parts(grid, values),
            realization_seed: seed,
        }
    }
}

/// Draws the mask of realization `seed`. Bit-identical for identical inputs.
pub fn synthesize_diffuser(
    grid: &TransverseGrid,
    spec: &DiffuserSpec,
    seed: u64,
) -> Result<DiffuserMask> {
    Ok(MaskSynthesizer::new(*grid, spec)?.synthesize(seed))
}

/// Transmission at `2 omega`: the pointwise square of the `omega` mask.
pub fn mask_at_2omega(mask: &DiffuserMask) -> ComplexField {
    let values = mask.at_omega.values().iter().map(|v| v * v).collect();
    ComplexField::from_parts(*mask.at_omega.grid(), values)
}

/// Pointwise product `field * mask`.
pub fn apply_mask(field: &ComplexField, mask: &ComplexField) -> Result<ComplexField> {
    if field.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    let values = field
        .values()
        .iter()
        .zip(mask.values())
        .map(|(a, b)| a * b)
        .collect();
    Ok(ComplexField::from_parts(*field.grid(), values))
}

/// Ensemble estimates of `<V(x) V*(x + l dx)>` at `omega` and `2 omega`
/// for lags `l = 0..=max_lag` along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskCorrelation {
    /// Lag distances.
    pub lags: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega_se: Vec<f64>,
    pub two_omega: Vec<f64>,
    pub two_omega_se: Vec<f64>,
    pub n_masks: usize,
}

impl MaskCorrelation {
    /// Root-mean-square deviation of the `omega` estimate from
    /// `exp(-l^2 / 4 xi0^2)`.
    pub fn omega_rms_error(&self, xi0: f64) -> f64 {
        rms(self
            .lags
            .iter()
            .zip(&self.omega)
            .map(|(l, c)| c - (-l * l / (4.0 * xi0 * xi0)).exp()))
    }

    /// Root-mean-square deviation of the `2 omega` estimate from twice the
    /// squared `omega` estimate, relative to the zero-lag target 2.
    pub fn two_omega_rms_error(&self) -> f64 {
        rms(self
            .omega
            .iter()
            .zip(&self.two_omega)
            .map(|(c1, c2)| (c2 - 2.0 * c1 * c1) / 2.0))
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = it.fold((0.0, 0usize), |(s, c), x| (s + x * x, c + 1));
    (sum / count.max(1) as f64).sqrt()
}

/// Lag-resolved mask statistics averaged over positions and realizations.
pub fn estimate_mask_correlation(
    grid: &TransverseGrid,
    spec: &DiffuserSpec,
    ensemble: &EnsembleSpec,
    max_lag: usize,
    threads: usize,
) -> Result<MaskCorrelation> {
    if ensemble.n_realizations < 2 {
        return Err(Error::TooFewRealizations {
            got: ensemble.n_realizations,
            min: 2,
        });
    }
    if max_lag >= grid.n() {
        return Err(invalid("max_lag", "must be smaller than the grid"));
    }
    let synth = MaskSynthesizer::new(*grid, spec)?;
    let n = grid.n();
    let rows = grid.len() / n;
    let bins = max_lag + 1;
    let stats = reduce_ensemble(
        ensemble.n_realizations,
        2 * bins,
        threads,
        || (vec![Complex64::default(); grid.len()], synth.scratch()),
        |(buf, scratch), i, out| {
            synth.fill(ensemble.seed(i), buf, scratch);
            let sq: Vec<Complex64> = buf.iter().map(|v| v * v).collect();
            for lag in 0..bins {
                let (mut c1, mut c2) = (0.0, 0.0);
                for r in 0..rows {
                    let row = r * n;
                    for j in 0..n {
                        let a = row + j;
                        let b = row + (j + lag) % n;
                        c1 += (buf[a] * buf[b].conj()).re;
                        c2 += (sq[a] * sq[b].conj()).re;
                    }
                }
                out[lag] = c1 / grid.len() as f64;
                out[bins + lag] = c2 / grid.len() as f64;
            }
        },
    )?;
    let se = stats.std_error();
    let mean = stats.mean();
    Ok(MaskCorrelation {
        lags: (0..bins).map(|l| l as f64 * grid.dx()).collect(),
        omega: mean[..bins].to_vec(),
        omega_se: se[..bins].to_vec(),
        two_omega: mean[bins..].to_vec(),
        two_omega_se: se[bins..].to_vec(),
        n_masks: ensemble.n_realizations,
    })
}
