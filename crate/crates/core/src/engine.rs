//! Two-photon amplitudes by field propagation and their ensemble averages.
//!
//! With a position-diagonal pair amplitude `E(x) delta(x - x')`, the output
//! amplitude is `Psi(b, a) = sum_x A_b(x) E(x) A_a(x)` where `A_a` is the
//! transposed Green's function applied to the detection plane wave of
//! momentum `q_a`. A whole cut over `q_b` is therefore one forward FFT of
//! `G (E * A_a)`.

use std::fmt;

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{
    ComplexField, DiffuserSpec, EnsembleSpec, GeometrySpec, PumpSpec, TransverseGrid, Variant,
    RULE_SLACK,
};
use crate::optics::{check_sampling, fresnel_kernel, DiffuserMask, MaskSynthesizer};
use crate::spectral::{Scratch, Spectral};
use crate::stats::reduce_ensemble;

/// Largest allowed energy fraction in the guard band.
pub const GUARD_BAND_LIMIT: f64 = 1e-3;
/// Width of the guard band on each side, as a fraction of the window.
pub const GUARD_BAND_FRACTION: f64 = 0.1;
/// Below this `k d theta0^2` the dominant-diagram picture breaks down.
pub const REGIME_WARN: f64 = 100.0;
/// Minimum pump waist in units of `xi0`.
pub const NARROW_PUMP_XI0: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterConfig {
    pub grid: TransverseGrid,
    pub geometry: GeometrySpec,
    pub diffuser: DiffuserSpec,
    pub pump: PumpSpec,
    pub ensemble: EnsembleSpec,
    /// Largest `|theta_b - theta_a|` kept in averaged cuts; `None` keeps the
    /// whole momentum axis.
    pub theta_window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    WeakScattering { kd_theta0_sq: f64 },
    NarrowPump { waist: f64, limit: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::WeakScattering { kd_theta0_sq } => write!(
                f,
                "k d theta0^2 = {kd_theta0_sq:.3} is below {REGIME_WARN}; subleading diagrams are not negligible"
            ),
            Warning::NarrowPump { waist, limit } => {
                write!(f, "pump waist {waist:.4e} is below 30 xi0 = {limit:.4e}")
            }
        }
    }
}

impl ScatterConfig {
    pub fn kd_theta0_sq(&self) -> f64 {
        self.grid.k() * self.geometry.d() * self.diffuser.theta0().powi(2)
    }

    /// Rules that need no field computation: sampling, window size, pump
    /// width, wavenumber consistency and the scattering regime.
    pub fn check_static(&self) -> Result<Vec<Warning>> {
        let mut warnings = Vec::new();
        if ((self.grid.k() - self.diffuser.k()) / self.grid.k()).abs() > 1e-12 {
            return Err(invalid("k", "diffuser and grid use different wavenumbers"));
        }
        check_sampling(&self.grid, &self.diffuser)?;
        let required = self.pump.waist + 4.0 * self.geometry.d() * self.diffuser.theta0();
        if self.grid.window() < required * (1.0 - RULE_SLACK) {
            return Err(Error::WindowTooSmall {
                window: self.grid.window(),
                required,
            });
        }
        let limit = NARROW_PUMP_XI0 * self.diffuser.xi0();
        if self.pump.waist < limit {
            if !self.pump.allow_narrow {
                return Err(Error::NarrowPump {
                    waist: self.pump.waist,
                    limit,
                });
            }
            warnings.push(Warning::NarrowPump {
                waist: self.pump.waist,
                limit,
            });
        }
        let kdt = self.kd_theta0_sq();
        if kdt < REGIME_WARN {
            warnings.push(Warning::WeakScattering { kd_theta0_sq: kdt });
        }
        if let Some(w) = self.theta_window {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(
                    "theta_window",
                    format!("must be positive, got {w}"),
                ));
            }
        }
        Ok(warnings)
    }

    /// Full validation: the static rules plus the guard-band probe.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let warnings = self.check_static()?;
        let fraction = self.guard_band_energy()?;
        if fraction > GUARD_BAND_LIMIT {
            return Err(Error::GuardBand {
                fraction,
                limit: GUARD_BAND_LIMIT,
            });
        }
        Ok(warnings)
    }

    /// Energy fraction of the outgoing pair field, for one probe
    /// realization at `q_a = 0`, lying in the outer 10% of the window on
    /// either side of any axis. A plane-wave pump fills the periodic window
    /// by construction and reports zero.
    pub fn guard_band_energy(&self) -> Result<f64> {
        if self.geometry.variant() == Variant::Minus {
            return Ok(0.0);
        }
        let engine = Engine::new(self.clone())?;
        let mut ws = engine.workspace();
        engine
            .synth
            .fill(self.ensemble.seed(0), &mut ws.mask, &mut ws.scratch);
        engine.prepare_pump(&mut ws);
        engine.pair_field(&engine.plane(0.0), &mut ws);
        let edge = (0.5 - GUARD_BAND_FRACTION) * self.grid.window();
        let (mut outer, mut total) = (0.0, 0.0);
        for (idx, v) in ws.buf.iter().enumerate() {
            let (x, y) = self.grid.position_xy(idx);
            let e = v.norm_sqr();
            total += e;
            if x.abs() > edge || y.abs() > edge {
                outer += e;
            }
        }
        Ok(outer / total)
    }
}

/// Ensemble-averaged `|Psi(q_b; q_a)|^2` along `q_b` at fixed `q_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    /// `theta_b - theta_a`, strictly increasing.
    pub theta: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_realizations: usize,
    pub q_a: f64,
}

impl CorrelationCurve {
    pub fn new(
        theta: Vec<f64>,
        values: Vec<f64>,
        std_errors: Vec<f64>,
        n_realizations: usize,
        q_a: f64,
    ) -> Result<Self> {
        if values.len() != theta.len() || std_errors.len() != theta.len() {
            return Err(Error::LengthMismatch {
                got: values.len().min(std_errors.len()),
                expected: theta.len(),
            });
        }
        if theta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("theta", "axis must be strictly increasing"));
        }
        if values
            .iter()
            .chain(&std_errors)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(invalid("values", "must be finite and nonnegative"));
        }
        Ok(Self {
            theta,
            values,
            std_errors,
            n_realizations,
            q_a,
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Index of the sample closest to `theta`.
    pub fn index_of(&self, theta: f64) -> usize {
        let i = self.theta.partition_point(|t| *t < theta);
        if i == 0 {
            0
        } else if i == self.len() || theta - self.theta[i - 1] <= self.theta[i] - theta {
            i - 1
        } else {
            i
        }
    }
}

/// Cuts for several `q_a`, all averaged over the same realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub rows: Vec<CorrelationCurve>,
}

impl CorrelationMap {
    /// Mean and standard error at absolute momentum `q_b` in row `i`.
    pub fn value_at(&self, i: usize, q_b: f64, k: f64) -> (f64, f64) {
        let row = &self.rows[i];
        let j = row.index_of((q_b - row.q_a) / k);
        (row.values[j], row.std_errors[j])
    }
}

/// Per-worker buffers for [`Engine`].
pub struct Workspace {
    mask: Vec<Complex64>,
    pump: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Scratch,
}

/// A validated configuration with every kernel precomputed.
pub struct Engine {
    config: ScatterConfig,
    spectral: Spectral,
    synth: MaskSynthesizer,
    envelope: Vec<f64>,
    pump_kernel: Option<Vec<Complex64>>,
    arm_kernel: Vec<Complex64>,
    mid_kernel: Option<Vec<Complex64>>,
    positions: Vec<f64>,
}

impl Engine {
    pub fn new(config: ScatterConfig) -> Result<Self> {
        config.check_static()?;
        let grid = config.grid;
        let spectral = Spectral::new(grid);
        let synth = MaskSynthesizer::with_spectral(&spectral, &config.diffuser)?;
        let inv_n = 1.0 / grid.len() as f64;
        let (d, z, k) = (config.geometry.d(), config.geometry.z(), grid.k());
        let positions: Vec<f64> = (0..grid.len()).map(|i| grid.position_xy(i).0).collect();
        let (envelope, pump_kernel, arm_kernel, mid_kernel) = match config.geometry.variant() {
            Variant::Plus => {
                let env = (0..grid.len())
                    .map(|i| {
                        let (x, y) = grid.position_xy(i);
                        config.pump.envelope(x, y)
                    })
                    .collect();
                let pump = (z != 0.0).then(|| fresnel_kernel(&grid, z, 2.0 * k, inv_n));
                (env, pump, fresnel_kernel(&grid, d - z, k, inv_n), None)
            }
            Variant::Minus => {
                let mid = (z != 0.0).then(|| fresnel_kernel(&grid, 2.0 * z.abs(), k, inv_n));
                (Vec::new(), None, fresnel_kernel(&grid, d, k, inv_n), mid)
            }
        };
        Ok(Self {
            config,
            spectral,
            synth,
            envelope,
            pump_kernel,
            arm_kernel,
            mid_kernel,
            positions,
        })
    }

    pub fn config(&self) -> &ScatterConfig {
        &self.config
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.config.grid
    }

    pub fn workspace(&self) -> Workspace {
        let len = self.grid().len();
        Workspace {
            mask: vec![Complex64::default(); len],
            pump: vec![Complex64::default(); len],
            buf: vec![Complex64::default(); len],
            scratch: self.spectral.scratch(),
        }
    }

    pub fn synthesize(&self, seed: u64) -> DiffuserMask {
        self.synth.synthesize(seed)
    }

    fn check_mask(&self, mask: &DiffuserMask) -> Result<()> {
        if mask.at_omega.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn propagate(&self, data: &mut [Complex64], kernel: &[Complex64], scratch: &mut Scratch) {
        self.spectral.forward(data, scratch);
        data.iter_mut().zip(kernel).for_each(|(v, h)| *v *= h);
        self.spectral.inverse(data, scratch);
    }

    /// PLUS: `E = H^z(2k) [envelope * V^2]`, left in `ws.pump`.
    fn prepare_pump(&self, ws: &mut Workspace) {
        if self.config.geometry.variant() == Variant::Minus {
            return;
        }
        for ((p, v), e) in ws.pump.iter_mut().zip(&ws.mask).zip(&self.envelope) {
            *p = v * v * *e;
        }
        if let Some(kernel) = &self.pump_kernel {
            self.propagate(&mut ws.pump, kernel, &mut ws.scratch);
        }
    }

    /// Detection plane wave `exp(-i q_a x)` on the grid.
    fn plane(&self, qa: f64) -> Vec<Complex64> {
        self.positions
            .iter()
            .map(|x| Complex64::from_polar(1.0, -qa * x))
            .collect()
    }

    /// Detection mode `A_a`, left in `ws.buf`.
    fn detection_mode(&self, plane: &[Complex64], ws: &mut Workspace) {
        for ((b, v), f) in ws.buf.iter_mut().zip(&ws.mask).zip(plane) {
            *b = v * f;
        }
        let mut buf = std::mem::take(&mut ws.buf);
        self.propagate(&mut buf, &self.arm_kernel, &mut ws.scratch);
        if self.config.geometry.variant() == Variant::Minus {
            buf.iter_mut().zip(&ws.mask).for_each(|(b, v)| *b *= v);
            let z = self.config.geometry.z().abs();
            if z != 0.0 {
                let grid = self.grid();
                let leg = fresnel_kernel(grid, z, grid.k(), 1.0 / grid.len() as f64);
                self.propagate(&mut buf, &leg, &mut ws.scratch);
            }
        }
        ws.buf = buf;
    }

    /// Outgoing position-space field `G (E * A_a)`, left in `ws.buf`.
    fn pair_field(&self, plane: &[Complex64], ws: &mut Workspace) {
        let mut buf = std::mem::take(&mut ws.buf);
        match self.config.geometry.variant() {
            Variant::Plus => {
                ws.buf = buf;
                self.detection_mode(plane, ws);
                buf = std::mem::take(&mut ws.buf);
                buf.iter_mut().zip(&ws.pump).for_each(|(b, e)| *b *= e);
                self.propagate(&mut buf, &self.arm_kernel, &mut ws.scratch);
                buf.iter_mut().zip(&ws.mask).for_each(|(b, v)| *b *= v);
            }
            Variant::Minus => {
                // V H^d V H^{2|z|} V H^d V f_a
                for ((b, v), f) in buf.iter_mut().zip(&ws.mask).zip(plane) {
                    *b = v * f;
                }
                self.propagate(&mut buf, &self.arm_kernel, &mut ws.scratch);
                buf.iter_mut().zip(&ws.mask).for_each(|(b, v)| *b *= v);
                if let Some(mid) = &self.mid_kernel {
                    self.propagate(&mut buf, mid, &mut ws.scratch);
                }
                buf.iter_mut().zip(&ws.mask).for_each(|(b, v)| *b *= v);
                self.propagate(&mut buf, &self.arm_kernel, &mut ws.scratch);
                buf.iter_mut().zip(&ws.mask).for_each(|(b, v)| *b *= v);
            }
        }
        ws.buf = buf;
    }

    /// Momentum amplitudes `Psi(q_b; q_a)` for every lattice `q_b`, left in
    /// `ws.buf` in storage order.
    fn amplitude(&self, plane: &[Complex64], ws: &mut Workspace) {
        self.pair_field(plane, ws);
        let grid = *self.grid();
        let mut buf = std::mem::take(&mut ws.buf);
        self.spectral.forward(&mut buf, &mut ws.scratch);
        let cell = grid.cell();
        let n = grid.n();
        // centred positions: sum_j exp(-i q x_j) = (-1)^m sum_j exp(-i q j dx)
        for (idx, v) in buf.iter_mut().enumerate() {
            let parity = (idx % n + idx / n) & 1;
            *v *= if parity == 0 { cell } else { -cell };
        }
        ws.buf = buf;
    }

    fn lattice_qa(&self, qa: f64) -> Result<f64> {
        let grid = self.grid();
        let i = grid.momentum_index(qa)?;
        Ok(grid.momentum(i))
    }

    /// Transverse pump profile at the crystal.
    pub fn pump_at_crystal(&self, mask: &DiffuserMask) -> Result<ComplexField> {
        self.check_mask(mask)?;
        let grid = *self.grid();
        if self.config.geometry.variant() == Variant::Minus {
            return Ok(ComplexField::constant(grid, Complex64::new(1.0, 0.0)));
        }
        let mut ws = self.workspace();
        ws.mask.copy_from_slice(mask.at_omega.values());
        self.prepare_pump(&mut ws);
        Ok(ComplexField::from_parts(grid, ws.pump))
    }

    /// `G^T` applied to the detection plane wave `exp(-i q_a x)`, evaluated
    /// at the crystal plane.
    pub fn detection_mode_at_crystal(&self, mask: &DiffuserMask, q_a: f64) -> Result<ComplexField> {
        self.check_mask(mask)?;
        let qa = self.lattice_qa(q_a)?;
        let mut ws = self.workspace();
        ws.mask.copy_from_slice(mask.at_omega.values());
        self.detection_mode(&self.plane(qa), &mut ws);
        Ok(ComplexField::from_parts(*self.grid(), ws.buf))
    }

    /// Complex amplitudes over the whole `q_b` lattice (storage order).
    pub fn biphoton_cut(&self, mask: &DiffuserMask, q_a: f64) -> Result<ComplexField> {
        self.check_mask(mask)?;
        let qa = self.lattice_qa(q_a)?;
        let mut ws = self.workspace();
        ws.mask.copy_from_slice(mask.at_omega.values());
        self.prepare_pump(&mut ws);
        self.amplitude(&self.plane(qa), &mut ws);
        Ok(ComplexField::from_parts(*self.grid(), ws.buf))
    }

    /// Storage indices and relative angles of the reported cut at `q_a`.
    fn cut_bins(&self, qa: f64) -> (Vec<usize>, Vec<f64>) {
        let grid = self.grid();
        let k = grid.k();
        let window = self.config.theta_window.unwrap_or(f64::INFINITY);
        let mut bins: Vec<(f64, usize)> = (0..grid.n())
            .map(|i| ((grid.momentum(i) - qa) / k, i))
            .filter(|(t, _)| t.abs() <= window * (1.0 + 1e-12))
            .collect();
        bins.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (theta, idx) = bins.into_iter().unzip();
        (idx, theta)
    }

    /// Averages cuts at every `q_a` in `q_a_list` over the configured
    /// ensemble. All rows share the same realizations.
    pub fn average_map(&self, q_a_list: &[f64], threads: usize) -> Result<CorrelationMap> {
        let ens = self.config.ensemble;
        if ens.n_realizations < 2 {
            return Err(Error::TooFewRealizations {
                got: ens.n_realizations,
                min: 2,
            });
        }
        if q_a_list.is_empty() {
            return Err(invalid("q_a", "need at least one detection momentum"));
        }
        let qas = q_a_list
            .iter()
            .map(|q| self.lattice_qa(*q))
            .collect::<Result<Vec<_>>>()?;
        let layouts: Vec<(Vec<usize>, Vec<f64>)> = qas.iter().map(|q| self.cut_bins(*q)).collect();
        let planes: Vec<Vec<Complex64>> = qas.iter().map(|q| self.plane(*q)).collect();
        let offsets: Vec<usize> = layouts
            .iter()
            .scan(0, |acc, (idx, _)| {
                let start = *acc;
                *acc += idx.len();
                Some(start)
            })
            .collect();
        let total: usize = layouts.iter().map(|(idx, _)| idx.len()).sum();
        let stats = reduce_ensemble(
            ens.n_realizations,
            total,
            threads,
            || self.workspace(),
            |ws, i, out| {
                let seed = ens.seed(i);
                self.synth.fill(seed, &mut ws.mask, &mut ws.scratch);
                self.prepare_pump(ws);
                for ((plane, (idx, _)), off) in planes.iter().zip(&layouts).zip(&offsets) {
                    self.amplitude(plane, ws);
                    for (o, &j) in out[*off..*off + idx.len()].iter_mut().zip(idx) {
                        *o = ws.buf[j].norm_sqr();
                    }
                }
                #[cfg(debug_assertions)]
                if i % crate::stats::CHUNK == 0 {
                    self.debug_reciprocity(seed, qas[0], &planes[0], ws);
                }
            },
        )?;
        let mean = stats.mean();
        let se = stats.std_error();
        let rows = layouts
            .into_iter()
            .zip(offsets)
            .zip(&qas)
            .map(|(((idx, theta), off), qa)| CorrelationCurve {
                theta,
                values: mean[off..off + idx.len()].to_vec(),
                std_errors: se[off..off + idx.len()].to_vec(),
                n_realizations: ens.n_realizations,
                q_a: *qa,
            })
            .collect();
        Ok(CorrelationMap { rows })
    }

    pub fn average_cut(&self, q_a: f64, threads: usize) -> Result<CorrelationCurve> {
        Ok(self.average_map(&[q_a], threads)?.rows.remove(0))
    }

    #[cfg(debug_assertions)]
    fn debug_reciprocity(&self, seed: u64, qa: f64, plane: &[Complex64], ws: &mut Workspace) {
        let grid = *self.grid();
        let m = (seed % 64) as f64 - 32.0;
        let qb = grid.snap_momentum(qa + m * grid.dq());
        let ia = grid.momentum_index(qa).expect("lattice");
        let ib = grid.momentum_index(qb).expect("lattice");
        self.amplitude(plane, ws);
        let ab = ws.buf[ib];
        self.amplitude(&self.plane(qb), ws);
        let ba = ws.buf[ia];
        let scale = ab.norm().max(ba.norm()).max(f64::MIN_POSITIVE);
        debug_assert!(
            (ab - ba).norm() <= 1e-9 * scale,
            "reciprocity broken: {ab} vs {ba}"
        );
    }

    /// Largest relative mismatch `|Psi(b;a) - Psi(a;b)| / max(|Psi|)` over
    /// the given momentum pairs, for the realization with `seed`.
    pub fn reciprocity_error(&self, seed: u64, pairs: &[(f64, f64)]) -> Result<f64> {
        let grid = *self.grid();
        let mut ws = self.workspace();
        self.synth.fill(seed, &mut ws.mask, &mut ws.scratch);
        self.prepare_pump(&mut ws);
        let mut worst: f64 = 0.0;
        for &(p, q) in pairs {
            let (ip, iq) = (grid.momentum_index(p)?, grid.momentum_index(q)?);
            self.amplitude(&self.plane(grid.momentum(ip)), &mut ws);
            let pq = ws.buf[iq];
            self.amplitude(&self.plane(grid.momentum(iq)), &mut ws);
            let qp = ws.buf[ip];
            let scale = pq.norm().max(qp.norm());
            if scale > 0.0 {
                worst = worst.max((pq - qp).norm() / scale);
            }
        }
        Ok(worst)
    }
}

/// See [`Engine::pump_at_crystal`].
pub fn pump_at_crystal(config: &ScatterConfig, mask: &DiffuserMask) -> Result<ComplexField> {
    Engine::new(config.clone())?.pump_at_crystal(mask)
}

/// See [`Engine::detection_mode_at_crystal`].
pub fn detection_mode_at_crystal(
    config: &ScatterConfig,
    mask: &DiffuserMask,
    q_a: f64,
) -> Result<ComplexField> {
    Engine::new(config.clone())?.detection_mode_at_crystal(mask, q_a)
}

/// See [`Engine::biphoton_cut`].
pub fn biphoton_cut(config: &ScatterConfig, mask: &DiffuserMask, q_a: f64) -> Result<ComplexField> {
    Engine::new(config.clone())?.biphoton_cut(mask, q_a)
}

/// Mean and standard error of `|Psi(q_b; q_a)|^2` over the configured
/// ensemble. Bit-identical for any `threads`.
pub fn ensemble_average_cut(
    config: &ScatterConfig,
    q_a: f64,
    threads: usize,
) -> Result<CorrelationCurve> {
    Engine::new(config.clone())?.average_cut(q_a, threads)
}

/// Stacked cuts sharing one set of realizations.
pub fn ensemble_average_map(
    config: &ScatterConfig,
    q_a_list: &[f64],
    threads: usize,
) -> Result<CorrelationMap> {
    Engine::new(config.clone())?.average_map(q_a_list, threads)
}
