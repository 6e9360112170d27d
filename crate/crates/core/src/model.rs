//! Domain types shared by every stage: the transverse grid, complex fields,
//! the diffuser / geometry / pump / ensemble descriptions and the
//! counter-based seed derivation.
//!
//! Everything is SI internally. Callers that think in the dimensionless
//! `kd`, `theta0` parameterization can set `k = 1` and `d = kd`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Relative slack used when checking inequalities that are often met with
/// equality by construction (for example `dx = xi0 / 4`).
pub(crate) const RULE_SLACK: f64 = 1e-9;

/// Discretized transverse space, one or two axes of `n` points each.
///
/// Positions are centred, `x_j = (j - n/2) dx`; momenta follow the usual
/// discrete-frequency ordering `0, dq, .., (n/2-1) dq, -n/2 dq, .., -dq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseGrid {
    dim: usize,
    n: usize,
    dx: f64,
    k: f64,
}

impl TransverseGrid {
    pub fn new(dim: usize, n: usize, dx: f64, k: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid("dim", format!("must be 1 or 2, got {dim}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NonPowerOfTwo(n));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(invalid("dx", format!("must be positive, got {dx}")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(invalid("k", format!("must be positive, got {k}")));
        }
        Ok(Self { dim, n, dx, k })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Signal wavenumber `omega / c`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Total number of samples, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Window width `n dx` along each axis.
    pub fn window(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Momentum pitch `2 pi / (n dx)`.
    pub fn dq(&self) -> f64 {
        2.0 * PI / self.window()
    }

    /// Area (or length in 1D) of one sample cell.
    pub fn cell(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    pub fn position(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.dx
    }

    /// Momentum of lattice index `i` along one axis. This is the only place
    /// the frequency ordering is defined.
    pub fn momentum(&self, i: usize) -> f64 {
        let signed = if i < self.n / 2 {
            i as isize
        } else {
            i as isize - self.n as isize
        };
        signed as f64 * self.dq()
    }

    pub fn momentum_axis(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.momentum(i)).collect()
    }

    /// Lattice index of momentum `q`, which must sit on the lattice to
    /// within `1e-6 dq`.
    pub fn momentum_index(&self, q: f64) -> Result<usize> {
        let m = q / self.dq();
        let rounded = m.round();
        if !m.is_finite() || (m - rounded).abs() > 1e-6 {
            return Err(Error::OffLattice(q));
        }
        let half = (self.n / 2) as f64;
        if rounded < -half || rounded >= half {
            return Err(Error::OffLattice(q));
        }
        let m = rounded as isize;
        Ok(if m >= 0 {
            m as usize
        } else {
            (m + self.n as isize) as usize
        })
    }

    /// Nearest lattice momentum to `q`.
    pub fn snap_momentum(&self, q: f64) -> f64 {
        let half = (self.n / 2) as f64;
        (q / self.dq()).round().clamp(-half, half - 1.0) * self.dq()
    }

    /// `|q|^2` for flat storage index `idx` (row-major, x fastest).
    pub(crate) fn momentum_sq(&self, idx: usize) -> f64 {
        match self.dim {
            1 => self.momentum(idx).powi(2),
            _ => {
                let qx = self.momentum(idx % self.n);
                let qy = self.momentum(idx / self.n);
                qx * qx + qy * qy
            }
        }
    }

    /// `(x, y)` position of flat index `idx`; `y = 0` in 1D.
    pub(crate) fn position_xy(&self, idx: usize) -> (f64, f64) {
        match self.dim {
            1 => (self.position(idx), 0.0),
            _ => (self.position(idx % self.n), self.position(idx / self.n)),
        }
    }
}

/// Builds a grid; see [`TransverseGrid::new`].
pub fn make_grid(dim: usize, n: usize, dx: f64, k: f64) -> Result<TransverseGrid> {
    TransverseGrid::new(dim, n, dx, k)
}

/// Complex scalar field sampled on a grid. Depending on context the values
/// are position samples (pump, masks, detection modes) or momentum-lattice
/// amplitudes in storage order (biphoton cuts).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: TransverseGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: TransverseGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: values.len(),
                expected: grid.len(),
            });
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: TransverseGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: TransverseGrid, value: Complex64) -> Self {
        Self::from_parts(grid, vec![value; grid.len()])
    }

    /// Samples `f(x, y)` on the grid (`y` is always 0 in 1D).
    pub fn from_fn(grid: TransverseGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.position_xy(idx);
                f(x, y)
            })
            .collect();
        Self::from_parts(grid, values)
    }

    /// Plane wave `exp(i q x)` along the first axis.
    pub fn plane_wave(grid: TransverseGrid, q: f64) -> Self {
        Self::from_fn(grid, |x, _| Complex64::from_polar(1.0, q * x))
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `sum |v|^2 dx^dim`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell()
    }
}

/// Thin diffuser with Gaussian angular scattering of width `theta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffuserSpec {
    theta0: f64,
    k: f64,
}

impl DiffuserSpec {
    pub fn new(theta0: f64, k: f64) -> Result<Self> {
        if !(theta0.is_finite() && theta0 > 0.0) {
            return Err(invalid("theta0", format!("must be positive, got {theta0}")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(invalid("k", format!("must be positive, got {k}")));
        }
        Ok(Self { theta0, k })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Transverse correlation width `1 / (k theta0)`.
    pub fn xi0(&self) -> f64 {
        1.0 / (self.k * self.theta0)
    }

    /// Longitudinal coherence length `1 / (k theta0^2)`.
    pub fn z0(&self) -> f64 {
        1.0 / (self.k * self.theta0 * self.theta0)
    }
}

/// Which side of the diffuser the crystal sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Crystal after the diffuser: the pump is scattered, `z >= 0`.
    Plus,
    /// Crystal before the diffuser: plane-wave pump, `z <= 0`.
    Minus,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Plus => "plus",
            Variant::Minus => "minus",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Variant::Plus),
            "minus" | "-" => Ok(Variant::Minus),
            other => Err(invalid(
                "variant",
                format!("expected plus|minus, got `{other}`"),
            )),
        }
    }
}

/// Round-trip distance `d` (twice the diffuser-mirror spacing) and signed
/// crystal position `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySpec {
    d: f64,
    z: f64,
    variant: Variant,
}

impl GeometrySpec {
    pub fn new(d: f64, z: f64, variant: Variant) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(invalid("d", format!("must be positive, got {d}")));
        }
        if !z.is_finite() {
            return Err(invalid("z", "must be finite"));
        }
        let slack = RULE_SLACK * d;
        match variant {
            Variant::Plus if z < -slack || z > 0.5 * d + slack => Err(Error::Geometry {
                z,
                variant: "plus",
                rule: "0 <= z <= d/2",
            }),
            Variant::Minus if z > slack => Err(Error::Geometry {
                z,
                variant: "minus",
                rule: "z <= 0",
            }),
            _ => Ok(Self {
                d,
                z: z.clamp(
                    if variant == Variant::Plus {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    },
                    if variant == Variant::Plus {
                        0.5 * d
                    } else {
                        0.0
                    },
                ),
                variant,
            }),
        }
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn z_over_d(&self) -> f64 {
        self.z / self.d
    }

    /// `z / z0` for the given coherence length.
    pub fn z_tilde(&self, z0: f64) -> f64 {
        self.z / z0
    }
}

/// Gaussian pump at `2k` with 1/e^2 intensity radius `waist`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    pub waist: f64,
    /// Accept waists below `30 xi0` (reported as a warning instead).
    pub allow_narrow: bool,
}

impl PumpSpec {
    pub fn new(waist: f64) -> Result<Self> {
        if !(waist.is_finite() && waist > 0.0) {
            return Err(invalid("waist", format!("must be positive, got {waist}")));
        }
        Ok(Self {
            waist,
            allow_narrow: false,
        })
    }

    pub fn allow_narrow(mut self, allow: bool) -> Self {
        self.allow_narrow = allow;
        self
    }

    /// Amplitude envelope `exp(-r^2 / waist^2)`.
    pub fn envelope(&self, x: f64, y: f64) -> f64 {
        (-(x * x + y * y) / (self.waist * self.waist)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn new(n_realizations: usize, master_seed: u64) -> Self {
        Self {
            n_realizations,
            master_seed,
        }
    }

    pub fn seed(&self, index: usize) -> u64 {
        realization_seed(self.master_seed, index as u64)
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of realization `index` under `master_seed`.
///
/// A composition of bijections on `u64` (the SplitMix64 finalizer, a xor
/// and an odd-constant offset), so distinct indices always map to distinct
/// seeds for a fixed master seed. Pure: independent of call order and
/// thread.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    mix64(master_seed ^ mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA)))
}
