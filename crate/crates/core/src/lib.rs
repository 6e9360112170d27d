//! Monte-Carlo wave optics for entangled photon pairs scattered by a thin
//! dynamic diffuser, plus the closed-form correlation functions used to
//! check it.
//!
//! Modules, bottom-up: [`model`] (grids, fields, specs, seeds), [`optics`]
//! (Fresnel propagation, diffuser masks), [`engine`] (two-photon
//! amplitudes and deterministic ensemble averages), [`theory`] (closed
//! forms) and [`analysis`] (normalization, widths, sweeps).

pub mod analysis;
pub mod engine;
pub mod error;
pub mod model;
pub mod optics;
pub mod spectral;
pub mod stats;
pub mod theory;

pub use engine::{
    biphoton_cut, detection_mode_at_crystal, ensemble_average_cut, ensemble_average_map,
    pump_at_crystal, CorrelationCurve, CorrelationMap, Engine, ScatterConfig, Warning,
};
pub use error::{Error, Result};
pub use model::{
    make_grid, realization_seed, ComplexField, DiffuserSpec, EnsembleSpec, GeometrySpec, PumpSpec,
    TransverseGrid, Variant,
};
pub use optics::{
    apply_mask, fresnel_propagate, mask_at_2omega, synthesize_diffuser, DiffuserMask,
};
pub use rustfft::num_complex::Complex64;
pub use theory::TheoryParams;
