//! Run configuration: a TOML file with `[model]`, `[grid]`, `[run]` and
//! `[presets]` sections, overridden by command-line flags.

use std::f64::consts::TAU;
use std::path::Path;

use pairscatter_core::{
    make_grid, DiffuserSpec, EnsembleSpec, GeometrySpec, PumpSpec, ScatterConfig, TransverseGrid,
    Variant,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Photon wavelength at `omega`, metres.
    pub wavelength: f64,
    pub kd: f64,
    pub theta0: f64,
    pub variant: String,
    pub z_over_d: Option<f64>,
    pub z_over_z0: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            wavelength: 810e-9,
            kd: 5697.0,
            theta0: 0.56,
            variant: "plus".into(),
            z_over_d: None,
            z_over_z0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    pub dx_over_xi0: f64,
    pub waist_over_xi0: f64,
    pub allow_narrow_pump: bool,
    /// Half-width of the reported cut around `theta_a`.
    pub theta_window_over_theta0: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 1 << 17,
            dx_over_xi0: 0.25,
            waist_over_xi0: 100.0,
            allow_narrow_pump: false,
            theta_window_over_theta0: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub realizations: usize,
    pub seed: u64,
    pub threads: usize,
    /// Detection momentum of the fixed detector, rad/m.
    pub qa: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            realizations: 10_000,
            seed: 1,
            threads: 1,
            qa: 0.0,
        }
    }
}

/// Crystal positions used by `sweep` and `reproduce`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetSection {
    pub fig4c_z_over_d: Vec<f64>,
    pub fig5c_z_over_z0: Vec<f64>,
    pub fig6_plus_z_over_d: Vec<f64>,
    pub fig6_minus_z_over_z0: Vec<f64>,
    pub fig7_z_over_z0: Vec<f64>,
    pub map_theta_a_over_theta0: Vec<f64>,
    /// List for the plain `sweep` command, in units of `z0`.
    pub sweep_z_over_z0: Vec<f64>,
}

impl Default for PresetSection {
    fn default() -> Self {
        Self {
            fig4c_z_over_d: vec![0.0, 0.25, 0.5],
            fig5c_z_over_z0: vec![0.0, -1.0, -3.0],
            fig6_plus_z_over_d: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            fig6_minus_z_over_z0: vec![0.0, -0.5, -1.0, -1.5, -2.0, -2.5, -3.0, -4.0, -6.0, -10.0],
            fig7_z_over_z0: vec![0.0, -1.0, -10.0],
            map_theta_a_over_theta0: vec![-0.5, -0.25, 0.0, 0.25, 0.5],
            sweep_z_over_z0: vec![0.0, -1.0, -2.0, -3.0, -4.0, -10.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub run: RunSection,
    pub presets: PresetSection,
}

/// Flag values; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub variant: Option<String>,
    pub kd: Option<f64>,
    pub theta0: Option<f64>,
    pub z_over_d: Option<f64>,
    pub z_over_z0: Option<f64>,
    pub realizations: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub qa: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|message| CliError::ConfigFile {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let m = &mut self.model;
        if let Some(v) = &o.variant {
            m.variant = v.clone();
        }
        if let Some(v) = o.kd {
            m.kd = v;
        }
        if let Some(v) = o.theta0 {
            m.theta0 = v;
        }
        if let Some(v) = o.z_over_d {
            m.z_over_d = Some(v);
            m.z_over_z0 = None;
        }
        if let Some(v) = o.z_over_z0 {
            m.z_over_z0 = Some(v);
            m.z_over_d = None;
        }
        let r = &mut self.run;
        if let Some(v) = o.realizations {
            r.realizations = v;
        }
        if let Some(v) = o.seed {
            r.seed = v;
        }
        if let Some(v) = o.threads {
            r.threads = v;
        }
        if let Some(v) = o.qa {
            r.qa = v;
        }
    }

    pub fn variant(&self) -> Result<Variant> {
        self.model
            .variant
            .parse()
            .map_err(|e: pairscatter_core::Error| CliError::Config(e.to_string()))
    }

    pub fn k(&self) -> Result<f64> {
        let w = self.model.wavelength;
        if !(w.is_finite() && w > 0.0) {
            return Err(CliError::Config(format!(
                "model.wavelength must be positive, got {w}"
            )));
        }
        Ok(TAU / w)
    }

    pub fn diffuser(&self) -> Result<DiffuserSpec> {
        Ok(DiffuserSpec::new(self.model.theta0, self.k()?)?)
    }

    pub fn d(&self) -> Result<f64> {
        let kd = self.model.kd;
        if !(kd.is_finite() && kd > 0.0) {
            return Err(CliError::Config(format!(
                "model.kd must be positive, got {kd}"
            )));
        }
        Ok(kd / self.k()?)
    }

    /// Converts a position in units of `z0` to metres.
    pub fn z_from_z0(&self, z_over_z0: f64) -> Result<f64> {
        Ok(z_over_z0 * self.diffuser()?.z0())
    }

    pub fn z(&self) -> Result<f64> {
        match (self.model.z_over_d, self.model.z_over_z0) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "set only one of model.z_over_d and model.z_over_z0".into(),
            )),
            (Some(f), None) => Ok(f * self.d()?),
            (None, Some(t)) => self.z_from_z0(t),
            (None, None) => Ok(0.0),
        }
    }

    pub fn grid(&self) -> Result<TransverseGrid> {
        let g = &self.grid;
        if !(g.dim == 1 || g.dim == 2) {
            return Err(CliError::Config(format!(
                "grid.dim must be 1 or 2, got {}",
                g.dim
            )));
        }
        let xi0 = self.diffuser()?.xi0();
        Ok(make_grid(g.dim, g.n, g.dx_over_xi0 * xi0, self.k()?)?)
    }

    /// The engine configuration at crystal position `z` (metres).
    pub fn scatter_at(&self, z: f64) -> Result<ScatterConfig> {
        let diffuser = self.diffuser()?;
        let grid = self.grid()?;
        let pump = PumpSpec::new(self.grid.waist_over_xi0 * diffuser.xi0())?
            .allow_narrow(self.grid.allow_narrow_pump);
        let w = self.grid.theta_window_over_theta0;
        if !(w.is_finite() && w > 0.0) {
            return Err(CliError::Config(format!(
                "grid.theta_window_over_theta0 must be positive, got {w}"
            )));
        }
        if self.run.threads == 0 {
            return Err(CliError::Config("run.threads must be at least 1".into()));
        }
        Ok(ScatterConfig {
            grid,
            geometry: GeometrySpec::new(self.d()?, z, self.variant()?)?,
            diffuser,
            pump,
            ensemble: EnsembleSpec::new(self.run.realizations, self.run.seed),
            theta_window: Some(w * self.model.theta0),
        })
    }

    pub fn scatter(&self) -> Result<ScatterConfig> {
        self.scatter_at(self.z()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::parse("[model]\nkd = 400.0\nvariant = \"minus\"\n").unwrap();
        assert_eq!(c.model.kd, 400.0);
        assert_eq!(c.model.theta0, 0.56);
        assert_eq!(c.variant().unwrap(), Variant::Minus);
        assert!(RunConfig::parse("[model]\nkdd = 1.0\n").is_err());
    }

    #[test]
    fn flags_win_and_z_forms_exclude() {
        let mut c = RunConfig::parse("[model]\nz_over_d = 0.25\n[run]\nseed = 5\n").unwrap();
        c.apply(&Overrides {
            z_over_z0: Some(2.0),
            seed: Some(9),
            ..Default::default()
        });
        assert_eq!(c.run.seed, 9);
        assert_eq!(c.model.z_over_d, None);
        let z0 = c.diffuser().unwrap().z0();
        assert!((c.z().unwrap() - 2.0 * z0).abs() < 1e-15);

        c.model.z_over_d = Some(0.1);
        assert!(matches!(c.z(), Err(CliError::Config(_))));
    }

    #[test]
    fn lengths_follow_kd_and_theta0() {
        let c = RunConfig::default();
        let k = c.k().unwrap();
        assert!((c.d().unwrap() * k - 5697.0).abs() < 1e-9);
        let s = c.scatter().unwrap();
        assert!((s.grid.dx() * k * 0.56 - 0.25).abs() < 1e-12);
        assert_eq!(s.theta_window, Some(3.0 * 0.56));
    }
}
