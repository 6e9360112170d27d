use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pairscatter_cli::commands::{self, Preset};
use pairscatter_cli::config::{Overrides, RunConfig};
use pairscatter_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "pairscatter",
    version,
    about = "Two-photon scattering by a thin diffuser: simulation and theory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form correlation curve on the simulation's angle axis.
    Theory(Common),
    /// Ensemble-averaged correlation cut.
    Simulate(Common),
    /// Peak width and amplitude versus crystal position.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated crystal positions in units of z0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z_list: Option<Vec<f64>>,
    },
    /// Mask statistics, propagator accuracy and guard-band report.
    Validate(Common),
    /// Figure bundles: fig4c, fig5c, fig6, fig7 or map.
    Reproduce {
        preset: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    kd: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long, conflicts_with = "z_over_z0", allow_hyphen_values = true)]
    z_over_d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    z_over_z0: Option<f64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Detection momentum of the fixed detector, rad/m.
    #[arg(long, allow_hyphen_values = true)]
    qa: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            variant: self.variant.clone(),
            kd: self.kd,
            theta0: self.theta0,
            z_over_d: self.z_over_d,
            z_over_z0: self.z_over_z0,
            realizations: self.realizations,
            seed: self.seed,
            threads: self.threads,
            qa: self.qa,
        });
        Ok(cfg)
    }
}

fn report_manifest(m: &pairscatter_cli::output::RunManifest) {
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    for f in &m.files {
        println!("{}  {}", f.sha256, f.path);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Theory(c) => {
            let m = commands::theory(&c.resolve()?, &c.out)?;
            report_manifest(&m);
        }
        Command::Simulate(c) => {
            let (m, summary) = commands::simulate(&c.resolve()?, &c.out)?;
            report_manifest(&m);
            if let Some(s) = summary {
                println!(
                    "fwhm {:.6e} +- {:.2e} rad (theory {:.6e}), peak {:.6e}",
                    s.fwhm.value, s.fwhm.uncertainty, s.theory_fwhm, s.amplitude.value
                );
            }
        }
        Command::Sweep { common, z_list } => {
            let (m, _) = commands::sweep(&common.resolve()?, z_list.as_deref(), &common.out)?;
            report_manifest(&m);
        }
        Command::Validate(c) => {
            let (m, report) = commands::validate(&c.resolve()?, &c.out)?;
            print!("{}", report.render());
            report_manifest(&m);
            if !report.rules_ok {
                return Err(CliError::Config("configuration rules violated".into()));
            }
            if !report.passed() {
                return Err(CliError::Validation("one or more checks failed".into()));
            }
        }
        Command::Reproduce { preset, common } => {
            let preset: Preset = preset.parse()?;
            let m = commands::reproduce(&common.resolve()?, preset, &common.out)?;
            report_manifest(&m);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
