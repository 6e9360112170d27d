use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] pairscatter_core::Error),

    #[error("numerical validation failed: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot serialize manifest: {0}")]
    Serialize(#[from] toml::ser::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for rejected input, 3 for failed numerical checks, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        use pairscatter_core::Error as E;
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Io { .. } | CliError::Serialize(_) => 4,
            CliError::Model(e) => match e {
                E::NonPowerOfTwo(_)
                | E::InvalidParameter { .. }
                | E::Sampling { .. }
                | E::GuardBand { .. }
                | E::WindowTooSmall { .. }
                | E::Geometry { .. }
                | E::NarrowPump { .. }
                | E::OffLattice(_)
                | E::TooFewRealizations { .. } => 2,
                E::NonFinite
                | E::ZeroArea
                | E::PeakAtEdge
                | E::NoCrossing(_)
                | E::InsufficientBackground { .. }
                | E::Degenerate(_) => 3,
                E::GridMismatch | E::LengthMismatch { .. } | E::AxisMismatch => 4,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
