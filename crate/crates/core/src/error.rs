use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid size n = {0} is not a power of two")]
    NonPowerOfTwo(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sampling rule violated: dx = {dx:.6e} m exceeds xi0/4 = {limit:.6e} m")]
    Sampling { dx: f64, limit: f64 },

    #[error(
        "guard band violated: {fraction:.3e} of the field energy reaches the outer 10% of the \
         window (limit {limit:.0e}); enlarge the window or shrink the pump"
    )]
    GuardBand { fraction: f64, limit: f64 },

    #[error("window {window:.6e} m is smaller than pump waist + 4 d theta0 = {required:.6e} m")]
    WindowTooSmall { window: f64, required: f64 },

    #[error(
        "crystal position z = {z:.6e} m is invalid for the {variant} variant: requires {rule}"
    )]
    Geometry {
        z: f64,
        variant: &'static str,
        rule: &'static str,
    },

    #[error("pump waist {waist:.6e} m is below 30 xi0 = {limit:.6e} m (set allow_narrow_pump to override)")]
    NarrowPump { waist: f64, limit: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has {got} samples, grid expects {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("momentum {0:.6e} rad/m is not on the grid's momentum lattice")]
    OffLattice(f64),

    #[error("need at least {min} realizations, got {got}")]
    TooFewRealizations { got: usize, min: usize },

    #[error("curves are sampled on different angle axes")]
    AxisMismatch,

    #[error("curve has zero (or non-finite) area")]
    ZeroArea,

    #[error("curve maximum sits at the edge of the axis")]
    PeakAtEdge,

    #[error("no half-maximum crossing on the {0} side of the peak")]
    NoCrossing(&'static str),

    #[error("only {got} background samples available, need at least {min}")]
    InsufficientBackground { got: usize, min: usize },

    #[error("{0}")]
    Degenerate(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
