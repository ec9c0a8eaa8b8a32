use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight rule produced non-positive value {value} at n = {n}")]
    NonPositiveWeight { n: usize, value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("index {n} outside of window [{lo}, {hi}]")]
    IndexOutOfWindow { n: usize, lo: usize, hi: usize },

    #[error("spectral parameter {z} lies within {distance:e} of the truncated spectrum")]
    NearSingular { z: Complex64, distance: f64 },

    #[error("energy {lambda} lies outside the gap window")]
    OutsideGap { lambda: f64 },

    #[error("epsilon {0} outside the admissible range")]
    BadEpsilon(f64),

    #[error("weights do not grow without bound (inf over tail stays at {tail_inf})")]
    NotUnbounded { tail_inf: f64 },

    #[error("Re z = {re} is not below the spectral bound d = {d}")]
    OutsideHalfLine { re: f64, d: f64 },

    #[error("|delta| = {delta} exceeds the admissible bound {bound}")]
    DeltaTooLarge { delta: f64, bound: f64 },

    #[error("|beta| = {beta} exceeds the admissible bound {bound}")]
    BetaTooLarge { beta: f64, bound: f64 },

    #[error("weight tail beyond n = {scan_n} cannot be certified")]
    UnverifiedTail { scan_n: usize },

    #[error("log-magnitude {0:e} overflowed the recurrence guard")]
    Overflow(f64),

    #[error("least-squares basis is degenerate (pivot ratio {0:e})")]
    DegenerateBasis(f64),

    #[error("fit window has {len} points, need at least {need}")]
    InsufficientWindow { len: usize, need: usize },

    #[error("barrier {k} overlaps its neighbour")]
    LayoutOverlap { k: usize },

    #[error("energy {energy} sits on the spectrum of block {k}")]
    OnBlockSpectrum { k: usize, energy: f64 },

    #[error("phase window condition fails: phi({x}) = {value} < {threshold}")]
    PhaseNotFound { x: f64, value: f64, threshold: f64 },

    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),

    #[error("operator must have zero diagonal for the barrier construction")]
    NonZeroDiagonal,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
