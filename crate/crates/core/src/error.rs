use thiserror::Error;

/// Errors raised by the geometry, construction and measurement stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("symbol evaluation failure at {point}")]
    SymbolEvaluation { point: String },
    #[error("homogeneous norm undefined at zero section")]
    ZeroSection,
    #[error("degenerate Hamilton field (|H| = {norm:e})")]
    DegenerateHamiltonField { norm: f64 },
    #[error("left characteristic set at s = {s}")]
    LeftCharacteristicSet { s: f64 },
    #[error(
        "curve not near double characteristics; divergence test meaningless (kappa = {kappa})"
    )]
    NotNearDoubleCharacteristics { kappa: f64 },
    #[error("Lagrangean chart singularity at t={t}")]
    LagrangeanChartSingularity { t: f64 },
    #[error("characteristic crossing before t_end (t = {t})")]
    CharacteristicCrossing { t: f64 },
    #[error("eikonal reconstruction failure (residual {residual:e}, tolerance {tolerance:e})")]
    EikonalReconstruction { residual: f64, tolerance: f64 },
    #[error("normalization breakdown: |grad p| = {norm:e} at t = {t}")]
    NormalizationBreakdown { norm: f64, t: f64 },
    #[error("transport blow-up; check normalization of the start point")]
    TransportBlowUp,
    #[error("divergence condition too weak at this λ ({detail})")]
    DivergenceTooWeak { detail: String },
    #[error("incompatible discretizations: {detail}")]
    IncompatibleDiscretizations { detail: String },
    #[error("periodization aliasing risk (boundary/max = {ratio:e})")]
    PeriodizationAliasing { ratio: f64 },
    #[error("insufficient ladder ({points} points, need at least 4)")]
    InsufficientLadder { points: usize },
    #[error("quantization rank too low, increase J_sep (residual {residual:e})")]
    QuantizationRank { residual: f64 },
    #[error("degenerate report: zero denominator")]
    DegenerateReport,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
