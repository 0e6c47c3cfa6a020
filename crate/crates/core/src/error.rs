use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate domain")]
    DegenerateDomain,

    #[error("complement required")]
    ComplementRequired,

    #[error("resolution exhausted: intervals of length {length} are below grid spacing {spacing}")]
    ResolutionExhausted { length: f64, spacing: f64 },

    #[error("empty mask")]
    EmptyMask,

    #[error("mask is bound to grid {mask} but was used with grid {grid}")]
    GridMismatch { mask: u64, grid: u64 },

    #[error("exponent above merge threshold: {exponent} >= {threshold}")]
    ExponentAboveThreshold { exponent: f64, threshold: f64 },

    #[error("cover does not cover x0")]
    CoverMissesCenter,

    #[error("plate escapes environment")]
    PlateEscapesEnvironment,

    #[error("exponent below codimension threshold: s = {s} <= Q - p = {threshold}")]
    BelowCodimension { s: f64, threshold: f64 },

    #[error("requires p < Q (p = {p}, Q = {dim})")]
    RequiresSubcriticalExponent { p: f64, dim: usize },

    #[error("uniform perfectness undefined for singletons")]
    Singleton,

    #[error("p outside the sharpness window: need {lower} < p < {upper}, got p = {p}")]
    OutsideSharpWindow { p: f64, lower: f64, upper: f64 },

    #[error("trivial function")]
    TrivialFunction,

    #[error("function does not vanish outside the domain")]
    NotVanishingOutside,

    #[error("m must exceed 4, got {0}")]
    AnnulusRatioTooSmall(f64),

    #[error("annulus not contained in the domain")]
    AnnulusNotInDomain,

    #[error("K not compactly contained")]
    NotCompactlyContained,

    #[error("dyadic level {0} out of range")]
    LevelOverflow(i32),

    #[error("window exceeds bounding box")]
    WindowOutOfBounds,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the geometry of a fixture rather than by I/O or
    /// malformed input.
    pub fn is_fixture_error(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Io(_))
    }
}
