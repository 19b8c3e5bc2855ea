use thiserror::Error;

/// Errors raised across the crate. Variants carry enough context to locate the
/// offending site, edge or vertex.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid height profile: {0}")]
    InvalidProfile(String),

    #[error("encoding error: {0}")]
    Encode(String),

    #[error("decode error: {0}")]
    Decode(#[from] DecodeError),

    #[error("malformed key: {0}")]
    MalformedKey(String),

    #[error("capacity exceeded: {what} reached {count} (limit {limit})")]
    Capacity {
        what: &'static str,
        count: usize,
        limit: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("state is not normalized: squared norm {0}")]
    NotNormalized(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no deformation: {0}")]
    NoDeformation(String),

    #[error("emitter error: {0}")]
    Emitter(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("manifest error: {0}")]
    Manifest(String),
}

/// Structured decode failures naming the offending vertex `(i, t)` or edge `(a, b)`.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("Gauss law violated at vertex ({i}, {t}) with residual {residual}")]
    Gauss { i: usize, t: usize, residual: i32 },

    #[error("boundary spin wrong at edge ({a}, {b})")]
    Boundary { a: usize, b: usize },

    #[error("color {color} invalid at vertex ({i}, {t})")]
    Color { i: usize, t: usize, color: u8 },

    #[error("evaporated color does not match deposited color at vertex ({i}, {t})")]
    ColorMismatch { i: usize, t: usize },

    #[error("slope violated in spin row {row}")]
    Slope { row: usize },

    #[error("register count mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
