use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("Kac normalization is undefined for nearest-neighbor couplings")]
    KacUndefined,

    #[error("{n} sites exceeds the limit of {max} for {what}")]
    TooLarge { what: &'static str, n: usize, max: usize },

    #[error("exponential fit reached max error {achieved:.3e} with {terms} terms (tolerance {tol:.3e})")]
    FitNotConverged { tol: f64, achieved: f64, terms: usize },

    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),

    #[error("Krylov exponential did not converge: residual {residual:.3e} with {dim} vectors after {splits} step splits")]
    Krylov { residual: f64, dim: usize, splits: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("minimum not bracketed: {0}")]
    Bracket(String),

    #[error("collapse quality undefined: {0}")]
    CollapseUndefined(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("observer '{name}' failed at t = {t}: {source}")]
    Observer {
        name: String,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<ndarray::ShapeError> for Error {
    fn from(e: ndarray::ShapeError) -> Self {
        Error::Linalg(e.to_string())
    }
}
