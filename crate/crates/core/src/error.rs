use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {time} is not a non-negative multiple of the cell width {cell_width}")]
    NotGridAligned { time: f64, cell_width: f64 },

    #[error("invalid age grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("indicator interval requires a < b, got a = {a}, b = {b}")]
    EmptyInterval { a: f64, b: f64 },

    #[error("invalid step forcing: {0}")]
    InvalidForcing(String),

    #[error("time {t} lies outside [{start}, {end}]")]
    OutsideRange { t: f64, start: f64, end: f64 },

    #[error("state is not in the invariant set (distance {distance:e})")]
    NotInSet { distance: f64 },

    #[error("mortality sup-norm is zero; no step bound exists")]
    ZeroMortality,

    #[error("step-size collapse at t = {time}: no trial step >= {eta_min} passes the knot conditions ({reason})")]
    StepCollapse {
        time: f64,
        eta_min: f64,
        reason: String,
    },

    #[error("correction norm {norm:e} exceeds eps/2 = {bound:e} at t = {time} with the minimal step")]
    CorrectionTooLarge { time: f64, norm: f64, bound: f64 },

    #[error("run did not reach the horizon (terminated by {0})")]
    Incomplete(String),

    #[error("picard iteration is not contracting (ratios {ratios:?})")]
    NonContraction { ratios: Vec<f64> },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
