use thiserror::Error;

/// Errors produced by the engines.
///
/// The variants split into two families that the CLI maps onto distinct exit
/// codes: validation problems with the input, and size caps that an exact
/// engine refuses to exceed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: ground set of size {n} exceeds the cap of {cap}")]
    TooLarge { what: &'static str, n: usize, cap: usize },

    #[error("mask {mask:#x} is out of range for a ground set of size {n}")]
    MaskOutOfRange { mask: u64, n: usize },

    #[error("marginal p[{index}] = {value} is outside [0, 1]")]
    InvalidMarginal { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("simplex exceeded its iteration cap of {0}")]
    IterationCap(usize),

    #[error("closed form ({closed}) and LP ({lp}) disagree for decision '{label}'")]
    ClosedFormMismatch { label: String, closed: f64, lp: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn is_size_cap(&self) -> bool {
        matches!(self, Error::TooLarge { .. })
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MaskOutOfRange { .. } | Error::InvalidMarginal { .. } | Error::Invalid(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_cap(what: &'static str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::TooLarge { what, n, cap })
    } else {
        Ok(())
    }
}
