use thiserror::Error;

/// Errors raised by the solver, fitting and ROM layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("inadmissible state{} for {model}: {values:?}", cell_suffix(*.cell))]
    Inadmissible {
        model: &'static str,
        cell: Option<usize>,
        values: Vec<f64>,
    },

    #[error("entropy variables{} outside the admissible range for {model}: {values:?}", cell_suffix(*.cell))]
    InadmissibleEntropyVariables {
        model: &'static str,
        cell: Option<usize>,
        values: Vec<f64>,
    },

    #[error("logarithmic mean requires positive arguments, got ({0}, {1})")]
    LogMeanDomain(f64, f64),

    #[error("dissipation `{spec}` is not available for model {model}")]
    DissipationMismatch {
        spec: &'static str,
        model: &'static str,
    },

    #[error("tangent space is numerically singular (condition estimate {condition:e})")]
    SingularTangentSpace { condition: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn cell_suffix(cell: Option<usize>) -> String {
    match cell {
        Some(i) => format!(" in cell {i}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a cell index to admissibility errors that were raised without one.
    pub fn at_cell(self, index: usize) -> Self {
        match self {
            Error::Inadmissible { model, cell: None, values } => Error::Inadmissible {
                model,
                cell: Some(index),
                values,
            },
            Error::InadmissibleEntropyVariables { model, cell: None, values } => {
                Error::InadmissibleEntropyVariables {
                    model,
                    cell: Some(index),
                    values,
                }
            }
            other => other,
        }
    }

    /// Short machine-readable tag used in failure reports.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::Inadmissible { .. } => "inadmissible_state",
            Error::InadmissibleEntropyVariables { .. } => "inadmissible_projection",
            Error::LogMeanDomain(..) => "inadmissible_state",
            Error::SingularTangentSpace { .. } => "singular_tangent_space",
            Error::NonFinite(_) => "non_finite",
            Error::LengthMismatch { .. } | Error::InvalidArgument(_) => "invalid_argument",
            Error::DissipationMismatch { .. } => "invalid_argument",
            Error::Format(_) | Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, expected, got })
    }
}
