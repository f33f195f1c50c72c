use std::path::PathBuf;

use qsa_core::Error as CoreError;
use thiserror::Error;

/// Errors that stop a command before a report can be produced. All of them
/// map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("validation error ({invariant}) at `{path}`: {message}")]
    Validation {
        invariant: String,
        path: String,
        message: String,
    },
    #[error("command `{command}` does not accept the `{payload}` payload")]
    IncompatiblePayload { command: String, payload: String },
    #[error("command `{command}` needs the `{key}` section")]
    MissingSection { command: String, key: String },
}

impl CliError {
    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps a validation failure from the core library, naming the
    /// invariant it violated.
    pub fn validation(path: impl Into<String>, err: CoreError) -> Self {
        Self::Validation {
            invariant: invariant_name(&err),
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        2
    }
}

fn invariant_name(err: &CoreError) -> String {
    let name = match err {
        CoreError::InvalidDensity(msg) => return msg.split(':').next().unwrap_or("density").trim().to_string(),
        CoreError::DimensionMismatch(_) | CoreError::DimensionTooSmall { .. } => "dimension",
        CoreError::NonFinite => "finite",
        CoreError::NotHermitian { .. } => "hermitian",
        CoreError::NotIsometric { .. } | CoreError::NotUnitary { .. } => "unitarity",
        CoreError::InvalidOutcomeSpace(_) | CoreError::IncompatibleOutcomeSpaces => "outcomes",
        CoreError::InvalidMeasure(_) | CoreError::UnsupportedMeasure(_) | CoreError::NotAbsolutelyContinuous { .. } => {
            "measure"
        }
        CoreError::InvalidProjectionMeasure(_) | CoreError::NotAProjectionFamily(_) => "projection",
        CoreError::InvalidInstrument(_) => "completeness",
        CoreError::PointerOverlap { .. } => "pointers",
        CoreError::NotOrthonormal(_) => "orthonormality",
        CoreError::WeightMismatch(_) => "weights",
        CoreError::NotUnitaryMatrix(_) => "unitarity",
        CoreError::EmptySelection | CoreError::ZeroProbabilityEvent(_) => "probability",
        CoreError::MixedInitialState => "pure state",
    };
    name.to_string()
}
