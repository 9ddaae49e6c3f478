use std::fmt::Display;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NonConvergence(_) => 2,
            CliError::Invariant(_) | CliError::Io(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    pub fn io(e: impl Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn invariant(e: impl Display) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<nash_core::variety::VarietyError> for CliError {
    fn from(e: nash_core::variety::VarietyError) -> Self {
        use nash_core::variety::VarietyError as V;
        match e {
            V::Newton(_) | V::ResidualTooLarge(_) | V::TangentDimension(_) => CliError::NonConvergence(e.to_string()),
            V::Invariant(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<nash_core::nash::NashError> for CliError {
    fn from(e: nash_core::nash::NashError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<nash_core::operator::OperatorError> for CliError {
    fn from(e: nash_core::operator::OperatorError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<nash_core::tfim::TfimError> for CliError {
    fn from(e: nash_core::tfim::TfimError) -> Self {
        use nash_core::tfim::TfimError as T;
        match e {
            T::ClosedFormMismatch(..) => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<nash_core::qpd::QpdError> for CliError {
    fn from(e: nash_core::qpd::QpdError) -> Self {
        use nash_core::qpd::QpdError as Q;
        match e {
            Q::Variety(v) => v.into(),
            Q::OffVariety(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
