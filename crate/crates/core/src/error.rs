use thiserror::Error;

/// Failures surfaced by the library.
///
/// The three variants map one-to-one onto the CLI exit statuses: input
/// problems (1), refusals because a configured budget would be exceeded (2),
/// and numerical solver failures, which are reported as refusals as well.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("budget exceeded: {what} needs {needed} but the budget is {budget}")]
    Budget {
        what: String,
        needed: String,
        budget: u64,
    },

    #[error("solver failure: {0}")]
    Solver(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn budget(what: impl Into<String>, needed: impl ToString, budget: u64) -> Self {
        Error::Budget {
            what: what.into(),
            needed: needed.to_string(),
            budget,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
