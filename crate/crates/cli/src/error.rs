use std::io;
use std::path::PathBuf;

use mcoin_core::chain::StoreError;
use mcoin_core::codec::CodecError;
use mcoin_core::ValidationError;
use mcoin_simnet::SimError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("bad key file {}: {reason}", path.display())]
    BadKeyFile { path: PathBuf, reason: String },
    #[error("cannot resolve {0}")]
    Unresolvable(String),
    #[error("no signing key for {0}")]
    SigningKeyMissing(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IOError",
            CliError::BadInput(_) => "BadInput",
            CliError::BadKeyFile { .. } => "BadKeyFile",
            CliError::Unresolvable(_) => "UnresolvableInput",
            CliError::SigningKeyMissing(_) => "SigningKeyMissing",
            CliError::Codec(e) => e.code(),
            CliError::Validation(e) => e.code(),
            CliError::Store(e) => e.code(),
            CliError::Sim(e) => e.code(),
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
