use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run, grid or parameter configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A closed-form law or operator was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The discrete density reached zero or below.
    #[error("vacuum breach at cell {cell} (x = {x}) at t = {t}: rho = {rho}")]
    VacuumBreach { cell: usize, x: f64, t: f64, rho: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl Error {
    /// Process exit status: 1 for configuration problems, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 2,
            _ => 1,
        }
    }
}
