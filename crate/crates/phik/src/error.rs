use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver blew up at t = {time} (alpha = {alpha}, {modes} modes, {integrator})")]
    BlowUp {
        alpha: f64,
        modes: usize,
        time: f64,
        integrator: &'static str,
    },

    #[error("invalid input: {0}")]
    Inputs(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] phik_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 solver, 4 inputs, 5 numerics.
    pub fn exit_code(&self) -> i32 {
        use phik_core::Error as C;
        match self {
            Error::Config(_) => 2,
            Error::BlowUp { .. } => 3,
            Error::Inputs(_) | Error::Io { .. } => 4,
            Error::Core(e) => match e {
                C::NotPositiveDefinite { .. }
                | C::NegativeDiagonal { .. }
                | C::Singular { .. }
                | C::NotSymmetric { .. }
                | C::NonFinite(_) => 5,
                _ => 4,
            },
        }
    }
}
