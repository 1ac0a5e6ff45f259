use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An index or state outside the model's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario, agent or experiment definition that cannot be run.
    #[error("configuration error: {0}")]
    Config(String),

    /// Joint-state enumeration would exceed the configured key budget.
    #[error("state space too large: {required} keys exceed the cap of {cap}")]
    StateSpace { required: f64, cap: u64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    /// A single simulation run failed inside an experiment.
    #[error("run with seed {seed} ({agent} on {scenario}): {source}")]
    Run {
        seed: u64,
        agent: String,
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            context: context.into(),
            source,
        }
    }
}
