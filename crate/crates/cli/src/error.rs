use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    /// A solution or data file that could not be read back.
    #[error("ingestion error in {file}: {detail}")]
    Ingest { file: String, detail: String },
    /// A stage failed; the module error is kept verbatim.
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        source: kinrep::error::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn stage<T>(name: &'static str, r: kinrep::error::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::Stage {
        stage: name,
        source,
    })
}
