use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse { origin: String, line: usize, column: usize, message: String },
    #[error("unknown {kind} `{name}` in the catalog")]
    UnknownCatalogName { kind: &'static str, name: String },
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: String, value: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Geometry(#[from] affine_core::GeomError),
}
