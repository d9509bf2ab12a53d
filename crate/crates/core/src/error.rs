use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("empty ROI: {roi}")]
    EmptyRoi { roi: String },
    #[error("unknown label {label} ({context})")]
    UnknownLabel { label: u32, context: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("assembly error: missing {missing:?} for subject {subject}")]
    Assembly {
        subject: String,
        missing: Vec<String>,
    },
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("grid search failed: {0}")]
    SearchFailed(String),
    #[error("enumeration cap exceeded: pool size {size} > 16; truncate the pool")]
    EnumerationCap { size: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
