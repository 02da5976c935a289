use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {0} is the outage mode and has no BER model")]
    OutageMode(usize),

    #[error("BER target {target} is outside (0, {coeff}] for mode {mode}")]
    TargetOutOfRange { mode: usize, target: f64, coeff: f64 },

    #[error("fit needs at least two samples with distinct SNIR values")]
    InsufficientSamples,

    #[error("sample (gamma={gamma}, ber={ber}) is invalid: BER must lie in (0, 1) and gamma must be finite")]
    InvalidSample { gamma: f64, ber: f64 },

    #[error("fitted decay {0} is not positive")]
    NonPhysicalFit(f64),

    #[error("table line {line}: {msg}")]
    TableParse { line: usize, msg: String },

    #[error("invalid mode table: {0}")]
    InvalidTable(String),

    #[error("scenario line {line}: {msg}")]
    ScenarioParse { line: usize, msg: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid region grid: {0}")]
    InvalidGrid(String),

    #[error("exhaustive search needs {count:.3e} assignments, above the limit of {limit}")]
    SearchTooLarge { count: f64, limit: u64 },

    #[error("policy does not match its inputs: {0}")]
    PolicyMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
