use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("pair {pair} spends no source energy (zero utility denominator)")]
    DegenerateStrategy { pair: usize },

    #[error("pair {pair} has a zero uplink or downlink time fraction")]
    DegenerateTime { pair: usize },

    #[error("pair {pair} has zero data power on a hop")]
    DegeneratePower { pair: usize },

    #[error("recovered source power {power} mW exceeds the cap {cap} mW for pair {pair}")]
    CapViolation { pair: usize, power: f64, cap: f64 },

    #[error("no room for the harvest phase: {num_pairs} pairs x theta0 {theta0} >= 1")]
    InfeasibleTime { num_pairs: usize, theta0: f64 },

    #[error("objective has {maxima} local maxima on [{lo}, {hi}]")]
    NonUnimodal { maxima: usize, lo: f64, hi: f64 },

    #[error("grid oracle supports at most 2 pairs, got {0}")]
    UnsupportedSize(usize),

    #[error("length mismatch: expected {expected}, got {got} for {what}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config write error: {0}")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
