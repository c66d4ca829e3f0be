use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The response never reaches the threshold.
    #[error("no band: peak {peak} is below threshold {threshold}")]
    NoBand { peak: f64, threshold: f64 },

    /// The response does not fall back below the threshold inside the grid.
    #[error("band exceeds grid on the {side} side")]
    BandExceedsGrid { side: &'static str },

    #[error("triggering set is split into {count} disjoint bands")]
    MultiBand { count: usize },

    /// No next resonator center exists below the search cap.
    #[error("no spacing solution above {from} Hz below cap {cap} Hz")]
    Saturation { from: f64, cap: f64 },

    #[error("empty schedule")]
    EmptySchedule,

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "{name} must be finite and positive, got {value}"
        )))
    }
}
