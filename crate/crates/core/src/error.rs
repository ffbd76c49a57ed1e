use thiserror::Error;

/// A single violated invariant, tagged with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_fields(.0))]
    Validation(Vec<FieldError>),
    #[error("step size underflow at t = {time} s")]
    StepUnderflow { time: f64 },
    #[error("non-finite derivative at t = {time} s in segment {segment}")]
    NonFinite { time: f64, segment: usize },
    #[error("ambiguous steady state; use find_steady_states")]
    AmbiguousSteadyState,
    #[error("no steady state found: {0}")]
    NoSteadyState(String),
    #[error("no second state below pitchfork")]
    Monostable,
    #[error("fold not found before force cap {cap} N")]
    FoldNotFound { cap: f64 },
    #[error("non-uniform sampling")]
    NonUniformSampling,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-monotone parameter grid")]
    NonMonotoneGrid,
    #[error("phase too short: {0}")]
    PhaseTooShort(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid override `{0}`")]
    InvalidOverride(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_fields(fields: &[FieldError]) -> String {
    fields.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
