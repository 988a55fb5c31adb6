use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or field failed validation (bad gamma, empty grid, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// An operation was asked of a grid kind that cannot support it.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A field contains NaN or infinite entries.
    #[error("non-finite value in {what} (first at index {index})")]
    NonFinite { what: String, index: usize },

    /// A density has a negative entry beyond the admissible floor.
    #[error("negative density in {what}: min {min:.3e} at index {index}")]
    NegativeDensity { what: String, min: f64, index: usize },

    /// Two algebraically equivalent evaluation routes disagree by more than
    /// ten times the identity tolerance, which indicates a discretization or
    /// programming defect rather than ordinary truncation error.
    #[error("cross-check failure in {what}: routes differ by {diff:.3e} (allowed {allowed:.3e})")]
    CrossCheck { what: String, diff: f64, allowed: f64 },

    /// Requested time step violates the stability bound of the scheme.
    #[error("time step {dt:.3e} exceeds stability bound {bound:.3e} ({detail})")]
    CflViolation { dt: f64, bound: f64, detail: String },

    /// Conserved mass drifted beyond the admissible per-run budget.
    #[error("mass drift {drift:.3e} exceeds budget {budget:.3e} at t = {t}")]
    MassDrift { drift: f64, budget: f64, t: f64 },

    /// An ODE solution left its admissible range (u hit zero, b crossed zero).
    #[error("degenerate solution: {0}")]
    Degenerate(String),

    /// The potential of a pressureless flow stopped being semiconvex enough
    /// for its transport map to stay monotone.
    #[error("caustic formed near t = {t}: transport map loses monotonicity")]
    Caustic { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

/// Scan a slice for NaN/inf entries.
pub fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: what.to_string(),
            index,
        });
    }
    Ok(())
}
