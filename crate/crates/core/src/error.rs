//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]. The [`Error::kind`] string is
//! stable and machine-readable; the CLI prints it verbatim so scripts can
//! dispatch on it without parsing prose.

use thiserror::Error;

/// Failure modes surfaced by the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input table or vector has the wrong number of entries for the scenario.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A conditional distribution failed normalization or positivity checks.
    #[error("normalization error: {0}")]
    NormalizationError(String),
    /// Operation requires two-outcome measurements.
    #[error("non-binary outcomes: {0}")]
    NonBinaryOutcomes(String),
    /// Operation requires a specific scenario shape.
    #[error("wrong scenario: {0}")]
    WrongScenario(String),
    /// Enumeration would exceed the configured cap.
    #[error("too large: {0}")]
    TooLarge(String),
    /// The simplex solver lost feasibility or could not certify a verdict.
    #[error("lp numerical failure: {0}")]
    LpNumericalFailure(String),
    /// Polytope dimension above the supported exact-enumeration range.
    #[error("dimension too large: {0}")]
    DimensionTooLarge(String),
    /// Vertex set does not span the space with the origin strictly inside.
    #[error("degenerate vertex set: {0}")]
    DegenerateVertexSet(String),
    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// POVM elements are not positive or do not sum to the identity.
    #[error("invalid povm: {0}")]
    InvalidPovm(String),
    /// Density matrix is not Hermitian, positive, or trace one.
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// Requested tensor factorization is inconsistent with the dimension.
    #[error("bad factorization: {0}")]
    BadFactorization(String),
    /// Observable does not square to the identity.
    #[error("not dichotomic: {0}")]
    NotDichotomic(String),
    /// Correlation matrix too degenerate to define optimal settings.
    #[error("degenerate correlation matrix: {0}")]
    DegenerateT(String),
    /// Mixing weight outside its admissible interval.
    #[error("bad mixing weight: {0}")]
    BadW(String),
    /// Angle parameter outside its admissible interval.
    #[error("bad angle: {0}")]
    BadAlpha(String),
    /// Direction vector is zero or not normalizable.
    #[error("bad vector: {0}")]
    BadVector(String),
    /// A weight that must be a probability came out negative.
    #[error("negative weight: {0}")]
    NegativeWeight(String),
    /// CHSH value above the quantum maximum.
    #[error("super-quantum CHSH value: {0}")]
    SuperQuantumS(String),
    /// Iterative routine hit its iteration cap before reaching tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// Instance lacks the optional diagonal observable required here.
    #[error("missing diagonal observable: {0}")]
    MissingDb(String),
    /// State vector or coefficient list is not normalized.
    #[error("bad normalization: {0}")]
    BadNormalization(String),
    /// Bound parameters are inconsistent (e.g. algebraic <= local).
    #[error("bad bounds: {0}")]
    BadBounds(String),
    /// Input behavior signals between the parties beyond tolerance.
    #[error("signaling input: {0}")]
    SignalingInput(String),
}

impl Error {
    /// Stable machine-readable tag for this error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NormalizationError(_) => "normalization_error",
            Error::NonBinaryOutcomes(_) => "non_binary_outcomes",
            Error::WrongScenario(_) => "wrong_scenario",
            Error::TooLarge(_) => "too_large",
            Error::LpNumericalFailure(_) => "lp_numerical_failure",
            Error::DimensionTooLarge(_) => "dimension_too_large",
            Error::DegenerateVertexSet(_) => "degenerate_vertex_set",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidPovm(_) => "invalid_povm",
            Error::InvalidState(_) => "invalid_state",
            Error::BadFactorization(_) => "bad_factorization",
            Error::NotDichotomic(_) => "not_dichotomic",
            Error::DegenerateT(_) => "degenerate_t",
            Error::BadW(_) => "bad_w",
            Error::BadAlpha(_) => "bad_alpha",
            Error::BadVector(_) => "bad_vector",
            Error::NegativeWeight(_) => "negative_weight",
            Error::SuperQuantumS(_) => "super_quantum_s",
            Error::NoConvergence(_) => "no_convergence",
            Error::MissingDb(_) => "missing_db",
            Error::BadNormalization(_) => "bad_normalization",
            Error::BadBounds(_) => "bad_bounds",
            Error::SignalingInput(_) => "signaling_input",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_are_snake_case_and_unique() {
        let errs = [
            Error::ShapeMismatch(String::new()),
            Error::NormalizationError(String::new()),
            Error::NonBinaryOutcomes(String::new()),
            Error::WrongScenario(String::new()),
            Error::TooLarge(String::new()),
            Error::LpNumericalFailure(String::new()),
            Error::DimensionTooLarge(String::new()),
            Error::DegenerateVertexSet(String::new()),
            Error::DimensionMismatch(String::new()),
            Error::InvalidPovm(String::new()),
            Error::InvalidState(String::new()),
            Error::BadFactorization(String::new()),
            Error::NotDichotomic(String::new()),
            Error::DegenerateT(String::new()),
            Error::BadW(String::new()),
            Error::BadAlpha(String::new()),
            Error::BadVector(String::new()),
            Error::NegativeWeight(String::new()),
            Error::SuperQuantumS(String::new()),
            Error::NoConvergence(String::new()),
            Error::MissingDb(String::new()),
            Error::BadNormalization(String::new()),
            Error::BadBounds(String::new()),
            Error::SignalingInput(String::new()),
        ];
        let mut kinds: Vec<&str> = errs.iter().map(|e| e.kind()).collect();
        kinds.sort_unstable();
        let before = kinds.len();
        kinds.dedup();
        assert_eq!(before, kinds.len());
        for k in kinds {
            assert!(k.chars().all(|c| c.is_ascii_lowercase() || c == '_'));
        }
    }
}
