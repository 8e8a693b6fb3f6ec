//! Error type shared by every module of the simulator.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by validation and by model operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A parameter or input failed validation. The message names the field.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A matrix expected to be Hermitian was not, within tolerance.
    #[error("matrix is not Hermitian: max |H - H^dag| = {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },

    /// A matrix expected to be unitary was not, within tolerance.
    #[error("matrix is not unitary: max |U^dag U - I| = {max_dev:.3e}")]
    NotUnitary { max_dev: f64 },

    /// Eigenvector labelling is ambiguous (dominant basis labels collide).
    #[error("degenerate spectrum prevents unambiguous labelling: {0}")]
    DegenerateSpectrum(String),

    /// Root finding could not bracket the requested target.
    #[error("target {target} not bracketed on [{lo}, {hi}] (f = [{f_lo}, {f_hi}])")]
    TargetNotBracketed {
        target: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// Two states or a state and an operator disagree on register shape.
    #[error("register mismatch: {0}")]
    RegisterMismatch(String),

    /// A time bin or mode that must be empty already holds a photon.
    #[error("mode {0} is already occupied on the state's support")]
    ModeOccupied(usize),

    /// An input state does not have the structure an operation requires.
    #[error("state structure mismatch: {0}")]
    StructureMismatch(String),

    /// Occupancy outside the single-photon-per-mode model.
    #[error("unsupported occupancy: {0}")]
    UnsupportedOccupancy(String),

    /// The brute-force enumeration would exceed its configured bound.
    #[error("enumeration of {states} assignments exceeds bound {bound}")]
    EnumerationBound { states: u128, bound: u128 },

    /// Post-selection removed every term of a state.
    #[error("post-selection left an empty state")]
    EmptyPostSelection,

    /// A conditional extraction found no support.
    #[error("no support: {0}")]
    NoSupport(String),

    /// A pattern report carries no success patterns.
    #[error("pattern report has no success patterns")]
    EmptySuccessSet,
}
