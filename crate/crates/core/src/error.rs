use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants split into two families: contract violations on the inputs
/// (wrong shapes, non-Hermitian where Hermitian is required, ...) and
/// numerical diagnostics (defective spectra, trace drift, ...). The CLI maps
/// both to the "numerical contract" exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site index {index} out of range for a chain of {chain_length} sites")]
    SiteIndex { index: usize, chain_length: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown parameter `{name}` (available: {available})")]
    UnknownParameter { name: String, available: String },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("defective or degenerate spectrum: minimal eigenvalue gap {min_gap:e}")]
    Defective { min_gap: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("parameters outside the unbroken phase: s^2 - r^2 = {discriminant:e} <= 0")]
    PhaseDomain { discriminant: f64 },

    #[error("biorthogonal overlap {overlap:e} is too small to renormalize (self-orthogonal state)")]
    SelfOrthogonal { overlap: f64 },

    #[error("state is not normalized: {what} = {value:e}")]
    Normalization { what: &'static str, value: f64 },

    #[error("metric has a non-negligible imaginary part {imag:e}")]
    ImaginaryMetric { imag: f64 },

    #[error("trace drift {drift:e} at t = {time}; reduce the step size")]
    TraceDrift { drift: f64, time: f64 },

    #[error("density matrix lost positivity: min eigenvalue {min_eigenvalue:e} at t = {time}")]
    Positivity { min_eigenvalue: f64, time: f64 },

    #[error("trace decayed to {trace:e} at t = {time}")]
    DecayUnderflow { trace: f64, time: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
}

pub type Result<T> = std::result::Result<T, Error>;
