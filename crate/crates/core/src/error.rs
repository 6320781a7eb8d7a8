//! Error types, one small enum per module family.

use thiserror::Error;

/// Rejected model parameters.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("parameter {name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("parameter {name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("parameter {name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
    #[error(
        "operation requires physical-mode parameters (lambda > 0, k > 0); \
             this parameter set was built for validation mode"
    )]
    ValidationMode,
    #[error(
        "coefficient formula degenerates: 4(r+2) = 2·max(8, 2p) at r = {r}, p = {p}; \
             no finite exponent shift exists for these powers"
    )]
    DegenerateCoefficient { r: f64, p: f64 },
    #[error("decay exponent is defined only for 2 <= r < p/2, got r = {r}, p = {p}")]
    OutOfDecayRegime { r: f64, p: f64 },
}

/// Certificate/report construction failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TheoryError {
    #[error("{0}")]
    Param(#[from] ParamError),
    #[error("{0}")]
    Grid(#[from] GridError),
    #[error("certificate hypotheses are not met; no blow-up time is predicted")]
    NotCertified,
    #[error(
        "internal consistency failure: condition (momentum vs variance) passed but the \
         log argument {log_arg} left (0, 1); certificate and formula disagree"
    )]
    InconsistentCertificate { log_arg: f64 },
}

/// Grid and field construction/evaluation failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("grid length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("grid needs at least {min} intervals, got {got}")]
    TooCoarse { min: usize, got: usize },
    #[error("field has {got} values but the grid has {want} nodes")]
    LengthMismatch { got: usize, want: usize },
    #[error("field values must be finite; first bad entry at node {index}")]
    NonFinite { index: usize },
    #[error("field must vanish at the truncation boundary x = L; |u(L)| = {0}")]
    NonzeroCap(f64),
    #[error("fields live on different grids (L = {0} vs {1}, N = {2} vs {3})")]
    GridMismatch(f64, f64, usize, usize),
    #[error(
        "tail of x^2|u|^2 carries {fraction:.3e} of the integral (threshold {threshold:.1e}); \
         the truncation length is too short for this field"
    )]
    TailMass { fraction: f64, threshold: f64 },
}

/// Time-stepping failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("nonlinear midpoint solve stalled at residual {residual:.3e} after {iters} iterations (t = {t})")]
    NonlinearSolveFailure { t: f64, residual: f64, iters: usize },
    #[error("state lost finiteness at t = {t} outside a declared blow-up")]
    NonFiniteState { t: f64 },
    #[error("time step underflowed dt_min = {dt_min:.3e} at t = {t}")]
    StepUnderflow { t: f64, dt_min: f64 },
    #[error("manufactured solution violates the boundary condition by {defect:.3e} at t = {t} (tolerance {tol:.1e})")]
    IncompatibleForcing { t: f64, defect: f64, tol: f64 },
    #[error("{0}")]
    Grid(#[from] GridError),
    #[error("{0}")]
    Param(#[from] ParamError),
}

/// Diagnostics failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("theta functionals need a > b; got a = {a}, b = {b}")]
    ThetaUndefined { a: f64, b: f64 },
    #[error("identity residuals need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("identity residuals need a uniform sample cadence; spacing varies from {min:.3e} to {max:.3e}")]
    NonUniformCadence { min: f64, max: f64 },
    #[error("{0}")]
    Grid(#[from] GridError),
}

/// Detector failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DetectorError {
    #[error("rate fit window [{lo}, {hi}] contains {got} samples; need at least {min}")]
    WindowTooSmall {
        lo: f64,
        hi: f64,
        got: usize,
        min: usize,
    },
    #[error("rate fit window [{lo}, {hi}] is degenerate or reversed")]
    BadWindow { lo: f64, hi: f64 },
    #[error("H^1 proxy is not positive at t = {t}; cannot fit a log-linear rate")]
    NonPositiveSeries { t: f64 },
    #[error("certificate and series disagree on parameters ({what})")]
    CertificateMismatch { what: String },
    #[error("small-data bound is not applicable: {why}")]
    BoundInapplicable { why: String },
}

/// Configuration-file failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: cannot parse `{value}` as {want}")]
    BadValue {
        key: String,
        value: String,
        want: &'static str,
    },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {why}")]
    Invalid { key: String, why: String },
}
