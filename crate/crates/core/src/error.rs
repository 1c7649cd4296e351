//! Typed failures shared by every pipeline stage.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("incompatible series: {0}")]
    IncompatibleSeries(String),
    #[error("unrepresentable exponent: {0}")]
    UnrepresentableExponent(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ellipticity violated: {0}")]
    Ellipticity(String),
    #[error("sign condition c(x,0) < 0 violated: {0}")]
    Sign(String),
    #[error("integer part of the positive root varies across nodes: {0}")]
    VaryingIntegerPart(String),
    #[error("fractional exponent too close to an integer: {0}")]
    NearIntegerExponent(String),
    #[error("polynomial fit not certified: {0}")]
    Fit(String),
    #[error("resonance: {0}")]
    Resonance(String),
    #[error("unsupported resonant input: {0}")]
    UnsupportedResonance(String),
    #[error("integrability: {0}")]
    Integrability(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("smoothness budget exhausted: {0}")]
    SmoothnessBudget(String),
    #[error("characteristic collision: {0}")]
    CharacteristicCollision(String),
    #[error("non-convergent term: {0}")]
    NonConvergentTerm(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("undefined fit: {0}")]
    UndefinedFit(String),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("quotient not representable as a polynomial: {0}")]
    Quotient(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
