//! Error type shared by every module of the core crate.

use thiserror::Error;

/// Failures reported by the numerical routines.
///
/// Outcomes that are part of the mathematics (blow-up, touchdown, step
/// collapse during shooting) are verdicts, not errors; this enum only covers
/// misuse and genuine numerical breakdown.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative solver exhausted its iteration budget.
    #[error("{what} did not converge within {iterations} iterations")]
    IterationLimit {
        what: &'static str,
        iterations: usize,
    },
    /// A dense-output query fell outside the integrated span.
    #[error("t = {t} lies outside the covered span [{lo}, {hi}]")]
    Range { t: f64, lo: f64, hi: f64 },
    /// A trajectory is too short for the requested fit.
    #[error("insufficient span: {0}")]
    InsufficientSpan(String),
    /// A least-squares or asymptotic fit could not be carried out.
    #[error("fit failure: {0}")]
    FitFailure(String),
    /// The asymptotic seeding point is too close to the origin.
    #[error("seed u = {u} is outside the asymptotic range (need |u| >= {min_abs})")]
    SeedOutOfAsymptoticRange { u: f64, min_abs: f64 },
    /// A manifold seed lies outside the seed box.
    #[error("seed (nu = {nu}, sigma = {sigma}) outside the box of half-width {delta0}")]
    BoxViolation { nu: f64, sigma: f64, delta0: f64 },
    /// Both bracket endpoints received the same verdict.
    #[error("bracket endpoints do not classify to opposite verdicts: {0}")]
    BracketInvalid(String),
    /// Undetermined verdicts persisted at the horizon cap.
    #[error("horizon exhausted: {0}")]
    HorizonExhausted(String),
    /// The trajectory does not cover the requested comparison window.
    #[error("comparison window not covered: {0}")]
    WindowEmpty(String),
    /// Not enough data points for a fit.
    #[error("insufficient data: need {needed}, found {found}")]
    InsufficientData { needed: usize, found: usize },
    /// The ODE integrator failed outside a shooting context.
    #[error("integration failed: {0}")]
    Integration(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
