use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("floating-point overflow: {0}")]
    Overflow(String),

    #[error("phase branch is ambiguous near lambda = {lambda}: refinement limit reached")]
    BranchAmbiguity { lambda: f64 },

    #[error("quadrature budget exceeded: {needed} nodes requested, budget is {budget}")]
    QuadratureBudget { needed: usize, budget: usize },

    #[error("contour rejected: winding residual {residual:.3} (raw winding {raw:.6})")]
    ContourRejected { raw: f64, residual: f64 },

    #[error("outside the series convergence region: epsilon = {epsilon:.4} >= 1")]
    OutsideConvergence { epsilon: f64 },

    #[error("resonance search failed: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;
