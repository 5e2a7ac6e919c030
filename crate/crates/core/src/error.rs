use thiserror::Error;

/// Errors raised by the geometry and deformation pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BraneError {
    #[error("point {point:?} lies outside the chart domain (conformal denominator {denominator:.3e})")]
    Domain { point: Vec<f64>, denominator: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index-kind mismatch: {0}")]
    IndexKind(String),

    #[error("degenerate embedding at node {node}: {reason}")]
    Degenerate { node: usize, reason: String },

    #[error("degenerate induced metric at node {node}: |det| = {det:.3e}")]
    DegenerateMetric { node: usize, det: f64 },

    #[error("normal frame incomplete at node {node}: found {found} of {needed} normals")]
    NormalFrame { node: usize, found: usize, needed: usize },

    #[error("degree-of-freedom budget exceeded: {dofs} > {budget}")]
    Budget { dofs: usize, budget: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, BraneError>;
