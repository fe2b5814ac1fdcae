use thiserror::Error;

/// Failures raised anywhere in the discretization and solution pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "degenerate stencil{} at ({x}, {y}): local matrix is singular or ill-conditioned (condition estimate {condition:e})",
        node_label(.node)
    )]
    DegenerateStencil {
        node: Option<usize>,
        x: f64,
        y: f64,
        condition: f64,
    },

    #[error("explicit iteration became unstable at step {step} (max |u| = {max_abs:e})")]
    Instability { step: usize, max_abs: f64 },

    #[error("no steady state after {steps} steps (last residual {residual:e})")]
    Timeout { steps: usize, residual: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn node_label(node: &Option<usize>) -> String {
    node.map(|i| format!(" at node {i}")).unwrap_or_default()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
