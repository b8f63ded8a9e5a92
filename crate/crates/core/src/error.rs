use thiserror::Error;

/// Which coefficient assumption a sampled bound check violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Viscosity bounds and Lipschitz constant.
    A1,
    /// Thermal diffusivity bounds and Lipschitz constant.
    A2,
    /// Isotropic permeability bounds.
    A3,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Assumption::A1 => "A1",
            Assumption::A2 => "A2",
            Assumption::A3 => "A3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("coefficient bound violated ({assumption}): {detail}")]
    BoundViolation { assumption: Assumption, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },

    #[error("Picard iteration diverged after {} iterations (last update {:.3e})", history.len(), history.last().copied().unwrap_or(f64::NAN))]
    StepDivergence { history: Vec<f64> },

    #[error("run aborted at t = {time}: {reason}")]
    RunAborted { time: f64, reason: String },

    #[error("energy certificate undefined: {0}")]
    CertificateUndefined(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
