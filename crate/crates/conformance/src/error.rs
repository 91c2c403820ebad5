use mgcheck_core::KernelError;
use mgcheck_sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConformanceError {
    #[error("action {0} has no mapping entry")]
    UnmappedAction(String),
    #[error("scenario has {scenario} nodes but the model has {spec}")]
    ScenarioMismatch { scenario: usize, spec: usize },
    #[error("unknown invariant {0}")]
    UnknownInvariant(String),
    #[error("unknown trace id {0}")]
    UnknownTrace(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Io(String),
}
