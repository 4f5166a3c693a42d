use thiserror::Error;

/// Errors raised by the analytic model, the window optimizer and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("offered load {load:.6} is not below 1; the system is saturated")]
    Saturated { load: f64 },

    /// The gated-limited waiting-time denominator `1 - rho - lambda*V/M` is not positive.
    #[error("window limit cannot carry the load (stability denominator {denominator:.6e} <= 0); mean waiting time is unbounded")]
    Unstable { denominator: f64 },

    #[error("mean window size is zero; no packet is ever served")]
    EmptyWindows,

    #[error("analytic model requires statistically identical ONUs; per-ONU rates differ")]
    Heterogeneous,

    #[error("a finite window limit is required for this computation")]
    MissingWindowLimit,

    #[error("root {index} of z^M = H(z) did not converge (residual {residual:.3e})")]
    RootNotConverged { index: usize, residual: f64 },

    #[error("boundary probability system is singular (duplicate or degenerate roots)")]
    SingularSystem,

    #[error("boundary probability q_{index} = {value:.3e} is negative; model is outside its validity range")]
    NegativeProbability { index: usize, value: f64 },

    #[error("second-moment iteration did not converge after {iterations} steps (last change {last_change:.3e})")]
    IterationNotConverged {
        iterations: usize,
        last_change: f64,
        trace: Vec<f64>,
    },
}

impl ModelError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical procedures rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ModelError::RootNotConverged { .. }
                | ModelError::SingularSystem
                | ModelError::NegativeProbability { .. }
                | ModelError::IterationNotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
