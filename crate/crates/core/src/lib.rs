//! Waiting-time analysis, window sizing and simulation for gated-limited
//! EPON upstream polling.
//!
//! * [`model`] — service/config types and the mean-waiting-time formula.
//! * [`chain`] — embedded Markov chain of REPORT sizes and the second
//!   moment of packets per window.
//! * [`optimizer`] — Chernoff-bound window sizing.
//! * [`sim`] — cycle-driven polling simulator.
//!
//! Times are in μs and rates in packets/μs throughout.

pub mod chain;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod sim;

pub use chain::{analytic_report, analytic_report_with, iterate_k2, ChainSolution, SolverOptions};
pub use error::{ModelError, Result};
pub use model::{AnalyticReport, ServiceTimeDist, SystemConfig};
pub use optimizer::{recommend, TrafficRegion, TwRecommendation};
pub use sim::{run_simulation, Discipline, SimReport, SimScenario};
