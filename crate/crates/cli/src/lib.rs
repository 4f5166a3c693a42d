//! `epon-tw`: analytic reports, window sizing, simulation and parameter
//! sweeps for gated-limited EPON upstream scheduling.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "epon-tw", version, about = "Gated-limited EPON delay analysis and window sizing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every analytic quantity for a homogeneous configuration.
    Analyze {
        #[command(flatten)]
        io: Io,
    },
    /// Window-size bounds, approximation and optimum for the subscribed rate.
    Optimize {
        #[command(flatten)]
        io: Io,
    },
    /// Run the polling simulator on the configuration.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        run: RunArgs,
    },
    /// CSV with one row per value of a swept parameter.
    Sweep {
        #[command(flatten)]
        io: Io,
        /// `name:start:stop:step`, name one of rate (pkts/ms), load, window, epsilon.
        #[arg(long)]
        axis: Axis,
        /// Also fill the simulated columns.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare analytic and simulated values; exit 3 if any is out of tolerance.
    Validate {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        run: RunArgs,
        /// Relative tolerance in percent for waiting and cycle times.
        #[arg(long, default_value_t = 5.0)]
        tolerance: f64,
        /// Relative tolerance in percent for the busy-period variance.
        #[arg(long, default_value_t = 10.0)]
        busy_tolerance: f64,
    },
    /// Two-ONU capture-effect sweep under gated and gated-limited service.
    CaptureDemo {
        /// Output file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        /// ONU2 rate sweep, `rate2:start:stop:step` in pkts/ms.
        #[arg(long, default_value = "rate2:300:650:50")]
        axis: Axis,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Io {
    /// JSON configuration document.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub replications: u32,
    /// Cycles per replication, 5% of which are warmup.
    #[arg(long, default_value_t = 100_000)]
    pub cycles: u64,
}

/// A swept parameter: `name:start:stop:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Axis {
    /// `start, start + step, …` up to `stop`; empty when `start > stop`.
    pub fn values(&self) -> Vec<f64> {
        let slack = 1e-9 * self.step;
        (0..)
            .map(|i| self.start + i as f64 * self.step)
            .take_while(|v| *v <= self.stop + slack)
            .collect()
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [name, start, stop, step] = parts[..] else {
            return Err(format!("expected name:start:stop:step, got `{s}`"));
        };
        let num = |field: &str, v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("{field} `{v}` is not a finite number"))
        };
        let axis = Axis {
            name: name.trim().to_string(),
            start: num("start", start)?,
            stop: num("stop", stop)?,
            step: num("step", step)?,
        };
        if axis.name.is_empty() {
            return Err("axis name is empty".into());
        }
        if axis.step <= 0.0 {
            return Err(format!("step must be positive, got {}", axis.step));
        }
        Ok(axis)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    commands::run_command(cli.command)
}
