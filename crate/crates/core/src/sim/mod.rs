//! Cycle-driven simulator of round-robin GATE/REPORT polling.
//!
//! With zero propagation delay the upstream timeline is a strict alternation
//! of transmission windows and guard intervals, so the simulator advances
//! one polling cycle at a time and stamps Poisson arrivals lazily into the
//! elapsed interval. Replications run in parallel on independent ChaCha8
//! substreams and are merged in replication order.

mod engine;
pub mod stats;

use rayon::prelude::*;

use crate::error::{ModelError, Result};
use crate::model::{ServiceTimeDist, SystemConfig};

pub use engine::{CycleTrace, PollingRun, WindowTrace, HISTOGRAM_BINS};
pub use stats::{Estimate, Moments};

/// Name of the generator used for every substream.
pub const RNG_ALGORITHM: &str = "ChaCha8";
/// Below this many observed cycles the report is flagged as low-confidence.
pub const MIN_CONFIDENT_CYCLES: u64 = 10_000;
pub const DEFAULT_BATCHES: u32 = 50;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.05;

/// Service discipline applied by the OLT to one ONU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discipline {
    /// Grant everything reported.
    Gated,
    /// Grant at most `M` packets per window.
    Limited(u32),
}

impl Discipline {
    pub fn from_limit(window_limit: Option<u32>) -> Self {
        match window_limit {
            Some(m) => Discipline::Limited(m),
            None => Discipline::Gated,
        }
    }

    pub fn limit(self) -> Option<u32> {
        match self {
            Discipline::Gated => None,
            Discipline::Limited(m) => Some(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnuSetup {
    /// Poisson arrival rate, packets/μs.
    pub rate: f64,
    pub discipline: Discipline,
}

/// Everything a simulation run needs. Unlike [`SystemConfig`] this carries
/// per-ONU disciplines and accepts overloaded rates: saturation is an
/// outcome to observe, not an input error.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub guard: f64,
    pub service: ServiceTimeDist,
    pub onus: Vec<OnuSetup>,
    /// Cycles per replication, warmup included.
    pub cycles: u64,
    /// Leading cycles discarded in every replication.
    pub warmup: u64,
    pub seed: u64,
    pub replications: u32,
    pub batches: u32,
}

impl SimScenario {
    /// Scenario matching `config`, with default warmup and batch count.
    pub fn from_config(config: &SystemConfig, cycles: u64, replications: u32, seed: u64) -> Self {
        let discipline = Discipline::from_limit(config.window_limit);
        Self {
            guard: config.guard,
            service: config.service.clone(),
            onus: config
                .rates
                .iter()
                .map(|&rate| OnuSetup { rate, discipline })
                .collect(),
            cycles,
            warmup: default_warmup(cycles),
            seed,
            replications,
            batches: DEFAULT_BATCHES,
        }
    }

    /// Homogeneous scenario without going through config validation.
    #[allow(clippy::too_many_arguments)]
    pub fn homogeneous(
        onus: usize,
        guard: f64,
        service: ServiceTimeDist,
        rate: f64,
        discipline: Discipline,
        cycles: u64,
        replications: u32,
        seed: u64,
    ) -> Self {
        Self {
            guard,
            service,
            onus: vec![OnuSetup { rate, discipline }; onus],
            cycles,
            warmup: default_warmup(cycles),
            seed,
            replications,
            batches: DEFAULT_BATCHES,
        }
    }

    /// Cycles observed after warmup in each replication.
    pub fn observed_cycles(&self) -> u64 {
        self.cycles.saturating_sub(self.warmup)
    }

    pub fn validate(&self) -> Result<()> {
        if self.onus.is_empty() {
            return Err(ModelError::invalid("onus", "at least one ONU is required"));
        }
        if !(self.guard.is_finite() && self.guard >= 0.0) {
            return Err(ModelError::invalid("guard", format!("must be finite and non-negative, got {}", self.guard)));
        }
        if self.cycles <= self.warmup {
            return Err(ModelError::invalid(
                "cycles",
                format!("horizon {} must exceed warmup {}", self.cycles, self.warmup),
            ));
        }
        if self.replications == 0 {
            return Err(ModelError::invalid("replications", "must be at least 1"));
        }
        if self.batches == 0 {
            return Err(ModelError::invalid("batches", "must be at least 1"));
        }
        for setup in &self.onus {
            if !(setup.rate.is_finite() && setup.rate >= 0.0) {
                return Err(ModelError::invalid("rate", format!("must be finite and non-negative, got {}", setup.rate)));
            }
            if setup.discipline == Discipline::Limited(0) {
                return Err(ModelError::invalid("window_limit", "must be at least 1"));
            }
        }
        Ok(())
    }
}

fn default_warmup(cycles: u64) -> u64 {
    (cycles as f64 * DEFAULT_WARMUP_FRACTION).floor() as u64
}

/// Per-ONU results, pooled over all replications.
#[derive(Debug, Clone, PartialEq)]
pub struct OnuReport {
    pub rate: f64,
    pub discipline: Discipline,
    /// Mean waiting time (service start − arrival), μs, with batch-means CI.
    pub wait: Estimate,
    pub wait_variance: f64,
    /// Packets whose waiting time was recorded.
    pub packets: u64,
    pub busy_mean: f64,
    /// Sample variance of window durations, empty windows included.
    pub busy_variance: f64,
    pub window_packets_mean: f64,
    pub window_packets_second_moment: f64,
    pub max_window_packets: u64,
    /// Counts of REPORT sizes `l`; the last bin holds every `l ≥ HISTOGRAM_BINS − 1`.
    pub report_histogram: Vec<u64>,
    /// Fraction of REPORTs with `l ≥ M`; zero under gated service.
    pub tail_probability: f64,
    /// Time-average packets inside the gate.
    pub mean_inside: f64,
    /// Time-average packets outside the gate.
    pub mean_outside: f64,
    pub arrivals: u64,
    pub served: u64,
    pub remaining: u64,
}

impl OnuReport {
    pub fn mean_wait(&self) -> f64 {
        self.wait.mean
    }

    pub fn reports(&self) -> u64 {
        self.report_histogram.iter().sum()
    }

    /// Empirical distribution of REPORT sizes.
    pub fn report_distribution(&self) -> Vec<f64> {
        let total = self.reports().max(1) as f64;
        self.report_histogram.iter().map(|&c| c as f64 / total).collect()
    }

    /// Binomial standard error of [`tail_probability`](Self::tail_probability).
    pub fn tail_std_error(&self) -> f64 {
        let n = self.reports().max(1) as f64;
        let p = self.tail_probability;
        (p * (1.0 - p) / n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub onus: Vec<OnuReport>,
    pub cycle_mean: f64,
    pub cycle_variance: f64,
    /// Post-warmup cycles summed over replications.
    pub observed_cycles: u64,
    pub replications: u32,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    /// Set when fewer than [`MIN_CONFIDENT_CYCLES`] cycles were observed.
    pub low_confidence: bool,
    pooled: Pooled,
}

impl SimReport {
    pub fn served(&self) -> u64 {
        self.onus.iter().map(|o| o.served).sum()
    }

    pub fn remaining(&self) -> u64 {
        self.onus.iter().map(|o| o.remaining).sum()
    }

    pub fn arrivals(&self) -> u64 {
        self.onus.iter().map(|o| o.arrivals).sum()
    }

    /// Packet-weighted mean wait across ONUs.
    pub fn pooled_mean_wait(&self) -> f64 {
        let packets: u64 = self.onus.iter().map(|o| o.packets).sum();
        if packets == 0 {
            return 0.0;
        }
        self.onus.iter().map(|o| o.wait.mean * o.packets as f64).sum::<f64>() / packets as f64
    }

    /// Mean wait with a CI from batch means pooled over ONUs and replications.
    pub fn pooled_wait(&self) -> Estimate {
        Estimate {
            mean: self.pooled_mean_wait(),
            ..self.pooled.wait
        }
    }

    /// Window-duration variance with every ONU's windows pooled.
    pub fn pooled_busy_variance(&self) -> f64 {
        self.pooled.busy.variance()
    }

    /// Fraction of all REPORTs with `l ≥ M`.
    pub fn pooled_tail_probability(&self) -> f64 {
        let (hits, total) = self.onus.iter().fold((0.0, 0u64), |(h, t), o| {
            let n = o.reports();
            (h + o.tail_probability * n as f64, t + n)
        });
        if total == 0 {
            0.0
        } else {
            hits / total as f64
        }
    }

    /// Pooled REPORT-size distribution.
    pub fn pooled_report_distribution(&self) -> Vec<f64> {
        let mut counts = vec![0u64; HISTOGRAM_BINS];
        for onu in &self.onus {
            for (c, h) in counts.iter_mut().zip(&onu.report_histogram) {
                *c += h;
            }
        }
        let total = counts.iter().sum::<u64>().max(1) as f64;
        counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn pooled_tail_std_error(&self) -> f64 {
        let n: u64 = self.onus.iter().map(|o| o.reports()).sum();
        let p = self.pooled_tail_probability();
        (p * (1.0 - p) / n.max(1) as f64).sqrt()
    }
}

// Exposed through the pooled_* helpers.
#[derive(Debug, Clone, PartialEq)]
struct Pooled {
    wait: Estimate,
    busy: Moments,
}

/// Run every replication of `scenario` and merge the statistics.
///
/// Overloaded scenarios are not rejected: their queues simply grow, which
/// shows up as large waits and leftover packets.
pub fn run_simulation(scenario: &SimScenario) -> Result<SimReport> {
    scenario.validate()?;
    let tallies: Vec<_> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| engine::run_replication(scenario, r))
        .collect();

    let n = scenario.onus.len();
    let batches = scenario.batches as usize;
    let mut cycle = Moments::default();
    let mut onus = Vec::with_capacity(n);
    let mut pooled_busy = Moments::default();
    let mut pooled_sums = Vec::new();
    let mut pooled_counts = Vec::new();
    let mut pooled_wait = Moments::default();

    for t in &tallies {
        cycle.merge(&t.cycle);
    }
    let observed_time: f64 = tallies.iter().map(|t| t.observed_time).sum();

    for (i, setup) in scenario.onus.iter().enumerate() {
        let mut wait = Moments::default();
        let mut duration = Moments::default();
        let mut packets = Moments::default();
        let mut histogram = vec![0u64; HISTOGRAM_BINS];
        let (mut inside, mut outside) = (0.0, 0.0);
        let (mut tail, mut arrivals, mut served, mut remaining, mut max_packets) = (0, 0, 0, 0, 0);
        let mut sums = Vec::with_capacity(batches * tallies.len());
        let mut counts = Vec::with_capacity(batches * tallies.len());
        for t in &tallies {
            let o = &t.onus[i];
            wait.merge(&o.wait);
            duration.merge(&o.window_duration);
            packets.merge(&o.window_packets);
            for (h, c) in histogram.iter_mut().zip(&o.histogram) {
                *h += c;
            }
            inside += o.inside_time;
            outside += o.outside_time;
            tail += o.tail_count;
            arrivals += o.arrivals;
            served += o.served;
            remaining += o.remaining;
            max_packets = max_packets.max(o.max_window_packets);
            sums.extend_from_slice(&o.batch_sums);
            counts.extend_from_slice(&o.batch_counts);
        }
        pooled_busy.merge(&duration);
        pooled_wait.merge(&wait);
        if pooled_sums.is_empty() {
            pooled_sums = sums.clone();
            pooled_counts = counts.clone();
        } else {
            for (k, (s, c)) in sums.iter().zip(&counts).enumerate() {
                pooled_sums[k] += s;
                pooled_counts[k] += c;
            }
        }
        let reports = duration.count.max(1) as f64;
        let (mean_inside, mean_outside) = if observed_time > 0.0 {
            (inside / observed_time, outside / observed_time)
        } else {
            (0.0, 0.0)
        };
        onus.push(OnuReport {
            rate: setup.rate,
            discipline: setup.discipline,
            wait: stats::batch_means_estimate(wait.mean, &sums, &counts),
            wait_variance: wait.variance(),
            packets: wait.count,
            busy_mean: duration.mean,
            busy_variance: duration.variance(),
            window_packets_mean: packets.mean,
            window_packets_second_moment: packets.second_moment(),
            max_window_packets: max_packets,
            report_histogram: histogram,
            tail_probability: match setup.discipline {
                Discipline::Gated => 0.0,
                Discipline::Limited(_) => tail as f64 / reports,
            },
            mean_inside,
            mean_outside,
            arrivals,
            served,
            remaining,
        });
    }

    let observed_cycles = cycle.count;
    Ok(SimReport {
        onus,
        cycle_mean: cycle.mean,
        cycle_variance: cycle.variance(),
        observed_cycles,
        replications: scenario.replications,
        seed: scenario.seed,
        rng_algorithm: RNG_ALGORITHM,
        low_confidence: observed_cycles < MIN_CONFIDENT_CYCLES,
        pooled: Pooled {
            wait: stats::batch_means_estimate(pooled_wait.mean, &pooled_sums, &pooled_counts),
            busy: pooled_busy,
        },
    })
}

/// Per-ONU busy-period (window-duration) variance, μs².
///
/// The flag is `true` when fewer than [`MIN_CONFIDENT_CYCLES`] cycles back the estimate.
pub fn empirical_busy_variance(report: &SimReport) -> (Vec<f64>, bool) {
    (
        report.onus.iter().map(|o| o.busy_variance).collect(),
        report.low_confidence,
    )
}

/// Run-length settings for [`capture_effect_scenario`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub cycles: u64,
    pub replications: u32,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            cycles: 200_000,
            replications: 4,
            seed: 2008,
        }
    }
}

/// ONU1's fixed rate in the two-ONU capture demo, packets/μs.
pub const CAPTURE_BASE_RATE: f64 = 0.3;
/// Guard interval of the capture demo, μs.
pub const CAPTURE_GUARD: f64 = 1.512;
/// Window limit of the capture demo under gated-limited service.
pub const CAPTURE_WINDOW_LIMIT: u32 = 4;

/// Two ONUs sharing a 1 packet/μs link: ONU1 at 0.3 packets/μs, ONU2 at
/// `rate2`. Returns the simulated mean waits `(W̄₁, W̄₂)` in μs.
pub fn capture_effect_scenario(
    rate2: f64,
    discipline: Discipline,
    settings: RunSettings,
) -> Result<(f64, f64)> {
    let report = run_simulation(&capture_scenario(rate2, discipline, settings)?)?;
    Ok((report.onus[0].wait.mean, report.onus[1].wait.mean))
}

/// Scenario behind [`capture_effect_scenario`], for callers that want the full report.
pub fn capture_scenario(rate2: f64, discipline: Discipline, settings: RunSettings) -> Result<SimScenario> {
    let mut scenario = SimScenario::homogeneous(
        2,
        CAPTURE_GUARD,
        ServiceTimeDist::deterministic(1.0)?,
        CAPTURE_BASE_RATE,
        discipline,
        settings.cycles,
        settings.replications,
        settings.seed,
    );
    scenario.onus[1].rate = rate2;
    Ok(scenario)
}
