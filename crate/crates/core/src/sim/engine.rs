use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::stats::Moments;
use super::{Discipline, SimScenario};
use crate::model::{ServiceKind, ServiceTimeDist};

/// Report-size histogram length; the last bin collects every larger report.
pub const HISTOGRAM_BINS: usize = 1024;

#[derive(Debug, Clone)]
enum ServiceSampler {
    Fixed(f64),
    Exponential(Exp<f64>),
    Table { values: Vec<f64>, cumulative: Vec<f64> },
}

impl ServiceSampler {
    fn new(dist: &ServiceTimeDist) -> Self {
        match dist.kind() {
            ServiceKind::Deterministic { value } => ServiceSampler::Fixed(*value),
            ServiceKind::Exponential { mean } => {
                ServiceSampler::Exponential(Exp::new(1.0 / mean).expect("validated mean"))
            }
            ServiceKind::Empirical {
                values,
                probabilities,
            } => {
                let mut acc = 0.0;
                let cumulative = probabilities
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                ServiceSampler::Table {
                    values: values.clone(),
                    cumulative,
                }
            }
        }
    }

    #[inline]
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceSampler::Fixed(v) => *v,
            ServiceSampler::Exponential(exp) => exp.sample(rng),
            ServiceSampler::Table { values, cumulative } => {
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let idx = cumulative.partition_point(|c| *c <= u).min(values.len() - 1);
                values[idx]
            }
        }
    }
}

/// Substream id for one (replication, ONU, purpose) triple.
fn stream_id(replication: u32, onu: usize, purpose: u64) -> u64 {
    ((replication as u64) << 32) | ((onu as u64) << 1) | purpose
}

/// Buffer of one ONU: packets outside the gate and packets admitted at the last REPORT.
#[derive(Debug)]
struct OnuState {
    cap: usize,
    outside: VecDeque<f64>,
    inside: VecDeque<f64>,
    admitted_at: f64,
    next_arrival: f64,
    interarrival: Option<Exp<f64>>,
    arrival_rng: ChaCha8Rng,
    service_rng: ChaCha8Rng,
    arrivals: u64,
    served: u64,
}

impl OnuState {
    #[inline]
    fn generate_until(&mut self, t: f64) {
        let Some(exp) = self.interarrival else {
            return;
        };
        while self.next_arrival <= t {
            self.outside.push_back(self.next_arrival);
            self.arrivals += 1;
            self.next_arrival += exp.sample(&mut self.arrival_rng);
        }
    }
}

/// Post-warmup statistics of one ONU within one replication.
#[derive(Debug, Clone)]
pub(crate) struct OnuTally {
    pub wait: Moments,
    pub inside_time: f64,
    pub outside_time: f64,
    pub batch_sums: Vec<f64>,
    pub batch_counts: Vec<u64>,
    pub window_duration: Moments,
    pub window_packets: Moments,
    pub max_window_packets: u64,
    pub histogram: Vec<u64>,
    pub tail_count: u64,
    pub arrivals: u64,
    pub served: u64,
    pub remaining: u64,
}

impl OnuTally {
    fn new(batches: usize) -> Self {
        Self {
            wait: Moments::default(),
            inside_time: 0.0,
            outside_time: 0.0,
            batch_sums: vec![0.0; batches],
            batch_counts: vec![0; batches],
            window_duration: Moments::default(),
            window_packets: Moments::default(),
            max_window_packets: 0,
            histogram: vec![0; HISTOGRAM_BINS],
            tail_count: 0,
            arrivals: 0,
            served: 0,
            remaining: 0,
        }
    }
}

/// Statistics of one finished replication.
#[derive(Debug, Clone)]
pub(crate) struct ReplicationTally {
    pub onus: Vec<OnuTally>,
    pub cycle: Moments,
    pub observed_time: f64,
}

/// One window as seen by a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTrace {
    pub onu: usize,
    pub start: f64,
    pub duration: f64,
    /// Packets transmitted in this window.
    pub packets: usize,
    /// Outside-gate count carried by the REPORT at the end of the window.
    pub reported: usize,
    /// Packets moved inside the gate by that REPORT.
    pub admitted: usize,
    /// Arrival times of the transmitted packets, in transmission order.
    pub departures: Vec<f64>,
    /// Packets inside the gate right after the REPORT.
    pub inside_after: usize,
}

/// One polling cycle: every ONU's window followed by its guard interval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleTrace {
    pub index: u64,
    pub start: f64,
    pub duration: f64,
    pub windows: Vec<WindowTrace>,
}

/// A single replication, advanced one polling cycle at a time.
///
/// Each ONU in turn transmits everything inside its gate, then sends a
/// REPORT with its outside-gate count; the OLT admits up to the window limit
/// for the next cycle. A guard interval `G` follows every window.
#[derive(Debug)]
pub struct PollingRun {
    onus: Vec<OnuState>,
    tallies: Vec<OnuTally>,
    sampler: ServiceSampler,
    guard: f64,
    warmup: u64,
    horizon: u64,
    batches: usize,
    cycle: u64,
    time: f64,
    observe_start: f64,
    cycle_moments: Moments,
    trace: Option<CycleTrace>,
}

impl PollingRun {
    pub fn new(scenario: &SimScenario, replication: u32, tracing: bool) -> Self {
        let onus = scenario
            .onus
            .iter()
            .enumerate()
            .map(|(i, setup)| {
                let mut arrival_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                arrival_rng.set_stream(stream_id(replication, i, 0));
                let mut service_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                service_rng.set_stream(stream_id(replication, i, 1));
                let interarrival = (setup.rate > 0.0).then(|| Exp::new(setup.rate).expect("positive rate"));
                let next_arrival = match interarrival {
                    Some(exp) => exp.sample(&mut arrival_rng),
                    None => f64::INFINITY,
                };
                OnuState {
                    cap: match setup.discipline {
                        Discipline::Gated => usize::MAX,
                        Discipline::Limited(m) => m as usize,
                    },
                    outside: VecDeque::new(),
                    inside: VecDeque::new(),
                    admitted_at: 0.0,
                    next_arrival,
                    interarrival,
                    arrival_rng,
                    service_rng,
                    arrivals: 0,
                    served: 0,
                }
            })
            .collect::<Vec<_>>();
        let batches = scenario.batches as usize;
        Self {
            tallies: (0..onus.len()).map(|_| OnuTally::new(batches)).collect(),
            onus,
            sampler: ServiceSampler::new(&scenario.service),
            guard: scenario.guard,
            warmup: scenario.warmup,
            horizon: scenario.cycles,
            batches,
            cycle: 0,
            time: 0.0,
            observe_start: 0.0,
            cycle_moments: Moments::default(),
            trace: tracing.then(CycleTrace::default),
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn cycles_done(&self) -> u64 {
        self.cycle
    }

    /// Packets inside / outside the gate of `onu` right now.
    pub fn buffer(&self, onu: usize) -> (usize, usize) {
        (self.onus[onu].inside.len(), self.onus[onu].outside.len())
    }

    /// Arrivals generated so far and packets transmitted so far for `onu`.
    pub fn counts(&self, onu: usize) -> (u64, u64) {
        (self.onus[onu].arrivals, self.onus[onu].served)
    }

    /// Trace of the last cycle, when tracing is on.
    pub fn last_trace(&self) -> Option<&CycleTrace> {
        self.trace.as_ref()
    }

    /// Run one polling cycle.
    pub fn step(&mut self) {
        let observe = self.cycle >= self.warmup;
        if self.cycle == self.warmup {
            self.observe_start = self.time;
        }
        let batch = if observe {
            let observed = (self.horizon - self.warmup).max(1);
            (((self.cycle - self.warmup) * self.batches as u64) / observed) as usize
        } else {
            0
        }
        .min(self.batches.saturating_sub(1));

        let cycle_start = self.time;
        let mut t = self.time;
        if let Some(trace) = self.trace.as_mut() {
            trace.index = self.cycle;
            trace.start = cycle_start;
            trace.windows.clear();
        }

        for (i, (onu, tally)) in self.onus.iter_mut().zip(self.tallies.iter_mut()).enumerate() {
            let window_start = t;
            let packets = onu.inside.len();
            let mut departures = Vec::new();
            while let Some(arrival) = onu.inside.pop_front() {
                if observe {
                    let wait = t - arrival;
                    tally.wait.push(wait);
                    tally.inside_time += t - onu.admitted_at;
                    tally.outside_time += onu.admitted_at - arrival;
                    tally.batch_sums[batch] += wait;
                    tally.batch_counts[batch] += 1;
                }
                if self.trace.is_some() {
                    departures.push(arrival);
                }
                t += self.sampler.sample(&mut onu.service_rng);
            }
            onu.served += packets as u64;
            let duration = t - window_start;

            onu.generate_until(t);
            let reported = onu.outside.len();
            let admitted = reported.min(onu.cap);
            onu.inside.extend(onu.outside.drain(..admitted));
            onu.admitted_at = t;

            if observe {
                tally.window_duration.push(duration);
                tally.window_packets.push(packets as f64);
                tally.max_window_packets = tally.max_window_packets.max(packets as u64);
                tally.histogram[reported.min(HISTOGRAM_BINS - 1)] += 1;
                if reported >= onu.cap {
                    tally.tail_count += 1;
                }
            }
            if let Some(trace) = self.trace.as_mut() {
                trace.windows.push(WindowTrace {
                    onu: i,
                    start: window_start,
                    duration,
                    packets,
                    reported,
                    admitted,
                    departures,
                    inside_after: onu.inside.len(),
                });
            }
            t += self.guard;
        }

        if observe {
            self.cycle_moments.push(t - cycle_start);
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.duration = t - cycle_start;
        }
        self.time = t;
        self.cycle += 1;
    }

    pub(crate) fn finish(mut self) -> ReplicationTally {
        for (onu, tally) in self.onus.iter().zip(self.tallies.iter_mut()) {
            tally.arrivals = onu.arrivals;
            tally.served = onu.served;
            tally.remaining = (onu.inside.len() + onu.outside.len()) as u64;
        }
        let observed_time = if self.cycle > self.warmup {
            self.time - self.observe_start
        } else {
            0.0
        };
        ReplicationTally {
            onus: self.tallies,
            cycle: self.cycle_moments,
            observed_time,
        }
    }
}

/// Run one replication to its horizon.
pub(crate) fn run_replication(scenario: &SimScenario, replication: u32) -> ReplicationTally {
    let mut run = PollingRun::new(scenario, replication, false);
    for _ in 0..scenario.cycles {
        run.step();
    }
    run.finish()
}
