//! Domain types and closed-form moments for a single ONU modelled as an
//! M/G/1 queue with vacations and gated-limited service.
//!
//! Units: time in microseconds, rates in packets per microsecond.
//!
//! The vacation of an ONU is the `N - 1` windows of the other ONUs plus `N`
//! guard intervals. Its moments, the busy-period (window) moments and the
//! mean waiting time all follow from the first two moments of `K`, the
//! number of packets served in a window.

use crate::error::{ModelError, Result};

/// Relative tolerance used when checking that probabilities sum to one.
const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// Shape of a packet transmission-time distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceKind {
    Deterministic { value: f64 },
    Exponential { mean: f64 },
    Empirical { values: Vec<f64>, probabilities: Vec<f64> },
}

/// Packet transmission time distribution, with its first two moments cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceTimeDist {
    kind: ServiceKind,
    mean: f64,
    second_moment: f64,
}

impl ServiceTimeDist {
    pub fn deterministic(value: f64) -> Result<Self> {
        check_positive_time("service.value", value)?;
        Ok(Self {
            kind: ServiceKind::Deterministic { value },
            mean: value,
            second_moment: value * value,
        })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        check_positive_time("service.mean", mean)?;
        Ok(Self {
            kind: ServiceKind::Exponential { mean },
            mean,
            second_moment: 2.0 * mean * mean,
        })
    }

    /// Discrete distribution over `values` with the given probabilities.
    pub fn empirical(values: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probabilities.len() {
            return Err(ModelError::invalid(
                "service.values",
                format!(
                    "need a non-empty list of values with one probability each (got {} values, {} probabilities)",
                    values.len(),
                    probabilities.len()
                ),
            ));
        }
        for &v in &values {
            check_positive_time("service.values", v)?;
        }
        check_probabilities("service.probabilities", &probabilities)?;
        let mean = values.iter().zip(&probabilities).map(|(v, p)| v * p).sum();
        let second_moment = values
            .iter()
            .zip(&probabilities)
            .map(|(v, p)| v * v * p)
            .sum();
        Ok(Self {
            kind: ServiceKind::Empirical {
                values,
                probabilities,
            },
            mean,
            second_moment,
        })
    }

    pub fn kind(&self) -> &ServiceKind {
        &self.kind
    }

    /// First moment of the service time (μs).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Second moment of the service time (μs²).
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn variance(&self) -> f64 {
        (self.second_moment - self.mean * self.mean).max(0.0)
    }
}

/// An EPON scenario: `N` ONUs polled round-robin, separated by guard intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub onus: usize,
    /// Guard time plus REPORT transmission time (μs).
    pub guard: f64,
    pub service: ServiceTimeDist,
    /// Rate each ONU subscribed to in its SLA (packets/μs).
    pub subscribed_rate: f64,
    /// Actual arrival rate of every ONU (packets/μs).
    pub rates: Vec<f64>,
    /// Maximum packets per transmission window; `None` is plain gated service.
    pub window_limit: Option<u32>,
    /// Tail probability bound used to size the window.
    pub epsilon: f64,
}

impl SystemConfig {
    pub fn new(
        guard: f64,
        service: ServiceTimeDist,
        subscribed_rate: f64,
        rates: Vec<f64>,
        window_limit: Option<u32>,
        epsilon: f64,
    ) -> Result<Self> {
        let config = Self {
            onus: rates.len(),
            guard,
            service,
            subscribed_rate,
            rates,
            window_limit,
            epsilon,
        };
        config.validate()?;
        Ok(config)
    }

    /// All ONUs at the subscribed rate.
    pub fn homogeneous(
        onus: usize,
        guard: f64,
        service: ServiceTimeDist,
        rate: f64,
        window_limit: Option<u32>,
        epsilon: f64,
    ) -> Result<Self> {
        Self::new(guard, service, rate, vec![rate; onus], window_limit, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.onus == 0 {
            return Err(ModelError::invalid("onus", "at least one ONU is required"));
        }
        if self.rates.len() != self.onus {
            return Err(ModelError::invalid(
                "rates",
                format!("expected {} per-ONU rates, got {}", self.onus, self.rates.len()),
            ));
        }
        check_positive_time("guard", self.guard)?;
        if !(self.subscribed_rate >= 0.0 && self.subscribed_rate.is_finite()) {
            return Err(ModelError::invalid(
                "subscribed_rate",
                "must be a finite non-negative rate",
            ));
        }
        for &r in &self.rates {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(ModelError::invalid("rates", "must be finite and non-negative"));
            }
        }
        if self.window_limit == Some(0) {
            return Err(ModelError::invalid("window_limit", "must be at least 1 packet"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ModelError::invalid("epsilon", "must lie strictly between 0 and 1"));
        }
        let load = self.offered_load();
        if load >= 1.0 {
            return Err(ModelError::Saturated { load });
        }
        let subscribed = self.subscribed_load();
        if subscribed >= 1.0 {
            return Err(ModelError::Saturated { load: subscribed });
        }
        Ok(())
    }

    /// Total arrival rate λ_E (packets/μs).
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Offered load ρ_E = λ_E·X̄.
    pub fn offered_load(&self) -> f64 {
        self.total_rate() * self.service.mean()
    }

    /// Load if every ONU sent exactly its subscribed rate.
    pub fn subscribed_load(&self) -> f64 {
        self.onus as f64 * self.subscribed_rate * self.service.mean()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.rates.windows(2).all(|w| w[0] == w[1])
    }

    /// The per-ONU rate, provided all ONUs share it.
    pub fn common_rate(&self) -> Result<f64> {
        if self.is_homogeneous() {
            Ok(self.rates[0])
        } else {
            Err(ModelError::Heterogeneous)
        }
    }

    /// Same scenario with every ONU sending at `rate`.
    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        let mut next = self.clone();
        next.rates = vec![rate; self.onus];
        next.validate()?;
        Ok(next)
    }

    pub fn with_window_limit(&self, window_limit: Option<u32>) -> Result<Self> {
        let mut next = self.clone();
        next.window_limit = window_limit;
        next.validate()?;
        Ok(next)
    }
}

/// Distribution of the number of packets served in one window, `b_0..b_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BusyPeriodDist {
    probs: Vec<f64>,
}

impl BusyPeriodDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ModelError::invalid("b", "need at least b_0"));
        }
        check_probabilities("b", &probs)?;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest window size with a probability slot.
    pub fn max_size(&self) -> usize {
        self.probs.len() - 1
    }

    /// K̄
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// K̄²
    pub fn second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k * k) as f64 * p)
            .sum()
    }
}

/// Every derived moment of the analytic model for one ONU.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    /// Per-ONU arrival rate λ.
    pub rate: f64,
    /// Per-ONU load ρ = λX̄.
    pub load: f64,
    /// Offered load ρ_E = Nρ.
    pub offered_load: f64,
    pub window_limit: Option<u32>,
    pub vacation_mean: f64,
    pub vacation_second_moment: f64,
    pub busy_mean: f64,
    pub busy_variance: f64,
    pub window_mean: f64,
    pub window_second_moment: f64,
    pub cycle_mean: f64,
    pub cycle_variance: f64,
    /// Stationary reported queue-length probabilities q_0..q_{M-1}.
    pub q: Vec<f64>,
    /// Pr{l ≥ M}, or 0 under gated service.
    pub tail_probability: f64,
    pub residual: f64,
    pub whole_vacations: f64,
    pub mean_inside: f64,
    pub mean_outside: f64,
    pub queue_length: f64,
    pub mean_wait: f64,
    /// Iterations used by the second-moment fixed point (0 when closed form).
    pub iterations: usize,
}

/// Terms of the waiting-time decomposition `W = R + N_Q·X̄ + Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitingTime {
    pub mean_wait: f64,
    /// Mean residual service or vacation seen by an arrival.
    pub residual: f64,
    /// Mean number of packets found waiting, N_Q = λW.
    pub queue_length: f64,
    /// Mean duration of whole vacations before service starts.
    pub whole_vacations: f64,
    pub mean_inside: f64,
    pub mean_outside: f64,
}

/// Mean vacation V̄ = (N − ρ_E)·G / (1 − ρ_E).
pub fn vacation_mean(onus: usize, guard: f64, offered_load: f64) -> Result<f64> {
    check_load(offered_load)?;
    let n = onus as f64;
    Ok((n - offered_load) * guard / (1.0 - offered_load))
}

/// Mean cycle time μ_C = N·G / (1 − ρ_E).
pub fn mean_cycle(onus: usize, guard: f64, offered_load: f64) -> Result<f64> {
    check_load(offered_load)?;
    Ok(onus as f64 * guard / (1.0 - offered_load))
}

/// Mean packets per window K̄ = λ_E·G / (1 − ρ_E).
pub fn mean_packets_per_window(total_rate: f64, guard: f64, offered_load: f64) -> Result<f64> {
    check_load(offered_load)?;
    Ok(total_rate * guard / (1.0 - offered_load))
}

/// Variance of a window's duration, σ_B² = X̄²·Var(K) + K̄·Var(X).
pub fn busy_period_variance(
    service: &ServiceTimeDist,
    window_mean: f64,
    window_second_moment: f64,
) -> Result<f64> {
    let k_var = window_second_moment - window_mean * window_mean;
    if k_var < -1e-9 * window_second_moment.abs().max(1.0) {
        return Err(ModelError::invalid(
            "window_second_moment",
            format!("K² = {window_second_moment} is below K̄² = {}", window_mean * window_mean),
        ));
    }
    let x = service.mean();
    Ok(x * x * k_var.max(0.0) + window_mean * service.variance())
}

/// Second moment of the vacation, V̄² = V̄·V̄ + (N − 1)·σ_B².
pub fn second_vacation_moment(
    vacation_mean: f64,
    onus: usize,
    service: &ServiceTimeDist,
    window_mean: f64,
    window_second_moment: f64,
) -> Result<f64> {
    let sigma_b2 = busy_period_variance(service, window_mean, window_second_moment)?;
    Ok(vacation_mean * vacation_mean + (onus as f64 - 1.0) * sigma_b2)
}

/// Probability that a packet is served in a window of `k` packets, `P_k = k·b_k / K̄`.
///
/// Index `k` of the result is `P_k`; `P_0` is always zero.
pub fn served_in_window_probs(dist: &BusyPeriodDist) -> Result<Vec<f64>> {
    let k_mean = dist.mean();
    if k_mean <= 0.0 {
        return Err(ModelError::EmptyWindows);
    }
    Ok(dist
        .probs()
        .iter()
        .enumerate()
        .map(|(k, b)| k as f64 * b / k_mean)
        .collect())
}

/// Mean number of packets served ahead of a packet in its own window,
/// `E[Δ] = (K̄² − K̄) / (2K̄)`.
pub fn mean_served_ahead(dist: &BusyPeriodDist) -> Result<f64> {
    let k_mean = dist.mean();
    if k_mean <= 0.0 {
        return Err(ModelError::EmptyWindows);
    }
    Ok(served_ahead_from_moments(k_mean, dist.second_moment()))
}

fn served_ahead_from_moments(window_mean: f64, window_second_moment: f64) -> f64 {
    if window_mean <= 0.0 {
        0.0
    } else {
        (window_second_moment - window_mean) / (2.0 * window_mean)
    }
}

/// Mean number of packets waiting inside the gate, `m̄ = λV̄ + ρ·E[Δ]`.
pub fn mean_inside_gate(
    rate: f64,
    vacation_mean: f64,
    dist: &BusyPeriodDist,
    service_mean: f64,
) -> Result<f64> {
    let delta = mean_served_ahead(dist)?;
    Ok(rate * vacation_mean + rate * service_mean * delta)
}

/// Mean waiting time of a gated-limited M/G/1 queue with vacations.
///
/// `window_limit = None` is gated service (the limit taken to infinity).
/// With `K̄ = 0` the served-ahead term is taken as zero, which gives the
/// light-traffic limit rather than `0/0`.
pub fn mean_waiting_time(
    rate: f64,
    service: &ServiceTimeDist,
    vacation_mean: f64,
    vacation_second_moment: f64,
    window_mean: f64,
    window_second_moment: f64,
    window_limit: Option<f64>,
) -> Result<WaitingTime> {
    if !(rate >= 0.0) {
        return Err(ModelError::invalid("rate", "must be non-negative"));
    }
    if !(vacation_mean > 0.0) {
        return Err(ModelError::invalid("vacation_mean", "must be positive"));
    }
    if let Some(m) = window_limit {
        if !(m >= 1.0) {
            return Err(ModelError::invalid("window_limit", "must be at least 1"));
        }
    }
    let x = service.mean();
    let rho = rate * x;
    let delta = served_ahead_from_moments(window_mean, window_second_moment);
    let residual =
        rate * service.second_moment() / 2.0 + (1.0 - rho) * vacation_second_moment / (2.0 * vacation_mean);
    let mean_inside = rate * vacation_mean + rho * delta;

    let (denominator, numerator) = match window_limit {
        Some(m) => (
            1.0 - rho - rate * vacation_mean / m,
            residual + (1.0 - (1.0 + rho) * delta / m - rate * vacation_mean / m) * vacation_mean,
        ),
        None => (1.0 - rho, residual + vacation_mean),
    };
    if denominator <= 0.0 {
        return Err(ModelError::Unstable { denominator });
    }
    let mean_wait = numerator / denominator;
    let queue_length = rate * mean_wait;
    let mean_outside = queue_length - mean_inside;
    let whole_vacations = match window_limit {
        Some(m) => (1.0 + (mean_outside - delta) / m) * vacation_mean,
        None => vacation_mean,
    };
    Ok(WaitingTime {
        mean_wait,
        residual,
        queue_length,
        whole_vacations,
        mean_inside,
        mean_outside,
    })
}

fn check_load(offered_load: f64) -> Result<()> {
    if !(offered_load >= 0.0) {
        return Err(ModelError::invalid("offered_load", "must be non-negative"));
    }
    if offered_load >= 1.0 {
        return Err(ModelError::Saturated { load: offered_load });
    }
    Ok(())
}

fn check_positive_time(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::invalid(name, format!("{value} is not a positive finite time")))
    }
}

fn check_probabilities(name: &'static str, probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
        return Err(ModelError::invalid(name, "probabilities must lie in [0, 1]"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(ModelError::invalid(name, format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_deterministic() -> ServiceTimeDist {
        ServiceTimeDist::deterministic(1.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn service_moments() {
        let d = ServiceTimeDist::deterministic(1.5).unwrap();
        assert_eq!(d.second_moment(), d.mean() * d.mean());
        let e = ServiceTimeDist::exponential(2.0).unwrap();
        assert_eq!(e.second_moment(), 8.0);
        let emp = ServiceTimeDist::empirical(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(emp.mean(), 2.0);
        assert_eq!(emp.second_moment(), 5.0);
        assert!(emp.second_moment() >= emp.mean() * emp.mean());
    }

    #[test]
    fn service_rejects_bad_inputs() {
        assert!(ServiceTimeDist::deterministic(0.0).is_err());
        assert!(ServiceTimeDist::exponential(-1.0).is_err());
        assert!(ServiceTimeDist::empirical(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(ServiceTimeDist::empirical(vec![1.0], vec![0.5, 0.5]).is_err());
        assert!(ServiceTimeDist::empirical(vec![], vec![]).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = SystemConfig::homogeneous(32, 1.512, unit_deterministic(), 0.021875, None, 0.05).unwrap();
        assert!((ok.offered_load() - 0.7).abs() < 1e-12);
        let saturated = SystemConfig::homogeneous(32, 1.512, unit_deterministic(), 0.03125, None, 0.05);
        assert!(matches!(saturated, Err(ModelError::Saturated { .. })));
        assert!(SystemConfig::homogeneous(0, 1.512, unit_deterministic(), 0.01, None, 0.05).is_err());
        assert!(SystemConfig::homogeneous(4, 0.0, unit_deterministic(), 0.01, None, 0.05).is_err());
        assert!(SystemConfig::homogeneous(4, 1.0, unit_deterministic(), 0.01, Some(0), 0.05).is_err());
        assert!(SystemConfig::homogeneous(4, 1.0, unit_deterministic(), 0.01, None, 1.0).is_err());
        let hetero =
            SystemConfig::new(1.0, unit_deterministic(), 0.1, vec![0.1, 0.2], Some(3), 0.05).unwrap();
        assert_eq!(hetero.common_rate(), Err(ModelError::Heterogeneous));
    }

    #[test]
    fn vacation_mean_examples() {
        assert!(rel(vacation_mean(32, 1.512, 0.0).unwrap(), 48.384) < 1e-12);
        assert!(rel(vacation_mean(32, 1.512, 0.7).unwrap(), 157.752) < 1e-12);
        assert!(rel(vacation_mean(2, 1.512, 0.6).unwrap(), 5.292) < 1e-12);
        assert!(matches!(vacation_mean(32, 1.512, 1.0), Err(ModelError::Saturated { .. })));
    }

    #[test]
    fn mean_cycle_examples() {
        assert!(rel(mean_cycle(32, 1.512, 0.0).unwrap(), 48.384) < 1e-12);
        assert!(rel(mean_cycle(32, 1.512, 0.7).unwrap(), 161.28) < 1e-12);
        assert!(rel(mean_cycle(32, 1.512, 0.3).unwrap(), 69.12) < 1e-12);
        // V̄ = μ_C·(1 − ρ) with ρ = ρ_E / N
        let v = vacation_mean(32, 1.512, 0.7).unwrap();
        let c = mean_cycle(32, 1.512, 0.7).unwrap();
        assert!(rel(c * (1.0 - 0.7 / 32.0), v) < 1e-12);
        assert!(mean_cycle(32, 1.512, 1.2).is_err());
    }

    #[test]
    fn mean_window_examples() {
        assert_eq!(mean_packets_per_window(0.0, 1.512, 0.0).unwrap(), 0.0);
        assert!(rel(mean_packets_per_window(0.7, 1.512, 0.7).unwrap(), 3.528) < 1e-12);
        assert!(rel(mean_packets_per_window(0.3, 1.512, 0.3).unwrap(), 0.648) < 1e-12);
        // K̄ = λ·μ_C
        let c = mean_cycle(32, 1.512, 0.7).unwrap();
        assert!(rel(mean_packets_per_window(0.7, 1.512, 0.7).unwrap(), 0.7 / 32.0 * c) < 1e-12);
    }

    #[test]
    fn busy_period_variance_examples() {
        let d = unit_deterministic();
        assert_eq!(busy_period_variance(&d, 9.0, 81.0).unwrap(), 0.0);
        let v = busy_period_variance(&d, 3.528, 16.030).unwrap();
        assert!((v - 3.583).abs() < 1e-3, "{v}");
        let e = ServiceTimeDist::exponential(1.0).unwrap();
        assert!((busy_period_variance(&e, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(busy_period_variance(&d, 3.0, 5.0).is_err());
    }

    #[test]
    fn second_vacation_moment_examples() {
        let d = unit_deterministic();
        assert_eq!(second_vacation_moment(10.0, 32, &d, 4.0, 16.0).unwrap(), 100.0);
        assert_eq!(second_vacation_moment(48.384, 1, &d, 3.0, 12.0).unwrap(), 48.384 * 48.384);
        let v2 = second_vacation_moment(157.752, 32, &d, 3.528, 16.030).unwrap();
        assert!((v2 - 24996.77).abs() < 0.05, "{v2}");
    }

    #[test]
    fn served_in_window_examples() {
        let full = BusyPeriodDist::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(served_in_window_probs(&full).unwrap()[3], 1.0);
        let b = BusyPeriodDist::new(vec![0.5, 0.25, 0.25]).unwrap();
        let p = served_in_window_probs(&b).unwrap();
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15 && (p[2] - 2.0 / 3.0).abs() < 1e-15);
        let b = BusyPeriodDist::new(vec![0.0, 0.5, 0.5]).unwrap();
        let p = served_in_window_probs(&b).unwrap();
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15 && (p[2] - 2.0 / 3.0).abs() < 1e-15);
        let empty = BusyPeriodDist::new(vec![1.0]).unwrap();
        assert_eq!(served_in_window_probs(&empty), Err(ModelError::EmptyWindows));
    }

    #[test]
    fn served_ahead_examples() {
        let one = BusyPeriodDist::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(mean_served_ahead(&one).unwrap(), 0.0);
        let two = BusyPeriodDist::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(mean_served_ahead(&two).unwrap(), 0.5);
        let mixed = BusyPeriodDist::new(vec![0.0, 0.5, 0.5]).unwrap();
        assert!((mean_served_ahead(&mixed).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // Position average weighted by P_k: Σ P_k·(k − 1)/2.
        let p = served_in_window_probs(&mixed).unwrap();
        let direct: f64 = p.iter().enumerate().skip(1).map(|(k, pk)| pk * (k as f64 - 1.0) / 2.0).sum();
        assert!((direct - 1.0 / 3.0).abs() < 1e-15);
        assert!(mean_served_ahead(&BusyPeriodDist::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn mean_inside_gate_examples() {
        let one = BusyPeriodDist::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(mean_inside_gate(0.0, 100.0, &one, 1.0).unwrap(), 0.0);
        assert!((mean_inside_gate(0.01, 100.0, &one, 1.0).unwrap() - 1.0).abs() < 1e-15);

        // λ = 0.021875, V̄ = 157.752, K̄ = 3.528, K̄² = 16.030, X̄ = 1:
        // 0.021875·157.752 + 0.021875·(16.030 − 3.528)/(2·3.528)
        let d = unit_deterministic();
        let w = mean_waiting_time(0.021875, &d, 157.752, 24996.77, 3.528, 16.030, Some(9.0)).unwrap();
        let expected = 0.021875 * 157.752 + 0.021875 * (16.030 - 3.528) / (2.0 * 3.528);
        assert!((w.mean_inside - expected).abs() < 1e-12);
        assert!((w.mean_inside - 3.4896).abs() < 1e-4, "{}", w.mean_inside);
    }

    #[test]
    fn waiting_time_gated_limit() {
        let d = unit_deterministic();
        let (lambda, v, v2, k, k2) = (0.021875, 157.752, 24996.77, 3.528, 16.030);
        let limited = mean_waiting_time(lambda, &d, v, v2, k, k2, Some(1e9)).unwrap();
        let rho = lambda;
        let classical = (lambda / 2.0 + (1.0 - rho) * v2 / (2.0 * v) + v) / (1.0 - rho);
        assert!(rel(limited.mean_wait, classical) < 1e-9);
        let gated = mean_waiting_time(lambda, &d, v, v2, k, k2, None).unwrap();
        assert!(rel(gated.mean_wait, classical) < 1e-15);
    }

    #[test]
    fn waiting_time_light_traffic_limit() {
        let d = unit_deterministic();
        let (v, v2) = (48.384, 48.384 * 48.384 + 10.0);
        let w = mean_waiting_time(0.0, &d, v, v2, 0.0, 0.0, Some(3.0)).unwrap();
        assert!(rel(w.mean_wait, v2 / (2.0 * v) + v) < 1e-15);
        let tiny = mean_waiting_time(1e-12, &d, v, v2, 1e-10, 1e-10, Some(3.0)).unwrap();
        assert!(rel(tiny.mean_wait, v2 / (2.0 * v) + v) < 1e-9);
    }

    #[test]
    fn waiting_time_unstable() {
        let d = unit_deterministic();
        // λV̄/M ≥ 1 − ρ
        let err = mean_waiting_time(0.03, &d, 200.0, 40000.0, 6.0, 40.0, Some(6.0)).unwrap_err();
        assert!(matches!(err, ModelError::Unstable { .. }));
    }

    #[test]
    fn waiting_time_decomposition_and_little() {
        let d = ServiceTimeDist::exponential(1.0).unwrap();
        let w = mean_waiting_time(0.02, &d, 120.0, 15000.0, 2.5, 9.0, Some(5.0)).unwrap();
        let x = d.mean();
        let sum = w.residual + w.queue_length * x + w.whole_vacations;
        assert!(rel(sum, w.mean_wait) < 1e-9);
        assert!(rel(w.queue_length, 0.02 * w.mean_wait) < 1e-12);
        assert!(rel(w.mean_inside + w.mean_outside, w.queue_length) < 1e-12);
    }
}
