//! Transmission-window sizing from a Chernoff bound on the reported queue length.
//!
//! In the regular case (every ONU within its subscription) the queue length
//! reported at the start of a cycle is close to the number of Poisson
//! arrivals during a Gaussian cycle, so its generating function is
//! `exp[-λμ_C(1-z) + ½λ²σ_C²(1-z)²]`. The optimum window `M*` is the
//! smallest integer whose optimized Chernoff bound on `Pr{l ≥ M}` falls
//! below `ε`. `M1 ≤ M* ≤ M2` bracket it and `M̂` is the Gaussian estimate.

use std::fmt;

use crate::error::{ModelError, Result};
use crate::model::{ServiceTimeDist, SystemConfig};

/// Default tail bound.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Range of ε considered practical for deployment.
pub const PRACTICAL_EPSILON: (f64, f64) = (0.001, 0.1);

const BISECTION_CAP: usize = 200;

pub fn epsilon_in_practical_range(epsilon: f64) -> bool {
    (PRACTICAL_EPSILON.0..=PRACTICAL_EPSILON.1).contains(&epsilon)
}

/// Second moment of the window size in the regular case, where the reported
/// queue is almost always emptied by the next window.
pub fn regular_k2(
    total_rate: f64,
    guard: f64,
    offered_load: f64,
    onus: usize,
    service: &ServiceTimeDist,
) -> Result<f64> {
    if offered_load >= 1.0 {
        return Err(ModelError::Saturated { load: offered_load });
    }
    if !(offered_load >= 0.0 && total_rate >= 0.0) {
        return Err(ModelError::invalid("offered_load", "must be non-negative"));
    }
    let n = onus as f64;
    let k_mean = total_rate * guard / (1.0 - offered_load);
    let numerator =
        total_rate.powi(3) * guard * service.variance() / (n * (1.0 - offered_load)) + k_mean;
    Ok(k_mean * k_mean + numerator / (1.0 - offered_load * offered_load / n))
}

/// Mean and variance of the queue length reported at a cycle boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueLengthModel {
    /// μ_l = λμ_C
    pub mean: f64,
    /// σ_l² = λ²σ_C² + μ_l
    pub variance: f64,
    /// λ²σ_C², the share of the variance due to cycle-length fluctuation.
    pub cycle_term: f64,
    pub epsilon: f64,
    /// α = ln(1/ε)
    pub alpha: f64,
}

impl QueueLengthModel {
    pub fn new(mean: f64, cycle_term: f64, epsilon: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(ModelError::invalid("mean", "queue-length mean must be finite and non-negative"));
        }
        if !(cycle_term >= 0.0 && cycle_term.is_finite()) {
            return Err(ModelError::invalid("cycle_term", "must be finite and non-negative"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ModelError::invalid("epsilon", "must lie strictly between 0 and 1"));
        }
        Ok(Self {
            mean,
            variance: cycle_term + mean,
            cycle_term,
            epsilon,
            alpha: (1.0 / epsilon).ln(),
        })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Queue-length moments for a homogeneous system at the given per-ONU rate.
pub fn queue_moments_at(
    rate: f64,
    onus: usize,
    guard: f64,
    service: &ServiceTimeDist,
    epsilon: f64,
) -> Result<QueueLengthModel> {
    let n = onus as f64;
    let total = rate * n;
    let load = total * service.mean();
    if load >= 1.0 {
        return Err(ModelError::Saturated { load });
    }
    let mean = total * guard / (1.0 - load);
    let variance =
        total.powi(3) * guard * service.second_moment() / ((1.0 - load) * (n - load * load)) + mean;
    QueueLengthModel::new(mean, (variance - mean).max(0.0), epsilon)
}

/// Queue-length moments at the subscribed rate of `config`.
pub fn queue_moments(config: &SystemConfig) -> Result<QueueLengthModel> {
    queue_moments_at(
        config.subscribed_rate,
        config.onus,
        config.guard,
        &config.service,
        config.epsilon,
    )
}

/// Chernoff bound `f = exp[-M ln z + λμ_C(z-1) + ½λ²σ_C²(z-1)²]` on `Pr{l ≥ M}`.
pub fn chernoff_bound(model: &QueueLengthModel, window: f64, z: f64) -> Result<f64> {
    if !(z > 1.0) {
        return Err(ModelError::invalid("z", format!("{z} must exceed 1")));
    }
    Ok(log_bound(model, window, z).exp())
}

fn log_bound(model: &QueueLengthModel, window: f64, z: f64) -> f64 {
    let x = z - 1.0;
    -window * z.ln() + model.mean * x + 0.5 * model.cycle_term * x * x
}

/// Minimizer of the Chernoff bound at threshold `μ_l + t`.
///
/// Solves `-(μ_l+t)/z + λμ_C + λ²σ_C²(z-1) = 0` for its positive root.
/// With no cycle-length variance the bound is the pure Poisson one and
/// `z* = (μ_l+t)/λμ_C`.
pub fn optimal_z(t: f64, arrivals_mean: f64, cycle_term: f64) -> f64 {
    let target = arrivals_mean + t;
    if cycle_term <= 0.0 {
        return if arrivals_mean > 0.0 {
            target / arrivals_mean
        } else {
            f64::INFINITY
        };
    }
    let b = arrivals_mean - cycle_term;
    let disc = (b * b + 4.0 * target * cycle_term).sqrt();
    if b > 0.0 {
        // same root, without cancellation
        2.0 * target / (disc + b)
    } else {
        (disc - b) / (2.0 * cycle_term)
    }
}

/// Optimized bound on `Pr{l ≥ window}`, evaluated at `z*(window − μ_l)`.
pub fn bound_at_optimum(model: &QueueLengthModel, window: f64) -> f64 {
    if model.mean <= 0.0 {
        return if window > 0.0 { 0.0 } else { 1.0 };
    }
    let t = window - model.mean;
    if t <= 0.0 {
        return 1.0;
    }
    let z = optimal_z(t, model.mean, model.cycle_term);
    log_bound(model, window, z).exp().min(1.0)
}

/// Lower and upper bounds `(M1, M2)` on the optimum window.
pub fn tw_bounds(model: &QueueLengthModel) -> (u32, u32) {
    let a = model.alpha;
    let m1 = model.mean + model.cycle_term.sqrt() * (2.0 * a).sqrt();
    let m2 = model.mean + a + (a * a + 2.0 * a * model.variance).sqrt();
    (window_ceil(m1), window_ceil(m2))
}

/// Gaussian estimate `M̂ = ⌈μ_l + σ_l√(2α)⌉` of the optimum window.
pub fn tw_approx(model: &QueueLengthModel) -> u32 {
    window_ceil(model.mean + model.std_dev() * (2.0 * model.alpha).sqrt())
}

fn window_ceil(x: f64) -> u32 {
    (x.ceil() as u32).max(1)
}

/// Smallest integer window whose optimized Chernoff bound is at most ε,
/// found by bisection over `[M1, M2]` starting from `M̂`.
pub fn optimize_tw(model: &QueueLengthModel) -> Result<u32> {
    let (m1, m2) = tw_bounds(model);
    let eps = model.epsilon;
    let holds = |m: f64| bound_at_optimum(model, m) <= eps;

    if holds(m1 as f64) {
        return Ok(m1);
    }
    if !holds(m2 as f64) {
        return Err(ModelError::invalid(
            "epsilon",
            format!("Chernoff bound at the upper bracket M2 = {m2} exceeds ε = {eps}"),
        ));
    }

    let mut low = m1 as f64;
    let mut up = m2 as f64;
    let mut m = (tw_approx(model) as f64).clamp(low, up);
    for _ in 0..BISECTION_CAP {
        if holds(m) {
            up = m;
        } else {
            low = m;
        }
        if low.ceil() >= up.ceil() {
            break;
        }
        if up - low < 1e-12 {
            // Threshold sits on an integer; decide it directly.
            return Ok(if holds(low.ceil()) { low.ceil() as u32 } else { up.ceil() as u32 });
        }
        m = 0.5 * (low + up);
    }
    Ok(up.ceil() as u32)
}

/// Largest stable per-ONU rate `λ̂ = M / (N(M·X̄ + G))`; `None` is gated service.
pub fn stable_rate(window_limit: Option<u32>, onus: usize, service_mean: f64, guard: f64) -> f64 {
    let n = onus as f64;
    match window_limit {
        Some(m) => {
            let m = m as f64;
            m / (n * (m * service_mean + guard))
        }
        None => 1.0 / (n * service_mean),
    }
}

/// Operating region of an ONU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficRegion {
    /// Within the SLA; delay is guaranteed.
    Subscribed,
    /// Above the SLA but still stable; delay is degraded and bounded.
    Overloaded,
    /// At or beyond the window capacity; delay is unbounded.
    Saturated,
}

impl TrafficRegion {
    pub fn as_str(self) -> &'static str {
        match self {
            TrafficRegion::Subscribed => "subscribed",
            TrafficRegion::Overloaded => "overloaded",
            TrafficRegion::Saturated => "saturated",
        }
    }
}

impl fmt::Display for TrafficRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_region(rate: f64, subscribed_rate: f64, stable_rate: f64) -> TrafficRegion {
    if rate <= subscribed_rate {
        TrafficRegion::Subscribed
    } else if rate < stable_rate {
        TrafficRegion::Overloaded
    } else {
        TrafficRegion::Saturated
    }
}

/// Window sizes for an SLA together with the resulting traffic regions.
#[derive(Debug, Clone, PartialEq)]
pub struct TwRecommendation {
    pub model: QueueLengthModel,
    pub m1: u32,
    pub m_hat: u32,
    pub m_star: u32,
    pub m2: u32,
    pub subscribed_rate: f64,
    /// λ̂ for the recommended window M̂.
    pub stable_rate: f64,
    /// 1/(N·X̄), the gated-service capacity per ONU.
    pub capacity_rate: f64,
}

impl TwRecommendation {
    /// The window to deploy.
    pub fn recommended(&self) -> u32 {
        self.m_hat
    }

    pub fn region(&self, rate: f64) -> TrafficRegion {
        classify_region(rate, self.subscribed_rate, self.stable_rate)
    }
}

pub fn recommend(config: &SystemConfig) -> Result<TwRecommendation> {
    let model = queue_moments(config)?;
    let (m1, m2) = tw_bounds(&model);
    let m_hat = tw_approx(&model);
    let m_star = optimize_tw(&model)?;
    let x = config.service.mean();
    Ok(TwRecommendation {
        model,
        m1,
        m_hat,
        m_star,
        m2,
        subscribed_rate: config.subscribed_rate,
        stable_rate: stable_rate(Some(m_hat), config.onus, x, config.guard),
        capacity_rate: stable_rate(None, config.onus, x, config.guard),
    })
}
