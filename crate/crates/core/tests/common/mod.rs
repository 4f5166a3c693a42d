#![allow(dead_code)]

use epon_gls::model::{ServiceTimeDist, SystemConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

pub const N: usize = 32;
pub const G: f64 = 1.512;
pub const EPS: f64 = 0.05;
pub const LOW_RATE: f64 = 9.375;
pub const HIGH_RATE: f64 = 21.875;

pub fn unit_service() -> ServiceTimeDist {
    ServiceTimeDist::deterministic(1.0).unwrap()
}

/// 32 ONUs, G = 1.512 μs, X = 1 μs, every ONU at `rate_per_ms`.
pub fn paper_config(rate_per_ms: f64, window_limit: Option<u32>) -> SystemConfig {
    SystemConfig::homogeneous(N, G, unit_service(), rate_per_ms / 1000.0, window_limit, EPS).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Histogram of REPORT sizes from the Lindley recursion
/// `l' = l − min(l, M) + A`, `A ~ Poisson(λC)`, `C ~ Normal(μ_C, σ_C²)` cut at 0.
///
/// Returns the empirical `Pr{l = n}` for `n < M`.
pub fn lindley_report_probs(
    rate: f64,
    cycle_mean: f64,
    cycle_variance: f64,
    window_limit: usize,
    steps: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cycle = Normal::new(cycle_mean, cycle_variance.max(0.0).sqrt()).unwrap();
    let mut counts = vec![0u64; window_limit];
    let mut l: u64 = 0;
    let warmup = steps / 100;
    for step in 0..steps + warmup {
        if step >= warmup && (l as usize) < window_limit {
            counts[l as usize] += 1;
        }
        let c: f64 = cycle.sample(&mut rng).max(0.0);
        let mean = rate * c;
        let arrivals = if mean > 0.0 {
            Poisson::new(mean).unwrap().sample(&mut rng) as u64
        } else {
            0
        };
        l = l - l.min(window_limit as u64) + arrivals;
    }
    counts.iter().map(|&c| c as f64 / steps as f64).collect()
}

/// Total-variation distance between two distributions over `{0, …, M−1, ≥M}`
/// given their first `M` masses.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let head: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    let tail_p = 1.0 - p.iter().sum::<f64>();
    let tail_q = 1.0 - q.iter().sum::<f64>();
    0.5 * (head + (tail_p - tail_q).abs())
}
