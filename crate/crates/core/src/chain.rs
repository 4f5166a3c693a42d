//! Embedded Markov chain of the queue length reported at the end of each window.
//!
//! The reported queue obeys `l_{j+1} = (l_j − M)⁺ + a_j`, where `a_j` counts
//! Poisson arrivals during a cycle whose length is approximately Gaussian.
//! Its generating function has `M` unknown boundary probabilities
//! `q_0..q_{M−1}`, fixed by the `M − 1` zeros of `z^M − H(z)` strictly inside
//! the unit disk plus the normalization `Q(1) = 1`. The cycle variance itself
//! depends on `K̄²`, which depends on the `q_n`; a fixed-point iteration
//! couples the two.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{ModelError, Result};
use crate::model::{self, AnalyticReport, SystemConfig};
use crate::optimizer::regular_k2;

/// Parameters of the arrivals-per-cycle generating function
/// `H(z) = exp[−λμ_C(1−z) + ½λ²σ_C²(1−z)²]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratingFunctionParams {
    /// λ (packets/μs)
    pub rate: f64,
    /// μ_C (μs)
    pub cycle_mean: f64,
    /// σ_C² (μs²)
    pub cycle_variance: f64,
    /// M
    pub window_limit: usize,
}

impl GeneratingFunctionParams {
    pub fn new(rate: f64, cycle_mean: f64, cycle_variance: f64, window_limit: usize) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(ModelError::invalid("rate", "must be finite and non-negative"));
        }
        if !(cycle_mean > 0.0 && cycle_mean.is_finite()) {
            return Err(ModelError::invalid("cycle_mean", "must be positive"));
        }
        if !(cycle_variance >= 0.0 && cycle_variance.is_finite()) {
            return Err(ModelError::invalid("cycle_variance", "must be non-negative"));
        }
        if window_limit == 0 {
            return Err(ModelError::invalid("window_limit", "must be at least 1"));
        }
        Ok(Self {
            rate,
            cycle_mean,
            cycle_variance,
            window_limit,
        })
    }

    /// Mean arrivals per cycle, λμ_C.
    pub fn arrivals_mean(&self) -> f64 {
        self.rate * self.cycle_mean
    }

    /// λ²σ_C²
    pub fn arrivals_cycle_term(&self) -> f64 {
        self.rate * self.rate * self.cycle_variance
    }

    /// `ln H(z)`, analytic everywhere.
    pub fn log_pgf(&self, z: Complex64) -> Complex64 {
        let w = Complex64::new(1.0, 0.0) - z;
        -w * self.arrivals_mean() + w * w * (0.5 * self.arrivals_cycle_term())
    }

    fn log_pgf_derivative(&self, z: Complex64) -> Complex64 {
        let w = Complex64::new(1.0, 0.0) - z;
        Complex64::new(self.arrivals_mean(), 0.0) - w * self.arrivals_cycle_term()
    }
}

/// `H(z) = C*(λ(1−z))` with the Gaussian cycle-time transform.
pub fn arrival_pgf(params: &GeneratingFunctionParams, z: Complex64) -> Complex64 {
    params.log_pgf(z).exp()
}

/// Tuning knobs of the numerical procedures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold δ on successive `K̄²` values.
    pub k2_tolerance: f64,
    pub max_iterations: usize,
    /// Step tolerance of the root fixed-point map.
    pub root_step_tolerance: f64,
    /// Required `|z^M − H(z)|` at every accepted root.
    pub root_residual: f64,
    pub root_iteration_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            k2_tolerance: 1e-8,
            max_iterations: 500,
            root_step_tolerance: 1e-12,
            root_residual: 1e-10,
            root_iteration_cap: 10_000,
        }
    }
}

/// Converged state of the embedded chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSolution {
    pub params: GeneratingFunctionParams,
    /// q_0..q_{M−1}
    pub q: Vec<f64>,
    /// Zeros of `z^M − H(z)` inside the unit disk, `m = 1..M−1`.
    pub roots: Vec<Complex64>,
    pub window_mean: f64,
    pub window_second_moment: f64,
    pub iterations: usize,
    /// Final `|ΔK̄²|`.
    pub residual: f64,
    /// `K̄²` after every iteration.
    pub trace: Vec<f64>,
}

impl ChainSolution {
    /// Window-size distribution `b_0..b_M`.
    pub fn window_probs(&self) -> Vec<f64> {
        window_probs_from_q(&self.q)
    }

    /// Pr{l ≥ M}
    pub fn tail_probability(&self) -> f64 {
        (1.0 - self.q.iter().sum::<f64>()).max(0.0)
    }
}

fn window_probs_from_q(q: &[f64]) -> Vec<f64> {
    let mut b = q.to_vec();
    b.push((1.0 - q.iter().sum::<f64>()).max(0.0));
    b
}

fn k2_from_q(q: &[f64]) -> f64 {
    let m = q.len() as f64;
    let head: f64 = q.iter().enumerate().map(|(n, p)| (n * n) as f64 * p).sum();
    head + m * m * (1.0 - q.iter().sum::<f64>())
}

/// The `M − 1` zeros of `z^M − H(z)` strictly inside the unit disk.
///
/// Root `m` is the fixed point of `z ↦ e^{2πim/M}·exp(ln H(z) / M)` reached
/// from `z = 0`; a damped map is used when the plain one fails to settle, and
/// a few Newton steps on `z^M − H(z)` polish the result.
pub fn find_unit_disk_roots(
    params: &GeneratingFunctionParams,
    options: &SolverOptions,
) -> Result<Vec<Complex64>> {
    let m_total = params.window_limit;
    if params.arrivals_mean() >= m_total as f64 {
        return Err(ModelError::Unstable {
            denominator: m_total as f64 - params.arrivals_mean(),
        });
    }
    let mut roots: Vec<Complex64> = Vec::with_capacity(m_total.saturating_sub(1));
    for m in 1..m_total {
        let z = root_for_branch(params, m, options)?;
        let residual = characteristic(params, z).norm();
        if residual >= options.root_residual || z.norm() >= 1.0 {
            return Err(ModelError::RootNotConverged { index: m, residual });
        }
        if roots.iter().any(|r| (r - z).norm() < 1e-9) {
            return Err(ModelError::SingularSystem);
        }
        roots.push(z);
    }
    Ok(roots)
}

fn characteristic(params: &GeneratingFunctionParams, z: Complex64) -> Complex64 {
    z.powu(params.window_limit as u32) - arrival_pgf(params, z)
}

fn root_for_branch(
    params: &GeneratingFunctionParams,
    m: usize,
    options: &SolverOptions,
) -> Result<Complex64> {
    let big_m = params.window_limit as f64;
    let unity = Complex64::from_polar(1.0, 2.0 * PI * m as f64 / big_m);
    let map = |z: Complex64| unity * (params.log_pgf(z) / big_m).exp();

    let mut z = fixed_point(map, 1.0, options);
    if z.is_none() {
        z = fixed_point(map, 0.5, options);
    }
    let mut z = z.ok_or_else(|| ModelError::RootNotConverged {
        index: m,
        residual: f64::NAN,
    })?;

    for _ in 0..5 {
        let f = characteristic(params, z);
        let df = z.powu(params.window_limit as u32 - 1) * big_m
            - arrival_pgf(params, z) * params.log_pgf_derivative(z);
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        z -= step;
        if step.norm() < 1e-16 {
            break;
        }
    }
    Ok(z)
}

fn fixed_point(
    map: impl Fn(Complex64) -> Complex64,
    damping: f64,
    options: &SolverOptions,
) -> Option<Complex64> {
    let mut z = Complex64::new(0.0, 0.0);
    for _ in 0..options.root_iteration_cap {
        let next = map(z);
        let next = z + (next - z) * damping;
        if !(next.re.is_finite() && next.im.is_finite()) {
            return None;
        }
        if (next - z).norm() < options.root_step_tolerance {
            return Some(next);
        }
        z = next;
    }
    None
}

/// Boundary probabilities `q_0..q_{M−1}` from the roots and `Q(1) = 1`.
pub fn solve_boundary_probs(
    roots: &[Complex64],
    params: &GeneratingFunctionParams,
) -> Result<Vec<f64>> {
    let m = params.window_limit;
    if roots.len() + 1 != m {
        return Err(ModelError::invalid(
            "roots",
            format!("expected {} roots for M = {m}, got {}", m - 1, roots.len()),
        ));
    }
    let mut a = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    let mut rhs = vec![Complex64::new(0.0, 0.0); m];
    for (row, z) in roots.iter().enumerate() {
        let zm = z.powu(m as u32);
        let mut zn = Complex64::new(1.0, 0.0);
        for col in 0..m {
            a[row][col] = zm - zn;
            zn *= z;
        }
    }
    for col in 0..m {
        a[m - 1][col] = Complex64::new((m - col) as f64, 0.0);
    }
    rhs[m - 1] = Complex64::new(m as f64 - params.arrivals_mean(), 0.0);

    let solution = solve_dense(a, rhs)?;
    solution
        .iter()
        .enumerate()
        .map(|(n, q)| {
            if q.im.abs() > 1e-9 {
                return Err(ModelError::SingularSystem);
            }
            if q.re < -1e-9 {
                return Err(ModelError::NegativeProbability { index: n, value: q.re });
            }
            Ok(q.re.clamp(0.0, 1.0))
        })
        .collect()
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap_or(col);
        if a[pivot][col].norm() <= 1e-14 * scale {
            return Err(ModelError::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Fixed-point iteration for `K̄²`: start from 0, rebuild `H(z)` from the cycle
/// variance, solve the chain, recompute `K̄²`; stop when it moves by at most δ.
///
/// Damping `K̄² ← ½(old + new)` switches on if successive changes alternate
/// sign twice.
pub fn iterate_k2(config: &SystemConfig, options: &SolverOptions) -> Result<ChainSolution> {
    config.validate()?;
    let rate = config.common_rate()?;
    let m = config.window_limit.ok_or(ModelError::MissingWindowLimit)? as usize;
    let load = config.offered_load();
    let cycle_mean = model::mean_cycle(config.onus, config.guard, load)?;
    let k_mean = model::mean_packets_per_window(config.total_rate(), config.guard, load)?;

    if rate * cycle_mean >= m as f64 {
        return Err(ModelError::Unstable {
            denominator: m as f64 - rate * cycle_mean,
        });
    }

    if rate == 0.0 {
        let mut q = vec![0.0; m];
        q[0] = 1.0;
        return Ok(ChainSolution {
            params: GeneratingFunctionParams::new(0.0, cycle_mean, 0.0, m)?,
            q,
            roots: Vec::new(),
            window_mean: 0.0,
            window_second_moment: 0.0,
            iterations: 0,
            residual: 0.0,
            trace: Vec::new(),
        });
    }

    let x = config.service.mean();
    let service_var = config.service.variance();
    let onus = config.onus as f64;

    let mut k2 = 0.0;
    let mut trace = Vec::new();
    let mut last_change = f64::INFINITY;
    let mut sign_flips = 0;
    let mut damping = false;
    let mut previous_sign = 0.0;

    for iteration in 1..=options.max_iterations {
        // The zero seed gives a negative variance estimate; a cycle
        // variance cannot be negative.
        let busy_var = (x * x * (k2 - k_mean * k_mean) + k_mean * service_var).max(0.0);
        let params = GeneratingFunctionParams::new(rate, cycle_mean, onus * busy_var, m)?;
        let roots = find_unit_disk_roots(&params, options)?;
        let q = solve_boundary_probs(&roots, &params)?;
        let k2_step = k2_from_q(&q);
        let change = k2_step - k2;
        trace.push(k2_step);

        if change.abs() <= options.k2_tolerance {
            return Ok(ChainSolution {
                params,
                window_mean: k_mean,
                window_second_moment: k2_step,
                q,
                roots,
                iterations: iteration,
                residual: change.abs(),
                trace,
            });
        }

        let sign = change.signum();
        if previous_sign != 0.0 && sign != previous_sign {
            sign_flips += 1;
            if sign_flips >= 2 {
                damping = true;
            }
        }
        previous_sign = sign;
        last_change = change.abs();
        k2 = if damping { 0.5 * (k2 + k2_step) } else { k2_step };
    }

    Err(ModelError::IterationNotConverged {
        iterations: options.max_iterations,
        last_change,
        trace,
    })
}

/// Every analytic quantity for a homogeneous configuration.
///
/// With a finite window the second moment of `K` comes from the embedded
/// chain; with gated service (no limit) it comes from the regular-case
/// closed form and the waiting time is the gated limit.
pub fn analytic_report(config: &SystemConfig) -> Result<AnalyticReport> {
    analytic_report_with(config, &SolverOptions::default())
}

pub fn analytic_report_with(config: &SystemConfig, options: &SolverOptions) -> Result<AnalyticReport> {
    config.validate()?;
    let rate = config.common_rate()?;
    let service = &config.service;
    let load = config.offered_load();
    let vacation_mean = model::vacation_mean(config.onus, config.guard, load)?;
    let cycle_mean = model::mean_cycle(config.onus, config.guard, load)?;
    let window_mean = model::mean_packets_per_window(config.total_rate(), config.guard, load)?;

    let (window_second_moment, q, tail_probability, iterations) = match config.window_limit {
        Some(_) => {
            let solution = iterate_k2(config, options)?;
            let tail = solution.tail_probability();
            (solution.window_second_moment, solution.q, tail, solution.iterations)
        }
        None => (
            regular_k2(config.total_rate(), config.guard, load, config.onus, service)?,
            Vec::new(),
            0.0,
            0,
        ),
    };

    let busy_variance = model::busy_period_variance(service, window_mean, window_second_moment)?;
    let vacation_second_moment = model::second_vacation_moment(
        vacation_mean,
        config.onus,
        service,
        window_mean,
        window_second_moment,
    )?;
    let wait = model::mean_waiting_time(
        rate,
        service,
        vacation_mean,
        vacation_second_moment,
        window_mean,
        window_second_moment,
        config.window_limit.map(f64::from),
    )?;
    let per_onu_load = rate * service.mean();

    Ok(AnalyticReport {
        rate,
        load: per_onu_load,
        offered_load: load,
        window_limit: config.window_limit,
        vacation_mean,
        vacation_second_moment,
        busy_mean: per_onu_load * vacation_mean / (1.0 - per_onu_load),
        busy_variance,
        window_mean,
        window_second_moment,
        cycle_mean,
        cycle_variance: config.onus as f64 * busy_variance,
        q,
        tail_probability,
        residual: wait.residual,
        whole_vacations: wait.whole_vacations,
        mean_inside: wait.mean_inside,
        mean_outside: wait.mean_outside,
        queue_length: wait.queue_length,
        mean_wait: wait.mean_wait,
        iterations,
    })
}
