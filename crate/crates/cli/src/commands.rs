use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use epon_gls::chain::analytic_report;
use epon_gls::model::{AnalyticReport, SystemConfig};
use epon_gls::optimizer::{classify_region, recommend, stable_rate};
use epon_gls::sim::{
    capture_scenario, run_simulation, Discipline, OnuSetup, RunSettings, SimReport, SimScenario,
    CAPTURE_WINDOW_LIMIT,
};
use epon_gls::ModelError;
use log::{info, warn};

use crate::config::parse_config;
use crate::error::{CliError, Result};
use crate::format::{csv_line, sig};
use crate::{Axis, Command, RunArgs};

pub const SWEEP_COLUMNS: [&str; 9] = [
    "rho_E",
    "M",
    "W_analytic_us",
    "W_sim_us",
    "W_sim_ci_us",
    "sigmaB2_analytic",
    "sigmaB2_sim",
    "tail_prob_sim",
    "region",
];

pub const ANALYZE_COLUMNS: [&str; 14] = [
    "rho_E",
    "M",
    "W_us",
    "sigmaB2_us2",
    "K",
    "K2",
    "V_us",
    "V2_us2",
    "cycle_mean_us",
    "cycle_var_us2",
    "mean_inside",
    "mean_outside",
    "tail_prob",
    "iterations",
];

pub const SIMULATE_COLUMNS: [&str; 11] = [
    "onu",
    "rate_pkts_per_ms",
    "M",
    "W_us",
    "W_ci_us",
    "sigmaB2_us2",
    "tail_prob",
    "mean_inside",
    "mean_outside",
    "served",
    "remaining",
];

pub const VALIDATE_COLUMNS: [&str; 7] =
    ["quantity", "analytic", "simulated", "ci_half_width", "rel_error", "tolerance", "status"];

pub const CAPTURE_COLUMNS: [&str; 6] =
    ["rate2_pkts_per_ms", "discipline", "W1_us", "W1_ci_us", "W2_us", "W2_ci_us"];

pub fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Analyze { io } => {
            let config = load(&io.config)?;
            emit(&io.output, &analyze(&config)?)
        }
        Command::Optimize { io } => {
            let config = load(&io.config)?;
            emit(&io.output, &optimize(&config)?)
        }
        Command::Simulate { io, run } => {
            let config = load(&io.config)?;
            emit(&io.output, &simulate(&config, run)?)
        }
        Command::Sweep {
            io,
            axis,
            simulate,
            run,
        } => {
            let config = load(&io.config)?;
            emit(&io.output, &sweep(&config, &axis, simulate.then_some(run))?)
        }
        Command::Validate {
            io,
            run,
            tolerance,
            busy_tolerance,
        } => {
            let config = load(&io.config)?;
            let outcome = validate(&config, run, tolerance / 100.0, busy_tolerance / 100.0)?;
            emit(&io.output, &outcome.table)?;
            match outcome.failures.is_empty() {
                true => Ok(()),
                false => Err(CliError::Validation(outcome.failures.join(", "))),
            }
        }
        Command::CaptureDemo { output, axis, run } => emit(&output, &capture_demo(&axis, run)?),
    }
}

fn load(path: &Path) -> Result<SystemConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            action: "write",
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn window_cell(limit: Option<u32>) -> String {
    limit.map_or_else(|| "gated".to_string(), |m| m.to_string())
}

pub fn analyze(config: &SystemConfig) -> Result<String> {
    let r = analytic_report(config)?;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    kv("onus", config.onus.to_string());
    kv("rate_pkts_per_ms", sig(r.rate * 1000.0));
    kv("rho", sig(r.load));
    kv("rho_E", sig(r.offered_load));
    kv("window_limit_pkts", window_cell(r.window_limit));
    kv("V_us", sig(r.vacation_mean));
    kv("V2_us2", sig(r.vacation_second_moment));
    kv("B_us", sig(r.busy_mean));
    kv("sigmaB2_us2", sig(r.busy_variance));
    kv("K", sig(r.window_mean));
    kv("K2", sig(r.window_second_moment));
    kv("mu_C_us", sig(r.cycle_mean));
    kv("sigmaC2_us2", sig(r.cycle_variance));
    for (n, q) in r.q.iter().enumerate() {
        kv(&format!("q_{n}"), sig(*q));
    }
    kv("tail_prob", sig(r.tail_probability));
    kv("R_us", sig(r.residual));
    kv("Y_us", sig(r.whole_vacations));
    kv("mean_inside", sig(r.mean_inside));
    kv("mean_outside", sig(r.mean_outside));
    kv("N_Q", sig(r.queue_length));
    kv("W_us", sig(r.mean_wait));
    kv("iterations", r.iterations.to_string());
    out.push('\n');
    out.push_str(&csv_line(ANALYZE_COLUMNS));
    out.push_str(&csv_line([
        sig(r.offered_load),
        window_cell(r.window_limit),
        sig(r.mean_wait),
        sig(r.busy_variance),
        sig(r.window_mean),
        sig(r.window_second_moment),
        sig(r.vacation_mean),
        sig(r.vacation_second_moment),
        sig(r.cycle_mean),
        sig(r.cycle_variance),
        sig(r.mean_inside),
        sig(r.mean_outside),
        sig(r.tail_probability),
        r.iterations.to_string(),
    ]));
    Ok(out)
}

pub fn optimize(config: &SystemConfig) -> Result<String> {
    let rec = recommend(config)?;
    let m = &rec.model;
    let mut out = String::new();
    let per_ms = |r: f64| r * 1000.0;
    writeln!(out, "subscribed_rate_pkts_per_ms = {}", sig(per_ms(rec.subscribed_rate))).unwrap();
    writeln!(out, "epsilon = {}", sig(m.epsilon)).unwrap();
    writeln!(out, "mu_l = {}", sig(m.mean)).unwrap();
    writeln!(out, "sigma_l2 = {}", sig(m.variance)).unwrap();
    writeln!(out, "stable_rate_pkts_per_ms = {}", sig(per_ms(rec.stable_rate))).unwrap();
    writeln!(out, "capacity_rate_pkts_per_ms = {}", sig(per_ms(rec.capacity_rate))).unwrap();
    writeln!(
        out,
        "M1={}, M̂={}, M*={}, M2={}, λ̂={:.2} pkts/ms",
        rec.m1,
        rec.m_hat,
        rec.m_star,
        rec.m2,
        per_ms(rec.stable_rate)
    )
    .unwrap();
    writeln!(
        out,
        "regions: subscribed <= {} < overloaded < {} <= saturated (pkts/ms)",
        sig(per_ms(rec.subscribed_rate)),
        sig(per_ms(rec.stable_rate))
    )
    .unwrap();
    Ok(out)
}

fn scenario_for(config: &SystemConfig, rates: &[f64], run: RunArgs) -> SimScenario {
    let mut scenario = SimScenario::from_config(config, run.cycles, run.replications, run.seed);
    let discipline = Discipline::from_limit(config.window_limit);
    scenario.onus = rates.iter().map(|&rate| OnuSetup { rate, discipline }).collect();
    scenario
}

fn simulate_checked(scenario: &SimScenario) -> Result<SimReport> {
    let report = run_simulation(scenario)?;
    if report.low_confidence {
        warn!(
            "only {} post-warmup cycles observed; statistics have low confidence",
            report.observed_cycles
        );
    }
    Ok(report)
}

pub fn simulate(config: &SystemConfig, run: RunArgs) -> Result<String> {
    let report = simulate_checked(&scenario_for(config, &config.rates, run))?;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    kv("seed", report.seed.to_string());
    kv("rng", report.rng_algorithm.to_string());
    kv("replications", report.replications.to_string());
    kv("observed_cycles", report.observed_cycles.to_string());
    kv("low_confidence", report.low_confidence.to_string());
    kv("cycle_mean_us", sig(report.cycle_mean));
    kv("cycle_var_us2", sig(report.cycle_variance));
    let pooled = report.pooled_wait();
    kv("W_us", sig(pooled.mean));
    kv("W_ci_us", sig(pooled.half_width));
    kv("sigmaB2_us2", sig(report.pooled_busy_variance()));
    kv("tail_prob", sig(report.pooled_tail_probability()));
    kv("served", report.served().to_string());
    kv("remaining", report.remaining().to_string());
    out.push('\n');
    out.push_str(&csv_line(SIMULATE_COLUMNS));
    for (i, o) in report.onus.iter().enumerate() {
        out.push_str(&csv_line([
            (i + 1).to_string(),
            sig(o.rate * 1000.0),
            window_cell(o.discipline.limit()),
            sig(o.wait.mean),
            sig(o.wait.half_width),
            sig(o.busy_variance),
            sig(o.tail_probability),
            sig(o.mean_inside),
            sig(o.mean_outside),
            o.served.to_string(),
            o.remaining.to_string(),
        ]));
    }
    Ok(out)
}

/// One swept configuration: model inputs plus the per-ONU rate actually offered.
struct Point {
    config: SystemConfig,
    rate: f64,
    analytic: std::result::Result<AnalyticReport, ModelError>,
}

fn sweep_point(base: &SystemConfig, axis: &str, value: f64) -> Result<Point> {
    let n = base.onus;
    let x = base.service.mean();
    let mut config = base.clone();
    match axis {
        "rate" => config.rates = vec![value / 1000.0; n],
        "load" => config.rates = vec![value / (n as f64 * x); n],
        "window" => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(CliError::Config(format!("window axis needs integers >= 1, got {value}")));
            }
            config.window_limit = Some(value as u32);
        }
        "epsilon" => {
            config.epsilon = value;
            config.window_limit = Some(recommend(&config)?.recommended());
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep axis `{other}` (use rate, load, window or epsilon)"
            )))
        }
    }
    let rate = config.rates[0];
    let analytic = config.validate().and_then(|_| analytic_report(&config));
    Ok(Point {
        config,
        rate,
        analytic,
    })
}

/// Analytic value, or `inf` for a waiting time that is unbounded at this point.
fn analytic_cell(
    result: &std::result::Result<AnalyticReport, ModelError>,
    f: fn(&AnalyticReport) -> f64,
    unbounded_is_inf: bool,
) -> String {
    match result {
        Ok(r) => sig(f(r)),
        Err(ModelError::Unstable { .. } | ModelError::Saturated { .. }) if unbounded_is_inf => "inf".into(),
        Err(_) => "nan".into(),
    }
}

pub fn sweep(config: &SystemConfig, axis: &Axis, run: Option<RunArgs>) -> Result<String> {
    if !config.is_homogeneous() {
        return Err(ModelError::Heterogeneous.into());
    }
    let mut out = csv_line(std::iter::once(axis.name.as_str()).chain(SWEEP_COLUMNS));
    for value in axis.values() {
        let p = sweep_point(config, &axis.name, value)?;
        if let Err(e) = &p.analytic {
            info!("{} = {}: analytic model unavailable ({e})", axis.name, sig(value));
        }
        let limit = p.config.window_limit;
        let n = p.config.onus;
        let region = classify_region(
            p.rate,
            p.config.subscribed_rate,
            stable_rate(limit, n, p.config.service.mean(), p.config.guard),
        );
        let sim_cells = match run {
            Some(run) => {
                let report = simulate_checked(&scenario_for(&p.config, &p.config.rates, run))?;
                let w = report.pooled_wait();
                [
                    sig(w.mean),
                    sig(w.half_width),
                    sig(report.pooled_busy_variance()),
                    sig(report.pooled_tail_probability()),
                ]
            }
            None => Default::default(),
        };
        let [w_sim, w_ci, b_sim, tail_sim] = sim_cells;
        out.push_str(&csv_line([
            sig(value),
            sig(p.config.offered_load()),
            window_cell(limit),
            analytic_cell(&p.analytic, |r| r.mean_wait, true),
            w_sim,
            w_ci,
            analytic_cell(&p.analytic, |r| r.busy_variance, false),
            b_sim,
            tail_sim,
            region.to_string(),
        ]));
    }
    Ok(out)
}

pub struct Validation {
    pub table: String,
    pub failures: Vec<String>,
}

pub fn validate(config: &SystemConfig, run: RunArgs, tolerance: f64, busy_tolerance: f64) -> Result<Validation> {
    let analytic = analytic_report(config)?;
    let report = simulate_checked(&scenario_for(config, &config.rates, run))?;
    let mut table = csv_line(VALIDATE_COLUMNS);
    let mut failures = Vec::new();
    let mut row = |name: &str, a: f64, s: f64, ci: Option<f64>, tol: f64| {
        let rel = (s - a).abs() / a.abs();
        let inside_ci = ci.is_some_and(|h| (s - a).abs() <= h);
        let pass = rel <= tol || inside_ci;
        if !pass {
            failures.push(name.to_string());
        }
        table.push_str(&csv_line([
            name.to_string(),
            sig(a),
            sig(s),
            ci.map(sig).unwrap_or_default(),
            sig(rel),
            sig(tol),
            if pass { "pass" } else { "fail" }.to_string(),
        ]));
    };
    let wait = report.pooled_wait();
    row("W_us", analytic.mean_wait, wait.mean, Some(wait.half_width), tolerance);
    row("sigmaB2_us2", analytic.busy_variance, report.pooled_busy_variance(), None, busy_tolerance);
    row("cycle_mean_us", analytic.cycle_mean, report.cycle_mean, None, tolerance);

    if config.window_limit.is_some() {
        let tail = report.pooled_tail_probability();
        let limit = config.epsilon + 3.0 * report.pooled_tail_std_error();
        let pass = tail <= limit;
        if !pass {
            failures.push("tail_prob".into());
        }
        table.push_str(&csv_line([
            "tail_prob".to_string(),
            sig(analytic.tail_probability),
            sig(tail),
            String::new(),
            String::new(),
            format!("<={}", sig(limit)),
            if pass { "pass" } else { "fail" }.to_string(),
        ]));
    }
    Ok(Validation { table, failures })
}

pub fn capture_demo(axis: &Axis, run: RunArgs) -> Result<String> {
    let mut out = csv_line(CAPTURE_COLUMNS);
    let settings = RunSettings {
        cycles: run.cycles,
        replications: run.replications,
        seed: run.seed,
    };
    for rate2 in axis.values() {
        for (label, discipline) in [
            ("gated".to_string(), Discipline::Gated),
            (format!("limited-{CAPTURE_WINDOW_LIMIT}"), Discipline::Limited(CAPTURE_WINDOW_LIMIT)),
        ] {
            let report = simulate_checked(&capture_scenario(rate2 / 1000.0, discipline, settings)?)?;
            let (a, b) = (&report.onus[0].wait, &report.onus[1].wait);
            out.push_str(&csv_line([
                sig(rate2),
                label,
                sig(a.mean),
                sig(a.half_width),
                sig(b.mean),
                sig(b.half_width),
            ]));
        }
    }
    Ok(out)
}
