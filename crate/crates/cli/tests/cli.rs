use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epon_cli::config::{emit_config, parse_config};
use proptest::prelude::*;
use tempfile::TempDir;

const LOW: &str = r#"{
  "onus": 32,
  "guard_us": 1.512,
  "service": {"kind": "deterministic", "value_us": 1.0},
  "rate_pkts_per_ms": 9.375,
  "window_limit_pkts": "auto",
  "epsilon": 0.05
}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn epon_tw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epon-tw")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn optimize_low_rate_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "low.json", LOW);
    let out = epon_tw(&["optimize", "--config", p(&cfg)]);
    assert!(out.status.success());
    assert!(
        stdout(&out).contains("M1=1, M̂=3, M*=4, M2=8, λ̂=20.78 pkts/ms"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn optimize_high_rate_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "high.json", &LOW.replace("9.375", "21.875"));
    let out = epon_tw(&["optimize", "--config", p(&cfg)]);
    assert!(stdout(&out).contains("M1=5, M̂=9, M*=10, M2=13, λ̂=26.76 pkts/ms"), "{}", stdout(&out));
}

#[test]
fn sweep_header_golden() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "low.json", LOW);
    let csv = dir.path().join("sweep.csv");
    let out = epon_tw(&["sweep", "--config", p(&cfg), "--axis", "rate:5:15:5", "--output", p(&csv)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rate,rho_E,M,W_analytic_us,W_sim_us,W_sim_ci_us,sigmaB2_analytic,sigmaB2_sim,tail_prob_sim,region"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[..3], ["5", "0.16", "3"]);
    assert_eq!(first[9], "subscribed");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn empty_sweep_is_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "low.json", LOW);
    let out = epon_tw(&["sweep", "--config", p(&cfg), "--axis", "rate:10:5:1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 1);
}

#[test]
fn sweep_with_simulation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "low.json", LOW);
    let args = [
        "sweep", "--config", p(&cfg), "--axis", "rate:9:10:1", "--simulate", "--cycles", "3000",
        "--replications", "2", "--seed", "4",
    ];
    let (a, b) = (epon_tw(&args), epon_tw(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let row: Vec<String> = stdout(&a).lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert!(row[4].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn analyze_golden_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "high.json", &LOW.replace("9.375", "21.875"));
    let out = epon_tw(&["analyze", "--config", p(&cfg)]);
    let text = stdout(&out);
    assert!(text.contains("rho_E = 0.7\n"));
    assert!(text.contains("window_limit_pkts = 9\n"));
    assert!(text.contains(
        "rho_E,M,W_us,sigmaB2_us2,K,K2,V_us,V2_us2,cycle_mean_us,cycle_var_us2,mean_inside,mean_outside,tail_prob,iterations\n"
    ));
}

#[test]
fn validate_baseline_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "high.json", &LOW.replace("9.375", "21.875"));
    let out = epon_tw(&["validate", "--config", p(&cfg), "--cycles", "40000", "--replications", "2"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    assert!(text.starts_with("quantity,analytic,simulated,ci_half_width,rel_error,tolerance,status\n"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",pass")).count(), 4, "{text}");
}

#[test]
fn validate_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "high.json", &LOW.replace("9.375", "21.875"));
    let out = epon_tw(&[
        "validate", "--config", p(&cfg), "--cycles", "2000", "--replications", "1", "--tolerance", "0",
        "--busy-tolerance", "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let full = write(&dir, "full.json", &LOW.replace("9.375", "31.25"));
    let out = epon_tw(&["analyze", "--config", p(&full)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate_pkts_per_ms"));

    let missing = dir.path().join("nope.json");
    assert_eq!(epon_tw(&["analyze", "--config", p(&missing)]).status.code(), Some(5));

    // M = 2 cannot carry 21.875 pkts/ms: unbounded waiting time
    let tight = write(
        &dir,
        "tight.json",
        &LOW.replace("9.375", "21.875").replace("\"auto\"", "2"),
    );
    assert_eq!(epon_tw(&["analyze", "--config", p(&tight)]).status.code(), Some(4));
}

#[test]
fn capture_demo_columns() {
    let out = epon_tw(&["capture-demo", "--axis", "rate2:300:300:50", "--cycles", "2000", "--replications", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rate2_pkts_per_ms,discipline,W1_us,W1_ci_us,W2_us,W2_ci_us");
    assert!(lines[1].starts_with("300,gated,"));
    assert!(lines[2].starts_with("300,limited-4,"));
}

#[test]
fn simulate_reports_every_onu() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "two.json",
        r#"{"guard_us": 1.512, "service": {"kind": "exponential", "mean_us": 1.0},
            "rates_pkts_per_ms": [300, 350], "subscribed_rate_pkts_per_ms": 300,
            "window_limit_pkts": 4, "epsilon": 0.05}"#,
    );
    let out = epon_tw(&["simulate", "--config", p(&cfg), "--cycles", "5000", "--replications", "2"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("rng = ChaCha8"));
    assert!(text.contains("onu,rate_pkts_per_ms,M,W_us,W_ci_us,sigmaB2_us2,tail_prob,mean_inside,mean_outside,served,remaining"));
    assert!(text.contains("\n2,350,4,"));
}

#[test]
fn emitted_config_round_trips() {
    let config = parse_config(LOW).unwrap();
    assert_eq!(parse_config(&emit_config(&config)).unwrap(), config);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parsed_configs_round_trip(
        onus in 1usize..64,
        guard in 0.1f64..10.0,
        load in 0.0f64..0.95,
        window in proptest::option::of(1u32..100),
        eps in 0.001f64..0.2,
        exponential in any::<bool>(),
    ) {
        let (service, mean) = if exponential {
            (r#"{"kind": "exponential", "mean_us": 0.8}"#, 0.8)
        } else {
            (r#"{"kind": "deterministic", "value_us": 1.3}"#, 1.3)
        };
        let rate_per_ms = 1000.0 * load / (onus as f64 * mean);
        let window = window.map_or("null".to_string(), |m| m.to_string());
        let doc = format!(
            r#"{{"onus": {onus}, "guard_us": {guard}, "service": {service},
                "rate_pkts_per_ms": {rate_per_ms}, "window_limit_pkts": {window}, "epsilon": {eps}}}"#
        );
        let config = parse_config(&doc).unwrap();
        prop_assert_eq!(parse_config(&emit_config(&config)).unwrap(), config);
    }
}
