mod common;

use common::*;
use epon_gls::chain::analytic_report;
use epon_gls::model::ServiceTimeDist;
use epon_gls::sim::{
    capture_effect_scenario, capture_scenario, empirical_busy_variance, run_simulation, Discipline,
    PollingRun, RunSettings, SimScenario, HISTOGRAM_BINS,
};

fn scenario(onus: usize, rate: f64, discipline: Discipline, service: ServiceTimeDist) -> SimScenario {
    SimScenario::homogeneous(onus, 1.512, service, rate, discipline, 4000, 1, 42)
}

/// Walk a traced run and check every structural invariant cycle by cycle.
fn check_invariants(s: &SimScenario) {
    let mut run = PollingRun::new(s, 0, true);
    let n = s.onus.len();
    let mut last_departure = vec![f64::NEG_INFINITY; n];
    for _ in 0..s.cycles {
        run.step();
        let trace = run.last_trace().unwrap().clone();
        let windows: f64 = trace.windows.iter().map(|w| w.duration).sum();
        let identity = n as f64 * s.guard + windows;
        assert!((trace.duration - identity).abs() <= 1e-9 * trace.duration.max(1.0));
        for w in &trace.windows {
            let cap = s.onus[w.onu].discipline.limit().map_or(usize::MAX, |m| m as usize);
            assert!(w.packets <= cap);
            assert_eq!(w.admitted, w.reported.min(cap));
            assert_eq!(w.inside_after, w.admitted);
            for &a in &w.departures {
                assert!(a >= last_departure[w.onu], "FIFO violated at ONU {}", w.onu);
                assert!(a <= w.start + w.duration);
                last_departure[w.onu] = a;
            }
        }
        for i in 0..n {
            let (inside, outside) = run.buffer(i);
            assert!(inside <= s.onus[i].discipline.limit().map_or(usize::MAX, |m| m as usize));
            let (arrivals, served) = run.counts(i);
            assert_eq!(arrivals, served + (inside + outside) as u64);
        }
    }
}

#[test]
fn invariants_hold_for_each_discipline_and_service() {
    let services = [
        ServiceTimeDist::deterministic(1.0).unwrap(),
        ServiceTimeDist::exponential(1.0).unwrap(),
        ServiceTimeDist::empirical(vec![0.5, 1.0, 3.0], vec![0.5, 0.3, 0.2]).unwrap(),
    ];
    for service in services {
        for discipline in [Discipline::Gated, Discipline::Limited(1), Discipline::Limited(4)] {
            check_invariants(&scenario(4, 0.15, discipline, service.clone()));
        }
    }
    // overloaded ONU next to a light one
    let mut s = scenario(2, 0.3, Discipline::Limited(4), ServiceTimeDist::deterministic(1.0).unwrap());
    s.onus[1].rate = 0.6;
    check_invariants(&s);
}

#[test]
fn report_totals_are_consistent() {
    let s = SimScenario::homogeneous(8, 1.512, unit_service(), 0.08, Discipline::Limited(3), 20_000, 3, 5);
    let r = run_simulation(&s).unwrap();
    assert_eq!(r.observed_cycles, 3 * s.observed_cycles());
    assert_eq!(r.arrivals(), r.served() + r.remaining());
    for o in &r.onus {
        assert_eq!(o.report_histogram.len(), HISTOGRAM_BINS);
        assert_eq!(o.reports(), r.observed_cycles);
        assert!((0.0..=1.0).contains(&o.tail_probability));
        assert!(o.max_window_packets <= 3);
        assert!(o.wait.mean >= 0.0);
        assert!((o.report_distribution().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(r.rng_algorithm, "ChaCha8");
    assert!(!r.low_confidence);
}

#[test]
fn simulated_littles_law() {
    let config = paper_config(HIGH_RATE, Some(9));
    let r = run_simulation(&SimScenario::from_config(&config, 40_000, 2, 8)).unwrap();
    for o in &r.onus {
        let l = o.mean_inside + o.mean_outside;
        assert!(rel(l, o.rate * o.wait.mean) < 0.02, "L={l} λW={}", o.rate * o.wait.mean);
    }
    let analytic = analytic_report(&config).unwrap();
    let inside: f64 = r.onus.iter().map(|o| o.mean_inside).sum::<f64>() / N as f64;
    assert!(rel(inside, analytic.mean_inside) < 0.03, "{inside} vs {}", analytic.mean_inside);
}

#[test]
fn mean_cycle_matches_formula() {
    let config = paper_config(15.0, Some(7));
    let r = run_simulation(&SimScenario::from_config(&config, 30_000, 2, 9)).unwrap();
    let expected = N as f64 * G / (1.0 - config.offered_load());
    assert!(rel(r.cycle_mean, expected) < 0.01, "{} vs {expected}", r.cycle_mean);
}

#[test]
fn gated_busy_variance_grows_with_load() {
    let mut last = 0.0;
    for rate in [5.0, 10.0, 15.0, 20.0, 25.0] {
        let s = SimScenario::homogeneous(N, G, unit_service(), rate / 1000.0, Discipline::Gated, 20_000, 1, 3);
        let (vars, low) = empirical_busy_variance(&run_simulation(&s).unwrap());
        assert!(!low);
        let v = vars.iter().sum::<f64>() / vars.len() as f64;
        assert!(v > last, "σ_B² not increasing at {rate}: {v} ≤ {last}");
        last = v;
    }
}

#[test]
fn gated_capture_hurts_the_disciplined_onu() {
    let settings = RunSettings {
        cycles: 100_000,
        replications: 1,
        seed: 17,
    };
    let mut prev = 0.0;
    for rate2 in [0.35, 0.45, 0.55, 0.65] {
        let (w1, w2) = capture_effect_scenario(rate2, Discipline::Gated, settings).unwrap();
        assert!(w1 >= w2, "rate2 {rate2}: W1 {w1} < W2 {w2}");
        assert!(w1 > prev);
        prev = w1;
    }
}

#[test]
fn symmetric_capture_demo_is_fair() {
    let settings = RunSettings {
        cycles: 200_000,
        replications: 2,
        seed: 23,
    };
    let s = capture_scenario(0.3, Discipline::Limited(4), settings).unwrap();
    let r = run_simulation(&s).unwrap();
    assert!(r.onus[0].wait.overlaps(&r.onus[1].wait), "{:?} vs {:?}", r.onus[0].wait, r.onus[1].wait);
    assert!(r.onus.iter().all(|o| o.remaining < 50));
}
