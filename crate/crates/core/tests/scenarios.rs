use eee_core::sim::{
    simulate_source, simulate_with, CycleBreakdown, SimOptions, SimReport, StateInterval,
};
use eee_core::traffic::{Arrival, ScriptedSource};
use eee_core::{energy_ratio, CoalescingConfig, PhyProfile, PhyState, SimTime, TrafficSpec};

fn us(v: f64) -> SimTime {
    SimTime::from_micros(v)
}

fn run_scripted(arrivals_us: &[f64], horizon_us: f64) -> SimReport {
    let profile = PhyProfile::<f64>::dual_mode_40g();
    let cfg = CoalescingConfig::no_coalescing();
    let src = ScriptedSource::new(
        arrivals_us
            .iter()
            .map(|t| Arrival {
                time: t * 1e-6,
                size: 1500,
            })
            .collect(),
    );
    let report =
        simulate_source(&profile, &cfg, src, horizon_us * 1e-6, SimOptions::traced()).unwrap();
    report.check_invariants().unwrap();
    report
}

fn intervals(report: &SimReport, n: usize) -> Vec<(PhyState, SimTime, SimTime)> {
    report
        .state_log
        .iter()
        .take(n)
        .map(|&StateInterval { state, start, end }| (state, start, end))
        .collect()
}

#[test]
fn wake_from_deep_sleep() {
    let r = run_scripted(&[10.0], 20.0);
    assert_eq!(
        intervals(&r, 6),
        vec![
            (PhyState::AtoF, us(0.0), us(0.9)),
            (PhyState::FastWake, us(0.9), us(4.4)),
            (PhyState::FtoD, us(4.4), us(5.4)),
            (PhyState::DeepSleep, us(5.4), us(10.0)),
            (PhyState::DtoA, us(10.0), us(15.5)),
            (PhyState::Active, us(15.5), us(15.8)),
        ]
    );
    let c: CycleBreakdown = r.cycle_log[0];
    assert_eq!(c.first_delay, us(5.5));
    assert_eq!(c.times.fast, us(3.5));
    assert_eq!(c.times.deep, us(4.6));
    assert_eq!(c.times.transition, us(7.4));
    assert_eq!(c.times.busy, us(0.3));
    assert!((r.mean_queue_delay - 5.5e-6).abs() < 1e-18);
    // after the cycle: AtoF [15.8, 16.7) then Fast-Wake until the horizon
    assert_eq!(r.times.fast, us(3.5 + 3.3));
    assert_eq!(r.times.total(), us(20.0));
}

#[test]
fn arrival_during_atof() {
    let r = run_scripted(&[0.5], 3.0);
    assert_eq!(
        intervals(&r, 4),
        vec![
            (PhyState::AtoF, us(0.0), us(0.9)),
            (PhyState::FastWake, us(0.9), us(0.9)),
            (PhyState::FtoA, us(0.9), us(1.24)),
            (PhyState::Active, us(1.24), us(1.54)),
        ]
    );
    assert_eq!(r.cycle_log[0].first_delay, us(0.74));
    assert_eq!(r.cycle_log[0].times.fast, SimTime::ZERO);
}

#[test]
fn arrival_during_fast_wake() {
    let r = run_scripted(&[2.0], 3.0);
    assert_eq!(
        intervals(&r, 4),
        vec![
            (PhyState::AtoF, us(0.0), us(0.9)),
            (PhyState::FastWake, us(0.9), us(2.0)),
            (PhyState::FtoA, us(2.0), us(2.34)),
            (PhyState::Active, us(2.34), us(2.64)),
        ]
    );
    assert_eq!(r.cycle_log[0].times.fast, us(1.1));
    assert_eq!(r.cycle_log[0].first_delay, us(0.34));
}

#[test]
fn first_frame_wait_is_bounded_without_coalescing() {
    let p = PhyProfile::<f64>::dual_mode_40g();
    let bound = SimTime::from_secs_f64(p.t_atof + p.t_idle + p.t_ftod + p.t_dtoa);
    for load in [0.5e9, 2e9, 10e9, 30e9] {
        let traffic = TrafficSpec::poisson_load(load, 1500).unwrap();
        let opts = SimOptions {
            record_cycles: true,
            record_states: false,
        };
        let r = simulate_with(
            &p,
            &CoalescingConfig::no_coalescing(),
            &traffic,
            0.02,
            9,
            opts,
        )
        .unwrap();
        assert!(!r.cycle_log.is_empty());
        for c in &r.cycle_log {
            assert!(c.first_delay <= bound, "{c:?}");
        }
    }
}

#[test]
fn simulation_tracks_model_at_moderate_horizon() {
    let p = PhyProfile::<f64>::dual_mode_40g();
    for (qf, qd) in [(1, 1), (2, 8), (8, 32)] {
        let cfg = CoalescingConfig::new(qf, qd).unwrap();
        for load in [2e9, 20e9] {
            let traffic = TrafficSpec::poisson_load(load, 1500).unwrap();
            let r = simulate_with(&p, &cfg, &traffic, 0.05, 1, SimOptions::default()).unwrap();
            r.check_invariants().unwrap();
            let m = energy_ratio(&p, &cfg, load / 12000.0, 1500.0).unwrap();
            assert!(
                (r.phi_sim - m.phi).abs() < 0.02,
                "({qf},{qd}) @ {load}: {} vs {}",
                r.phi_sim,
                m.phi
            );
        }
    }
}

#[test]
fn periodic_trace_never_reaches_fast_wake() {
    // 1 µs gaps, 0.3 µs service: the next frame always lands inside AtoF, so
    // the PHY never spends time in a low-power state.
    let records = (0..2000)
        .map(|i| eee_core::TraceRecord {
            timestamp: i as f64 * 1e-6,
            size: 1500,
        })
        .collect();
    let traffic = TrafficSpec::trace(records, 1.0).unwrap();
    let p = PhyProfile::<f64>::dual_mode_40g();
    let r = simulate_with(
        &p,
        &CoalescingConfig::no_coalescing(),
        &traffic,
        1999e-6,
        0,
        SimOptions::default(),
    )
    .unwrap();
    assert_eq!(r.times.fast, SimTime::ZERO);
    assert_eq!(r.times.deep, SimTime::ZERO);
    assert_eq!(r.phi_sim, 1.0);
}
