use asyncmb::run_threaded;
use asyncmb::synth::gen_strongly_convex;
use asyncmb_core::{
    replay, simulate, DelayModel, Experiment, RunOptions, Schedule, ScheduleParams,
};

fn setup() -> (asyncmb::synth::SyntheticProblem, Schedule) {
    let sp = gen_strongly_convex(6, 200, 1.0, 11).unwrap();
    let mut p = ScheduleParams::new(2.0, 3, 1.0, 1.0, 4);
    p.mu_psi = Some(1.0);
    (sp, Schedule::strongly_convex(p).unwrap())
}

#[test]
fn single_worker_matches_serial_simulation() {
    let (sp, sched) = setup();
    let exp = Experiment {
        problem: &sp.problem,
        dataset: &sp.dataset,
        schedule: &sched,
        iterations: 3000,
        batch: 4,
        seed: 5,
    };
    let opts = RunOptions {
        x_star: Some(sp.x_star.clone()),
        ..RunOptions::default()
    };
    let threaded = run_threaded(&exp, 1, &opts).unwrap();
    let serial = simulate(&exp, &DelayModel::None, &opts).unwrap();
    assert_eq!(threaded.realized_tau_max, 0);
    assert!(threaded
        .delays
        .iter()
        .enumerate()
        .all(|(k, &d)| d == k as u64));
    assert_eq!(threaded.final_x, serial.final_x);
    assert_eq!(threaded.cesaro_x, serial.cesaro_x);
    let phis = |r: &asyncmb_core::RunReport| {
        r.trace
            .iter()
            .map(|t| (t.k, t.phi, t.dist_sq))
            .collect::<Vec<_>>()
    };
    assert_eq!(phis(&threaded), phis(&serial));
}

#[test]
fn multi_worker_run_replays_exactly() {
    let (sp, sched) = setup();
    let exp = Experiment {
        problem: &sp.problem,
        dataset: &sp.dataset,
        schedule: &sched,
        iterations: 10_000,
        batch: 4,
        seed: 9,
    };
    let opts = RunOptions {
        record_every: 1,
        ..RunOptions::default()
    };
    let run = run_threaded(&exp, 4, &opts).unwrap();
    assert_eq!(run.iterations, 10_000);
    assert_eq!(run.delays.len(), 10_000);
    assert_eq!(run.records.len(), 10_000);
    for (k, r) in run.records.iter().enumerate() {
        assert_eq!(r.k, k as u64);
        assert_eq!(r.tau_k, r.k - r.d_k);
        assert!(r.tau_k <= run.realized_tau_max);
    }
    // the counter advances monotonically in wall time
    assert!(run.records.windows(2).all(|w| w[0].wall_ns <= w[1].wall_ns));
    assert_eq!(run.tau_exceeded, run.realized_tau_max > 3);

    let workers = if run.workers.is_empty() {
        vec![0; run.delays.len()]
    } else {
        run.workers.clone()
    };
    let again = replay(&exp, &run.delays, Some(&workers), &opts).unwrap();
    assert_eq!(again.final_x, run.final_x);
    assert_eq!(again.cesaro_x, run.cesaro_x);
}

#[test]
fn stop_rule_and_errors() {
    let (sp, sched) = setup();
    let exp = Experiment {
        problem: &sp.problem,
        dataset: &sp.dataset,
        schedule: &sched,
        iterations: 20_000,
        batch: 4,
        seed: 1,
    };
    assert!(run_threaded(&exp, 0, &RunOptions::default()).is_err());
    let zero = Experiment {
        iterations: 0,
        ..exp
    };
    assert!(run_threaded(&zero, 2, &RunOptions::default()).is_err());

    let opts = RunOptions {
        stop_below: Some(sp.phi_star + 0.05),
        ..RunOptions::default()
    };
    let run = run_threaded(&exp, 2, &opts).unwrap();
    assert!(run.target_reached_ns.is_some());
    assert!(run.iterations < 20_000);
    let hit = run
        .trace
        .iter()
        .find(|t| t.phi_last <= sp.phi_star + 0.05)
        .unwrap();
    assert_eq!(Some(hit.wall_ns), run.target_reached_ns);
}
