//! Shared-memory runner: `p` threads share one decision vector.
//!
//! Each worker copies `x` and its version under a shared lock, computes a
//! mini-batch gradient on the private copy, then takes the exclusive lock to
//! apply the mirror step with `γ(k)` at the current version `k`. Snapshots are
//! always consistent (never torn).

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Instant;

use asyncmb_core::engine::{trace_point, RunConfig};
use asyncmb_core::{
    mirror_step_into, CesaroAverage, Experiment, RunOptions, RunReport, StochasticOracle,
    TracePoint, UpdateRecord,
};

use crate::error::{AppError, Result};

struct Cell {
    x: Vec<f64>,
    spare: Vec<f64>,
    version: u64,
    avg: CesaroAverage,
    delays: Vec<u64>,
    workers: Vec<u32>,
    records: Vec<UpdateRecord>,
    tau_max: u64,
}

struct Checkpoint {
    k: u64,
    last: Vec<f64>,
    mean: Vec<f64>,
    tau: u64,
    gamma: f64,
    wall_ns: u64,
}

/// Runs `exp` with `workers` threads. Worker `w` samples from random stream
/// `w` of `exp.seed`, so `(report.delays, report.workers)` replays the run
/// exactly through `asyncmb_core::replay`.
pub fn run_threaded(exp: &Experiment<'_>, workers: usize, opts: &RunOptions) -> Result<RunReport> {
    exp.validate()?;
    if workers == 0 {
        return Err(AppError::config(
            "engine.workers",
            "at least one worker is required",
        ));
    }
    if exp.iterations == 0 {
        return Err(AppError::config(
            "engine.iterations",
            "at least one iteration is required",
        ));
    }
    let cores = std::thread::available_parallelism().map_or(1, usize::from);
    if workers > cores {
        log::warn!("{workers} workers on {cores} available cores; threads will time-share");
    }

    let problem = exp.problem;
    let n = problem.dim();
    let x0 = exp.start(opts)?;
    let phi_points = exp.phi_points(opts);
    let checkpoints = opts.checkpoint_list(exp.iterations);
    let total = exp.iterations;

    let cell = RwLock::new(Cell {
        x: x0.clone(),
        spare: vec![0.0; n],
        version: 0,
        avg: CesaroAverage::new(n),
        delays: Vec::with_capacity(total as usize),
        workers: Vec::with_capacity(total as usize),
        records: Vec::new(),
        tau_max: 0,
    });
    let stop = AtomicBool::new(false);
    let trace: Mutex<Vec<TracePoint>> = Mutex::new(Vec::with_capacity(checkpoints.len()));
    let start = Instant::now();

    let worker_loop = |w: u32| -> Result<()> {
        let mut oracle =
            StochasticOracle::with_stream(exp.dataset, problem.loss, exp.seed, w as u64)
                .sampling(opts.sampling);
        let mut local = vec![0.0; n];
        let mut grad = vec![0.0; n];
        loop {
            if stop.load(Ordering::Relaxed) {
                return Ok(());
            }
            let k_read = {
                let c = cell.read().expect("state lock poisoned");
                if c.version >= total {
                    return Ok(());
                }
                local.copy_from_slice(&c.x);
                c.version
            };
            oracle.batch_gradient_into(&local, exp.batch, &mut grad)?;

            let pending = {
                let mut guard = cell.write().expect("state lock poisoned");
                if guard.version >= total || stop.load(Ordering::Relaxed) {
                    return Ok(());
                }
                let c = &mut *guard;
                let k = c.version;
                let gamma = exp.schedule.gamma_at(k);
                mirror_step_into(&problem.dg, &problem.reg, &c.x, &grad, gamma, &mut c.spare)?;
                std::mem::swap(&mut c.x, &mut c.spare);
                c.version = k + 1;
                c.avg.push(&c.x);
                let tau = k - k_read;
                c.tau_max = c.tau_max.max(tau);
                c.delays.push(k_read);
                c.workers.push(w);
                let wall_ns = start.elapsed().as_nanos() as u64;
                if opts.record_every > 0 && k.is_multiple_of(opts.record_every) {
                    c.records.push(UpdateRecord {
                        k,
                        d_k: k_read,
                        tau_k: tau,
                        gamma_k: gamma,
                        phi_k: None,
                        wall_ns,
                        worker: w,
                    });
                }
                checkpoints
                    .binary_search(&(k + 1))
                    .ok()
                    .map(|_| Checkpoint {
                        k: k + 1,
                        last: c.x.clone(),
                        mean: c.avg.mean().expect("at least one update"),
                        tau,
                        gamma,
                        wall_ns,
                    })
            };

            if let Some(cp) = pending {
                let mut tp = trace_point(
                    problem,
                    &phi_points,
                    opts.x_star.as_deref(),
                    cp.k,
                    &cp.last,
                    &cp.mean,
                );
                tp.tau = cp.tau;
                tp.gamma = cp.gamma;
                tp.wall_ns = cp.wall_ns;
                if opts.stop_below.is_some_and(|target| tp.phi_last <= target) {
                    stop.store(true, Ordering::Relaxed);
                }
                trace.lock().expect("trace lock poisoned").push(tp);
            }
        }
    };

    let outcome: Result<()> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers as u32)
            .map(|w| {
                let worker_loop = &worker_loop;
                let stop = &stop;
                s.spawn(move || {
                    let r = worker_loop(w);
                    if r.is_err() {
                        stop.store(true, Ordering::Relaxed);
                    }
                    r
                })
            })
            .collect();
        let mut first = Ok(());
        for h in handles {
            let r = h.join().expect("worker panicked");
            if first.is_ok() {
                first = r;
            }
        }
        first
    });
    outcome?;
    let total_wall_ns = start.elapsed().as_nanos() as u64;

    let cell = cell.into_inner().expect("state lock poisoned");
    let mut trace = trace.into_inner().expect("trace lock poisoned");
    trace.sort_by_key(|tp| tp.k);
    let target_reached_ns = opts.stop_below.and_then(|target| {
        trace
            .iter()
            .find(|tp| tp.phi_last <= target)
            .map(|tp| tp.wall_ns)
    });
    let mut records = cell.records;
    for r in &mut records {
        if let Ok(i) = trace.binary_search_by_key(&(r.k + 1), |tp| tp.k) {
            r.phi_k = Some(trace[i].phi_last);
        }
    }
    let worker_log = if cell.workers.iter().all(|&w| w == 0) {
        Vec::new()
    } else {
        cell.workers
    };
    let realized_tau_max = cell.tau_max;
    Ok(RunReport {
        cesaro_x: cell.avg.mean().unwrap_or(x0),
        final_x: cell.x,
        trace,
        records,
        iterations: cell.version,
        delays: cell.delays,
        workers: worker_log,
        realized_tau_max,
        tau_exceeded: realized_tau_max > exp.schedule.params().tau_max,
        total_wall_ns,
        target_reached_ns,
        config: RunConfig {
            mode: "threaded".into(),
            iterations: exp.iterations,
            batch: exp.batch,
            seed: exp.seed,
            workers: workers as u64,
            delay: "realized".into(),
            schedule: exp.schedule.kind(),
        },
    })
}
