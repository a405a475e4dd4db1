//! Delay models and the single-threaded execution of the asynchronous
//! mini-batch iteration
//!
//! ```text
//! g        = (1/b) Σᵢ ∇ₓF(x(d(k)), ξᵢ)
//! x(k + 1) = argmin_z ⟨g, z⟩ + Ψ(z) + (1/γ(k)) D_ω(x(k), z)
//! ```
//!
//! [`simulate`] draws `d(k)` from a [`DelayModel`]; [`replay`] re-executes a
//! recorded sequence of read indices (and, for threaded runs, the worker that
//! performed each update) bit for bit.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::composite::{mirror_step_into, phi_on, psi_value, CesaroAverage, ProblemSpec};
use crate::error::{check_dim, domain, Error, Result};
use crate::math;
use crate::oracle::{stream_rng, DataPoint, Dataset, Sampling, StochasticOracle};
use crate::schedules::{Schedule, ScheduleKind};

/// Default number of points the objective trace is evaluated on.
pub const DEFAULT_PHI_SAMPLE: usize = 2048;
/// Default number of trace checkpoints per run.
pub const DEFAULT_CHECKPOINTS: u64 = 500;

/// How the read index `d(k)` of update `k` is produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelayModel {
    /// `d(k) = k`: the serial mini-batch method.
    None,
    /// `p` workers updating in a fixed order: `d(k) = max(0, k − p + 1)`.
    Cyclic { workers: u64 },
    /// `τ(k)` uniform on `{0, …, min(k, τmax)}`.
    RandomBounded { tau_max: u64, seed: u64 },
    /// Explicit read indices, `d(k) = trace[k]`.
    Trace(Vec<u64>),
}

impl DelayModel {
    /// Upper bound on `τ(k)` produced by this model.
    pub fn tau_max(&self) -> u64 {
        match self {
            DelayModel::None => 0,
            DelayModel::Cyclic { workers } => workers.saturating_sub(1),
            DelayModel::RandomBounded { tau_max, .. } => *tau_max,
            DelayModel::Trace(t) => t
                .iter()
                .enumerate()
                .map(|(k, &d)| (k as u64).saturating_sub(d))
                .max()
                .unwrap_or(0),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DelayModel::None => "none".into(),
            DelayModel::Cyclic { workers } => format!("cyclic(p={workers})"),
            DelayModel::RandomBounded { tau_max, seed } => {
                format!("random(tau_max={tau_max},seed={seed})")
            }
            DelayModel::Trace(t) => format!("trace(len={})", t.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DelayModel::Cyclic { workers: 0 } => {
                Err(domain("cyclic delay needs at least one worker"))
            }
            DelayModel::Trace(t) => validate_trace(t),
            _ => Ok(()),
        }
    }
}

/// Checks `0 ≤ d(k) ≤ k` for every entry.
pub fn validate_trace(trace: &[u64]) -> Result<()> {
    match trace.iter().enumerate().find(|(k, &d)| d > *k as u64) {
        Some((k, &d)) => Err(Error::Delay { k: k as u64, d }),
        None => Ok(()),
    }
}

struct DelaySource<'m> {
    model: &'m DelayModel,
    rng: Option<ChaCha8Rng>,
}

impl<'m> DelaySource<'m> {
    fn new(model: &'m DelayModel) -> Self {
        let rng = match model {
            DelayModel::RandomBounded { seed, .. } => Some(stream_rng(*seed, u64::MAX)),
            _ => None,
        };
        DelaySource { model, rng }
    }

    fn next(&mut self, k: u64) -> Result<u64> {
        match self.model {
            DelayModel::None => Ok(k),
            DelayModel::Cyclic { workers } => Ok(k.saturating_sub(workers - 1)),
            DelayModel::RandomBounded { tau_max, .. } => {
                let rng = self.rng.as_mut().expect("random delay rng");
                let tau = rng.random_range(0..=k.min(*tau_max));
                Ok(k - tau)
            }
            DelayModel::Trace(t) => t.get(k as usize).copied().ok_or_else(|| {
                domain(format!(
                    "delay trace has {} entries, update {k} needs more",
                    t.len()
                ))
            }),
        }
    }
}

/// Audit entry for one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub k: u64,
    pub d_k: u64,
    pub tau_k: u64,
    pub gamma_k: f64,
    /// Objective at `x(k+1)`, present on traced updates.
    pub phi_k: Option<f64>,
    pub wall_ns: u64,
    pub worker: u32,
}

/// Objective and distance diagnostics after `k` updates.
///
/// `phi` is evaluated at the Cesàro average `x_ave(k)`, `phi_last` and
/// `dist_sq` at the last iterate `x(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub k: u64,
    pub phi: f64,
    pub phi_last: f64,
    pub dist_sq: Option<f64>,
    pub tau: u64,
    pub gamma: f64,
    pub wall_ns: u64,
}

/// Run settings that do not change the iterate sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Starting point; defaults to [`ProblemSpec::initial_point`].
    pub x0: Option<Vec<f64>>,
    /// Known optimizer for the distance trace.
    pub x_star: Option<Vec<f64>>,
    /// Explicit checkpoint list. When `None`, every `⌈T/500⌉` updates and at `T`.
    pub checkpoints: Option<Vec<u64>>,
    /// Number of points the traced objective is averaged over (strided subset).
    pub phi_sample: usize,
    /// Keep every n-th [`UpdateRecord`]; 0 keeps none.
    pub record_every: u64,
    pub sampling: Sampling,
    /// Stop at the first checkpoint whose `phi_last` is at or below this value.
    pub stop_below: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            x0: None,
            x_star: None,
            checkpoints: None,
            phi_sample: DEFAULT_PHI_SAMPLE,
            record_every: 1,
            sampling: Sampling::Iid,
            stop_below: None,
        }
    }
}

impl RunOptions {
    /// Sorted, deduplicated checkpoint list within `1..=iterations`.
    pub fn checkpoint_list(&self, iterations: u64) -> Vec<u64> {
        let mut ks: Vec<u64> = match &self.checkpoints {
            Some(list) => list
                .iter()
                .copied()
                .filter(|&k| k >= 1 && k <= iterations)
                .collect(),
            None => {
                let every = iterations.div_ceil(DEFAULT_CHECKPOINTS).max(1);
                let mut v: Vec<u64> = (1..=iterations / every).map(|i| i * every).collect();
                if iterations > 0 {
                    v.push(iterations);
                }
                v
            }
        };
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// What a run is solving and with which schedule.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub problem: &'a ProblemSpec,
    pub dataset: &'a Dataset,
    pub schedule: &'a Schedule,
    pub iterations: u64,
    pub batch: usize,
    pub seed: u64,
}

impl<'a> Experiment<'a> {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(domain("batch size must be at least 1"));
        }
        if self.dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(self.problem.dim(), self.dataset.dim())
    }

    /// Validated starting point.
    pub fn start(&self, opts: &RunOptions) -> Result<Vec<f64>> {
        let x0 = opts
            .x0
            .clone()
            .unwrap_or_else(|| self.problem.initial_point());
        check_dim(self.problem.dim(), x0.len())?;
        if !psi_value(&self.problem.reg, &x0).is_finite() {
            return Err(domain("starting point is outside dom Ψ"));
        }
        if let Some(xs) = &opts.x_star {
            check_dim(self.problem.dim(), xs.len())?;
        }
        Ok(x0)
    }

    /// Strided subset of the dataset used for traced objective values.
    pub fn phi_points(&self, opts: &RunOptions) -> Vec<DataPoint> {
        let pts = self.dataset.points();
        let m = pts.len();
        let s = opts.phi_sample.max(1);
        if m <= s {
            pts.to_vec()
        } else {
            (0..s).map(|i| pts[i * m / s].clone()).collect()
        }
    }
}

/// Echo of the configuration that produced a report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: String,
    pub iterations: u64,
    pub batch: usize,
    pub seed: u64,
    pub workers: u64,
    pub delay: String,
    pub schedule: ScheduleKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub final_x: Vec<f64>,
    pub cesaro_x: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub records: Vec<UpdateRecord>,
    /// Read index `d(k)` of every executed update.
    pub delays: Vec<u64>,
    /// Worker that performed each update; empty when all were worker 0.
    pub workers: Vec<u32>,
    /// Number of updates actually executed.
    pub iterations: u64,
    pub realized_tau_max: u64,
    /// Set when some realized delay exceeded the schedule's `τmax`.
    pub tau_exceeded: bool,
    pub total_wall_ns: u64,
    /// Time at which the `stop_below` target was first met.
    pub target_reached_ns: Option<u64>,
    pub config: RunConfig,
}

impl RunReport {
    pub fn final_trace(&self) -> Option<&TracePoint> {
        self.trace.last()
    }
}

/// Evaluates a checkpoint: objective at the average and the last iterate.
pub fn trace_point(
    problem: &ProblemSpec,
    phi_points: &[DataPoint],
    x_star: Option<&[f64]>,
    k: u64,
    last: &[f64],
    average: &[f64],
) -> TracePoint {
    TracePoint {
        k,
        phi: phi_on(problem, phi_points, average),
        phi_last: phi_on(problem, phi_points, last),
        dist_sq: x_star.map(|xs| last.iter().zip(xs).map(|(a, b)| (a - b) * (a - b)).sum()),
        tau: 0,
        gamma: 0.0,
        wall_ns: 0,
    }
}

/// Shared single-threaded loop behind [`simulate`] and [`replay`].
fn execute(
    exp: &Experiment<'_>,
    opts: &RunOptions,
    mut delay: impl FnMut(u64) -> Result<u64>,
    worker_of: impl Fn(u64) -> u32,
    ring_len: usize,
    config: RunConfig,
) -> Result<RunReport> {
    let problem = exp.problem;
    let n = problem.dim();
    let x0 = exp.start(opts)?;
    let phi_points = exp.phi_points(opts);
    let checkpoints = opts.checkpoint_list(exp.iterations);
    let mut next_cp = 0usize;

    let mut oracles: Vec<Option<StochasticOracle<'_>>> = Vec::new();
    let mut ring: VecDeque<Vec<f64>> = VecDeque::with_capacity(ring_len + 1);
    ring.push_back(x0.clone());
    let mut avg = CesaroAverage::new(n);
    let mut grad = vec![0.0; n];
    let mut spare = vec![0.0; n];
    let mut trace = Vec::with_capacity(checkpoints.len());
    let mut records = Vec::new();
    let mut delays = Vec::with_capacity(exp.iterations as usize);
    let mut workers = Vec::new();
    let mut any_worker = false;
    let mut realized_tau_max = 0;
    let mut target_reached = false;

    for k in 0..exp.iterations {
        let d = delay(k)?;
        let tau = k.checked_sub(d).ok_or(Error::Delay { k, d })?;
        if tau as usize >= ring.len() {
            return Err(Error::Delay { k, d });
        }
        realized_tau_max = realized_tau_max.max(tau);

        let w = worker_of(k);
        if w as usize >= oracles.len() {
            oracles.resize_with(w as usize + 1, || None);
        }
        let oracle = oracles[w as usize].get_or_insert_with(|| {
            StochasticOracle::with_stream(exp.dataset, problem.loss, exp.seed, w as u64)
                .sampling(opts.sampling)
        });
        let read = &ring[ring.len() - 1 - tau as usize];
        oracle.batch_gradient_into(read, exp.batch, &mut grad)?;

        let gamma = exp.schedule.gamma_at(k);
        mirror_step_into(
            &problem.dg,
            &problem.reg,
            ring.back().unwrap(),
            &grad,
            gamma,
            &mut spare,
        )?;
        avg.push(&spare);
        ring.push_back(core::mem::take(&mut spare));
        spare = if ring.len() > ring_len {
            ring.pop_front().unwrap()
        } else {
            vec![0.0; n]
        };

        delays.push(d);
        workers.push(w);
        any_worker |= w != 0;

        let mut phi_k = None;
        if checkpoints.get(next_cp) == Some(&(k + 1)) {
            next_cp += 1;
            let mean = avg.mean().unwrap();
            let mut tp = trace_point(
                problem,
                &phi_points,
                opts.x_star.as_deref(),
                k + 1,
                ring.back().unwrap(),
                &mean,
            );
            tp.tau = tau;
            tp.gamma = gamma;
            phi_k = Some(tp.phi_last);
            if opts.stop_below.is_some_and(|target| tp.phi_last <= target) {
                target_reached = true;
            }
            trace.push(tp);
        }
        if opts.record_every > 0 && k.is_multiple_of(opts.record_every) {
            records.push(UpdateRecord {
                k,
                d_k: d,
                tau_k: tau,
                gamma_k: gamma,
                phi_k,
                wall_ns: 0,
                worker: w,
            });
        }
        if target_reached {
            break;
        }
    }

    let iterations = delays.len() as u64;
    let final_x = ring.pop_back().unwrap();
    let cesaro_x = avg.mean().unwrap_or_else(|| x0.clone());
    if !any_worker {
        workers.clear();
    }
    Ok(RunReport {
        final_x,
        cesaro_x,
        trace,
        records,
        delays,
        workers,
        iterations,
        realized_tau_max,
        tau_exceeded: realized_tau_max > exp.schedule.params().tau_max,
        total_wall_ns: 0,
        target_reached_ns: if target_reached { Some(0) } else { None },
        config,
    })
}

/// Deterministic single-threaded run with delays from `delay`.
pub fn simulate(exp: &Experiment<'_>, delay: &DelayModel, opts: &RunOptions) -> Result<RunReport> {
    exp.validate()?;
    delay.validate()?;
    if exp.iterations == 0 {
        return Err(domain("at least one iteration is required"));
    }
    let mut source = DelaySource::new(delay);
    let ring_len = delay.tau_max() as usize + 1;
    let config = RunConfig {
        mode: "simulate".into(),
        iterations: exp.iterations,
        batch: exp.batch,
        seed: exp.seed,
        workers: match delay {
            DelayModel::Cyclic { workers } => *workers,
            _ => 1,
        },
        delay: delay.describe(),
        schedule: exp.schedule.kind(),
    };
    execute(exp, opts, |k| source.next(k), |_| 0, ring_len, config)
}

/// Re-executes a recorded run.
///
/// `trace[k]` is the read index of update `k`. `workers[k]`, when given,
/// names the worker whose private random stream supplied update `k`'s
/// samples; without it every update draws from stream 0, as in [`simulate`].
pub fn replay(
    exp: &Experiment<'_>,
    trace: &[u64],
    workers: Option<&[u32]>,
    opts: &RunOptions,
) -> Result<RunReport> {
    exp.validate()?;
    validate_trace(trace)?;
    if (trace.len() as u64) < exp.iterations {
        return Err(domain(format!(
            "delay trace has {} entries, {} iterations requested",
            trace.len(),
            exp.iterations
        )));
    }
    if let Some(w) = workers {
        if (w.len() as u64) < exp.iterations {
            return Err(domain(
                "worker log is shorter than the requested iterations",
            ));
        }
    }
    let used = &trace[..exp.iterations as usize];
    let ring_len = DelayModel::Trace(used.to_vec()).tau_max() as usize + 1;
    let config = RunConfig {
        mode: "replay".into(),
        iterations: exp.iterations,
        batch: exp.batch,
        seed: exp.seed,
        workers: workers.map_or(1, |w| w.iter().copied().max().unwrap_or(0) as u64 + 1),
        delay: format!("trace(len={})", used.len()),
        schedule: exp.schedule.kind(),
    };
    execute(
        exp,
        opts,
        |k| Ok(used[k as usize]),
        |k| workers.map_or(0, |w| w[k as usize]),
        ring_len,
        config,
    )
}

/// Squared ℓ2 distance, used for `‖x(T) − x*‖²`.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| math::ln(*v)).collect();
    let ly: Vec<f64> = ys.iter().map(|v| math::ln(*v)).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}
