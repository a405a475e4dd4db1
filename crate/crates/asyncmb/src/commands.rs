//! The experiment commands behind the CLI.

use std::fmt;

use asyncmb_core::schedules::{
    bound_constant_step, bound_sqrt_decay, bound_strongly_convex, epsilon_targeted_gamma,
    horizon_gamma, iteration_complexity,
};
use asyncmb_core::{
    bregman, estimate_sigma, lipschitz_bound, phi_value, replay, simulate, variance_constant_c,
    Dataset, DelayModel, Experiment, GeneratorKind, ProblemSpec, Regularizer, RunOptions,
    RunReport, Schedule, ScheduleKind, ScheduleParams, StochasticOracle,
};

use crate::config::{
    DataSource, DelayChoice, ExperimentConfig, Loss, Mode, RegKind, ScheduleChoice,
};
use crate::error::{AppError, Result};
use crate::io::{read_int_log, read_libsvm, write_csv, write_int_log};
use crate::synth::{self, reference_solve, CERTIFY_TOL};
use crate::threaded::run_threaded;

/// Iterations used when neither the config nor the schedule fixes `T`.
pub const DEFAULT_ITERATIONS: u64 = 10_000;

/// Solver budget for the reference point reported by `run` and `replay`.
pub const RUN_REFERENCE_ITERATIONS: usize = 5_000;

/// How hard [`prepare`] works to find the optimizer of a generated logistic
/// problem (lasso and strongly convex problems are always solved exactly).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    /// Certified optimizer or an error.
    Exact,
    /// Best effort with at most this many solver iterations: a reference
    /// point, certified when the solver converges.
    Reference(usize),
    Nothing,
}

/// Dataset, problem and whatever is known about its optimum.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub problem: ProblemSpec,
    /// Certified optimizer.
    pub x_star: Option<Vec<f64>>,
    pub phi_star: Option<f64>,
    /// Approximate optimizer; equals `x_star` when that is known.
    pub x_ref: Option<Vec<f64>>,
}

fn require_loss(cfg: &ExperimentConfig, loss: Loss, source: &str) -> Result<()> {
    if cfg.composite.loss != loss {
        return Err(AppError::config(
            "composite.loss",
            format!("the {source} generator needs loss = {loss:?}"),
        ));
    }
    Ok(())
}

fn require_reg(cfg: &ExperimentConfig, reg: RegKind, source: &str) -> Result<()> {
    if cfg.composite.regularizer != reg {
        return Err(AppError::config(
            "composite.regularizer",
            format!("the {source} generator needs regularizer = {reg:?}"),
        ));
    }
    Ok(())
}

fn from_synthetic(sp: synth::SyntheticProblem) -> Prepared {
    Prepared {
        x_ref: Some(sp.x_star.clone()),
        phi_star: Some(sp.phi_star),
        x_star: Some(sp.x_star),
        problem: sp.problem,
        dataset: sp.dataset,
    }
}

/// Loads or generates the dataset described by `cfg`.
pub fn prepare(cfg: &ExperimentConfig, need: Need) -> Result<Prepared> {
    cfg.validate()?;
    let d = &cfg.data;
    let seed = cfg.data_seed();
    let euclidean = cfg.geometry.generator == crate::config::Generator::Euclidean;
    match d.source {
        DataSource::Lasso => {
            require_loss(cfg, Loss::Squared, "lasso")?;
            require_reg(cfg, RegKind::L1, "lasso")?;
            if !euclidean {
                return Err(AppError::config(
                    "geometry.generator",
                    "the lasso generator is euclidean",
                ));
            }
            let Regularizer::L1 { lambda } = cfg.regularizer()? else {
                unreachable!()
            };
            Ok(from_synthetic(synth::gen_lasso(
                d.n, d.m, d.sparsity, d.noise, lambda, seed,
            )?))
        }
        DataSource::StronglyConvex => {
            require_loss(cfg, Loss::Squared, "strongly_convex")?;
            require_reg(cfg, RegKind::L2, "strongly_convex")?;
            if !euclidean {
                return Err(AppError::config(
                    "geometry.generator",
                    "the strongly_convex generator is euclidean",
                ));
            }
            let Regularizer::L2 { rho } = cfg.regularizer()? else {
                unreachable!()
            };
            Ok(from_synthetic(synth::gen_strongly_convex(
                d.n, d.m, rho, seed,
            )?))
        }
        DataSource::Logistic | DataSource::Libsvm => {
            let dataset = if d.source == DataSource::Logistic {
                require_loss(cfg, Loss::Logistic, "logistic")?;
                synth::gen_logistic_dataset(d.n, d.m, d.density, seed)?
            } else {
                read_libsvm(d.path.as_deref().expect("validated"), cfg.loss(), 0)?
            };
            let problem = cfg.problem(dataset.dim())?;
            let mut prep = Prepared {
                dataset,
                problem,
                x_star: None,
                phi_star: None,
                x_ref: None,
            };
            let solvable =
                d.source == DataSource::Logistic && problem.dg.kind == GeneratorKind::Euclidean;
            match need {
                Need::Nothing => {}
                _ if !solvable => {
                    if need == Need::Exact {
                        return Err(AppError::config(
                            "data.source",
                            "a known optimizer is only available for generated euclidean problems",
                        ));
                    }
                }
                Need::Exact => {
                    let sp = synth::solve_certified(problem, prep.dataset)?;
                    return Ok(from_synthetic(sp));
                }
                Need::Reference(max_iter) => {
                    let sol = reference_solve(
                        &problem,
                        &prep.dataset,
                        None,
                        0.1 * CERTIFY_TOL,
                        max_iter,
                    )?;
                    if sol.residual < CERTIFY_TOL {
                        prep.phi_star = Some(phi_value(&problem, &prep.dataset, &sol.x));
                        prep.x_star = Some(sol.x.clone());
                    } else {
                        log::info!("reference solve stopped at residual {:.3e}", sol.residual);
                    }
                    prep.x_ref = Some(sol.x);
                }
            }
            Ok(prep)
        }
    }
}

/// Estimated problem constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub lipschitz: f64,
    pub sigma: f64,
    pub c: f64,
}

/// `L̂`, `σ̂` and `c` from the data. σ is probed at `x(0)`, at the reference
/// point when one is known, and at their midpoint.
pub fn estimate_constants(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Constants> {
    let problem = &prep.problem;
    let lipschitz = lipschitz_bound(problem.loss, &prep.dataset, problem.np)?;
    let x0 = problem.initial_point();
    let mut probes = vec![x0.clone()];
    if let Some(xr) = &prep.x_ref {
        probes.push(x0.iter().zip(xr).map(|(a, b)| 0.5 * (a + b)).collect());
        probes.push(xr.clone());
    }
    let mut oracle =
        StochasticOracle::with_stream(&prep.dataset, problem.loss, cfg.engine.seed, u64::MAX - 1);
    let sigma = estimate_sigma(&mut oracle, &probes, cfg.oracle.sigma_samples, problem.np)?;
    let c = variance_constant_c(&problem.dg, problem.np, cfg.oracle.batch as u64);
    Ok(Constants {
        lipschitz,
        sigma,
        c,
    })
}

/// Delay model for simulator runs.
pub fn delay_model(cfg: &ExperimentConfig) -> Result<DelayModel> {
    let e = &cfg.engine;
    Ok(match e.delay {
        DelayChoice::None => DelayModel::None,
        DelayChoice::Cyclic => DelayModel::Cyclic { workers: e.workers },
        DelayChoice::Random => DelayModel::RandomBounded {
            tau_max: e.tau_max.ok_or_else(|| {
                AppError::config("engine.tau_max", "required by the random delay model")
            })?,
            seed: e.seed,
        },
        DelayChoice::Trace => {
            let trace: Vec<u64> = read_int_log(e.trace.as_deref().expect("validated"))?;
            asyncmb_core::engine::validate_trace(&trace)?;
            DelayModel::Trace(trace)
        }
    })
}

/// `τmax` the schedule assumes: the override, else what the run can produce.
pub fn schedule_tau_max(cfg: &ExperimentConfig) -> Result<u64> {
    if let Some(t) = cfg.schedules.tau_max {
        return Ok(t);
    }
    Ok(match cfg.engine.mode {
        Mode::Threaded => cfg.engine.workers - 1,
        Mode::Simulate => delay_model(cfg)?.tau_max(),
    })
}

/// `R` from the domain when not configured: `√2·r` for a Euclidean ball of
/// radius `r`, `sqrt(ln n)` for the simplex started at its barycenter.
pub fn default_radius(problem: &ProblemSpec) -> Option<f64> {
    match problem.dg.kind {
        GeneratorKind::Entropy => Some((problem.dim() as f64).ln().sqrt().max(f64::MIN_POSITIVE)),
        GeneratorKind::Euclidean => problem
            .reg
            .ball_radius()
            .map(|r| std::f64::consts::SQRT_2 * r),
    }
}

fn field_of(err: asyncmb_core::Error) -> AppError {
    match err {
        asyncmb_core::Error::MissingParam(name) => {
            let field = match name {
                "epsilon" => "schedules.epsilon",
                "D0" => "schedules.d0",
                "R" => "schedules.radius",
                "mu_psi" => "composite.regularizer",
                "T_F" => "engine.iterations",
                other => other,
            };
            AppError::config(field, format!("required by schedules.kind ({name})"))
        }
        other => AppError::Core(other),
    }
}

/// Schedule parameters with estimated constants and config overrides.
pub fn schedule_params(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    tau_max: u64,
) -> Result<ScheduleParams> {
    let est = estimate_constants(cfg, prep)?;
    let mut p = ScheduleParams::new(
        cfg.oracle.lipschitz.unwrap_or(est.lipschitz),
        tau_max,
        cfg.oracle.sigma.unwrap_or(est.sigma),
        est.c,
        cfg.oracle.batch as u64,
    );
    if p.lipschitz <= 0.0 {
        return Err(AppError::config(
            "oracle.lipschitz",
            "the data gives L = 0; set it explicitly",
        ));
    }
    p.radius = cfg
        .schedules
        .radius
        .or_else(|| default_radius(&prep.problem));
    let mu = prep.problem.reg.mu_psi();
    p.mu_psi = (mu > 0.0).then_some(mu);
    p.q = cfg.schedules.q;
    p.epsilon = cfg.schedules.epsilon;
    p.d0 = match (cfg.schedules.d0, &prep.x_star) {
        (Some(d0), _) => Some(d0),
        (None, Some(xs)) => {
            let d = bregman(&prep.problem.dg, &prep.problem.initial_point(), xs)?;
            Some(d.max(f64::MIN_POSITIVE))
        }
        _ => None,
    };
    Ok(p)
}

/// Number of updates: configured, else `T_ε` for the ε-targeted schedule.
pub fn iterations(cfg: &ExperimentConfig, params: &ScheduleParams) -> Result<u64> {
    if let Some(t) = cfg.engine.iterations {
        return Ok(t);
    }
    if cfg.schedules.kind == ScheduleChoice::Epsilon
        && params.epsilon.is_some()
        && params.d0.is_some()
    {
        return iteration_complexity(params).map_err(field_of);
    }
    Ok(DEFAULT_ITERATIONS)
}

pub fn build_schedule(
    cfg: &ExperimentConfig,
    mut params: ScheduleParams,
    iterations: u64,
) -> Result<Schedule> {
    let kind = match cfg.schedules.kind {
        ScheduleChoice::Constant => {
            ScheduleKind::Constant(cfg.schedules.gamma.ok_or_else(|| {
                AppError::config("schedules.gamma", "required by the constant schedule")
            })?)
        }
        ScheduleChoice::Epsilon => {
            ScheduleKind::Constant(epsilon_targeted_gamma(&params).map_err(field_of)?)
        }
        ScheduleChoice::Horizon => {
            params.horizon = Some(iterations);
            ScheduleKind::Constant(horizon_gamma(&params).map_err(field_of)?)
        }
        ScheduleChoice::SqrtDecay => ScheduleKind::SqrtDecay,
        ScheduleChoice::StronglyConvex => ScheduleKind::StronglyConvex,
    };
    Schedule::new(kind, params).map_err(|e| match e {
        asyncmb_core::Error::Domain(msg) if cfg.schedules.kind == ScheduleChoice::Constant => {
            AppError::config("schedules.gamma", msg)
        }
        other => field_of(other),
    })
}

/// Evenly spaced checkpoints, `count` of them, always including `T`.
pub fn checkpoints(iterations: u64, count: u64) -> Vec<u64> {
    let every = iterations.div_ceil(count.max(1)).max(1);
    let mut v: Vec<u64> = (1..=iterations / every).map(|i| i * every).collect();
    if v.last() != Some(&iterations) && iterations > 0 {
        v.push(iterations);
    }
    v
}

pub fn run_options(cfg: &ExperimentConfig, prep: &Prepared, iterations: u64) -> RunOptions {
    RunOptions {
        x0: None,
        x_star: prep.x_star.clone(),
        checkpoints: Some(checkpoints(iterations, cfg.engine.checkpoints)),
        phi_sample: cfg.engine.phi_sample,
        record_every: cfg.engine.record_every,
        sampling: cfg.sampling(),
        stop_below: None,
    }
}

/// Everything needed to start runs of one configuration.
pub struct Plan {
    pub prep: Prepared,
    pub schedule: Schedule,
    pub iterations: u64,
    pub opts: RunOptions,
}

impl Plan {
    pub fn new(cfg: &ExperimentConfig, need: Need) -> Result<Plan> {
        let prep = prepare(cfg, need)?;
        Self::with_tau(cfg, prep, schedule_tau_max(cfg)?)
    }

    pub fn with_tau(cfg: &ExperimentConfig, prep: Prepared, tau_max: u64) -> Result<Plan> {
        let params = schedule_params(cfg, &prep, tau_max)?;
        let iterations = iterations(cfg, &params)?;
        let schedule = build_schedule(cfg, params, iterations)?;
        let opts = run_options(cfg, &prep, iterations);
        Ok(Plan {
            prep,
            schedule,
            iterations,
            opts,
        })
    }

    pub fn experiment(&self, cfg: &ExperimentConfig, seed: u64) -> Experiment<'_> {
        Experiment {
            problem: &self.prep.problem,
            dataset: &self.prep.dataset,
            schedule: &self.schedule,
            iterations: self.iterations,
            batch: cfg.oracle.batch,
            seed,
        }
    }

    /// One run in the configured mode.
    pub fn run(&self, cfg: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<RunReport> {
        let exp = self.experiment(cfg, seed);
        match cfg.engine.mode {
            Mode::Simulate => Ok(simulate(&exp, &delay_model(cfg)?, opts)?),
            Mode::Threaded => run_threaded(&exp, cfg.engine.workers as usize, opts),
        }
    }
}

fn write_outputs(cfg: &ExperimentConfig, report: &RunReport) -> Result<()> {
    if let Some(path) = &cfg.output.csv {
        write_csv(&report.trace, path)?;
    }
    if let Some(path) = &cfg.output.delays {
        write_int_log(&report.delays, path)?;
    }
    if let Some(path) = &cfg.output.workers {
        let workers = if report.workers.is_empty() {
            vec![0; report.delays.len()]
        } else {
            report.workers.clone()
        };
        write_int_log(&workers, path)?;
    }
    Ok(())
}

pub fn schedule_label(kind: ScheduleKind) -> String {
    match kind {
        ScheduleKind::Constant(g) => format!("constant gamma = {g:.6e}"),
        ScheduleKind::SqrtDecay => "sqrt_decay".into(),
        ScheduleKind::StronglyConvex => "strongly_convex".into(),
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: RunReport,
    pub schedule: ScheduleKind,
    pub schedule_tau_max: u64,
    /// Full-data objective at the Cesàro average.
    pub phi_average: f64,
    pub phi_last: f64,
    pub phi_star: Option<f64>,
    /// Wall time of the command's run, measured outside the engine.
    pub elapsed_s: f64,
}

impl RunSummary {
    pub fn suboptimality(&self) -> Option<f64> {
        self.phi_star.map(|s| self.phi_average - s)
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.report;
        writeln!(
            f,
            "mode            {}  (delay {}, workers {})",
            r.config.mode, r.config.delay, r.config.workers
        )?;
        writeln!(f, "schedule        {}", schedule_label(self.schedule))?;
        writeln!(
            f,
            "updates         {} of {}",
            r.iterations, r.config.iterations
        )?;
        writeln!(f, "phi(x_ave)      {:.10e}", self.phi_average)?;
        writeln!(f, "phi(x_last)     {:.10e}", self.phi_last)?;
        match self.suboptimality() {
            Some(gap) => writeln!(
                f,
                "suboptimality   {gap:.6e}  (phi* = {:.10e})",
                self.phi_star.unwrap()
            )?,
            None => writeln!(f, "suboptimality   unknown (no certified optimum)")?,
        }
        let flag = if r.tau_exceeded {
            "  WARNING: exceeds the schedule's bound"
        } else {
            ""
        };
        writeln!(
            f,
            "realized tau    {} (schedule assumes {}){flag}",
            r.realized_tau_max, self.schedule_tau_max
        )?;
        write!(f, "wall time       {:.3} s", self.elapsed_s)
    }
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let plan = Plan::new(cfg, Need::Reference(RUN_REFERENCE_ITERATIONS))?;
    let start = std::time::Instant::now();
    let report = plan.run(cfg, cfg.engine.seed, &plan.opts)?;
    let elapsed_s = start.elapsed().as_secs_f64();
    write_outputs(cfg, &report)?;
    let prep = &plan.prep;
    Ok(RunSummary {
        phi_average: phi_value(&prep.problem, &prep.dataset, &report.cesaro_x),
        phi_last: phi_value(&prep.problem, &prep.dataset, &report.final_x),
        phi_star: prep.phi_star,
        schedule: plan.schedule.kind(),
        schedule_tau_max: plan.schedule.params().tau_max,
        elapsed_s,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyRow {
    pub k: u64,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub bound_name: &'static str,
    /// `"phi(x_ave)-phi*"` or `"|x(T)-x*|^2"`.
    pub metric: &'static str,
    pub replicates: u64,
    pub slack: f64,
    pub rows: Vec<VerifyRow>,
    pub epsilon: Option<f64>,
}

impl VerifyReport {
    pub fn worst_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.measured / r.bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.measured <= self.slack * r.bound)
    }

    pub fn final_measured(&self) -> Option<f64> {
        self.rows.last().map(|r| r.measured)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} bound on mean {} over {} replicates",
            self.bound_name, self.metric, self.replicates
        )?;
        writeln!(
            f,
            "{:>10} {:>14} {:>14} {:>8}",
            "k", "measured", "bound", "ratio"
        )?;
        let stride = (self.rows.len() / 20).max(1);
        for (i, r) in self.rows.iter().enumerate() {
            if i % stride == 0 || i + 1 == self.rows.len() {
                writeln!(
                    f,
                    "{:>10} {:>14.6e} {:>14.6e} {:>8.4}",
                    r.k,
                    r.measured,
                    r.bound,
                    r.measured / r.bound
                )?;
            }
        }
        if let (Some(eps), Some(last)) = (self.epsilon, self.final_measured()) {
            writeln!(
                f,
                "target epsilon {eps:e}: final mean {last:.6e} ({})",
                if last <= eps { "met" } else { "missed" }
            )?;
        }
        let verdict = if self.passed() { "PASS" } else { "VIOLATED" };
        write!(
            f,
            "worst ratio {:.4} (allowed {:.3}): {verdict}",
            self.worst_ratio(),
            self.slack
        )
    }
}

/// Mean measured error against the analytic bound at every checkpoint.
pub fn cmd_verify_bounds(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let mut plan = Plan::new(cfg, Need::Exact)?;
    let phi_star = plan.prep.phi_star.expect("exact optimum");
    plan.opts.phi_sample = plan.prep.dataset.len();
    let params = *plan.schedule.params();
    let (bound_name, metric) = match plan.schedule.kind() {
        ScheduleKind::Constant(_) => ("constant-step", "phi(x_ave)-phi*"),
        ScheduleKind::SqrtDecay => ("time-varying", "phi(x_ave)-phi*"),
        ScheduleKind::StronglyConvex => ("strongly-convex", "|x(T)-x*|^2"),
    };
    let ks = plan.opts.checkpoints.clone().unwrap();
    let mut sums = vec![0.0; ks.len()];
    for r in 0..cfg.verify.replicates {
        let report = plan.run(cfg, cfg.engine.seed.wrapping_add(r), &plan.opts)?;
        if report.trace.len() != ks.len() {
            return Err(AppError::Runtime(
                "run ended before its last checkpoint".into(),
            ));
        }
        for (s, tp) in sums.iter_mut().zip(&report.trace) {
            *s += match plan.schedule.kind() {
                ScheduleKind::StronglyConvex => tp.dist_sq.expect("x* known"),
                _ => tp.phi - phi_star,
            };
        }
    }
    let n = cfg.verify.replicates as f64;
    let rows = ks
        .iter()
        .zip(&sums)
        .map(|(&k, &s)| {
            let bound = match plan.schedule.kind() {
                ScheduleKind::Constant(g) => bound_constant_step(&params, g, k),
                ScheduleKind::SqrtDecay => bound_sqrt_decay(&params, k),
                ScheduleKind::StronglyConvex => bound_strongly_convex(&params, k),
            }
            .map_err(field_of)?;
            Ok(VerifyRow {
                k,
                measured: s / n,
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        bound_name,
        metric,
        replicates: cfg.verify.replicates,
        slack: cfg.verify.slack,
        rows,
        epsilon: if cfg.schedules.kind == ScheduleChoice::Epsilon {
            params.epsilon
        } else {
            None
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupRow {
    pub p: u64,
    /// Mean time to reach the target over the runs that reached it.
    pub mean_seconds: f64,
    pub speedup: f64,
    pub reached: u64,
    pub runs: u64,
    pub realized_tau_max: u64,
}

#[derive(Debug, Clone)]
pub struct SpeedupReport {
    pub target: f64,
    pub epsilon: f64,
    pub cores: usize,
    pub rows: Vec<SpeedupRow>,
}

impl fmt::Display for SpeedupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "target phi {:.10e} (reference + {:e}), {} cores available",
            self.target, self.epsilon, self.cores
        )?;
        writeln!(
            f,
            "{:>4} {:>12} {:>8} {:>8} {:>8}",
            "p", "t_p [s]", "S(p)", "reached", "tau_max"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>4} {:>12.4} {:>8.3} {:>5}/{:<2} {:>8}",
                r.p, r.mean_seconds, r.speedup, r.reached, r.runs, r.realized_tau_max
            )?;
        }
        Ok(())
    }
}

/// Times threaded runs until the traced objective reaches the reference
/// value plus `schedules.epsilon`; `S(p) = t₁/t_p`.
pub fn cmd_speedup(cfg: &ExperimentConfig) -> Result<SpeedupReport> {
    let epsilon = cfg
        .schedules
        .epsilon
        .ok_or_else(|| AppError::config("schedules.epsilon", "the speedup target needs epsilon"))?;
    let mut p_list = cfg.speedup.p_list.clone();
    if !p_list.contains(&1) {
        p_list.insert(0, 1);
    }
    let cores = std::thread::available_parallelism().map_or(1, usize::from);
    if let Some(&p) = p_list.iter().find(|&&p| p as usize > cores) {
        log::warn!("p = {p} exceeds the {cores} available cores");
    }
    let prep = prepare(cfg, Need::Reference(cfg.speedup.reference_iterations))?;
    let x_ref = prep.x_ref.clone().ok_or_else(|| {
        AppError::config(
            "data.source",
            "speedup needs a problem with a reference solution",
        )
    })?;
    let tau = cfg
        .schedules
        .tau_max
        .unwrap_or(p_list.iter().copied().max().unwrap() - 1);
    let plan = Plan::with_tau(cfg, prep, tau)?;
    let exp0 = plan.experiment(cfg, cfg.engine.seed);
    let sub = exp0.phi_points(&plan.opts);
    let target = asyncmb_core::composite::phi_on(&plan.prep.problem, &sub, &x_ref) + epsilon;
    let mut opts = plan.opts.clone();
    opts.stop_below = Some(target);
    opts.record_every = 0;

    let mut rows = Vec::new();
    for &p in &p_list {
        let mut total = 0.0;
        let mut reached = 0;
        let mut tau_max = 0;
        for r in 0..cfg.speedup.runs {
            let exp = plan.experiment(cfg, cfg.engine.seed.wrapping_add(r));
            let report = run_threaded(&exp, p as usize, &opts)?;
            tau_max = tau_max.max(report.realized_tau_max);
            if let Some(ns) = report.target_reached_ns {
                total += ns as f64 * 1e-9;
                reached += 1;
            }
        }
        let mean = if reached > 0 {
            total / reached as f64
        } else {
            f64::NAN
        };
        rows.push(SpeedupRow {
            p,
            mean_seconds: mean,
            speedup: f64::NAN,
            reached,
            runs: cfg.speedup.runs,
            realized_tau_max: tau_max,
        });
    }
    let t1 = rows
        .iter()
        .find(|r| r.p == 1)
        .map(|r| r.mean_seconds)
        .unwrap();
    for r in &mut rows {
        r.speedup = if r.p == 1 { 1.0 } else { t1 / r.mean_seconds };
    }
    Ok(SpeedupReport {
        target,
        epsilon,
        cores,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub constants: Constants,
    pub batch: u64,
    pub tau_max: u64,
    pub epsilon_gamma: std::result::Result<f64, String>,
    pub sqrt_decay_gamma0: std::result::Result<f64, String>,
    pub strongly_convex_gamma0: std::result::Result<f64, String>,
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &std::result::Result<f64, String>| match r {
            Ok(v) => format!("{v:.6e}"),
            Err(e) => format!("n/a ({e})"),
        };
        let c = &self.constants;
        writeln!(f, "L_hat           {:.6e}", c.lipschitz)?;
        writeln!(f, "sigma_hat       {:.6e}", c.sigma)?;
        writeln!(f, "c_hat           {:.6e}  (batch {})", c.c, self.batch)?;
        writeln!(f, "tau_max         {}", self.tau_max)?;
        writeln!(f, "epsilon gamma   {}", show(&self.epsilon_gamma))?;
        writeln!(
            f,
            "time-varying    gamma(0) = {}",
            show(&self.sqrt_decay_gamma0)
        )?;
        write!(
            f,
            "strongly convex gamma(0) = {}",
            show(&self.strongly_convex_gamma0)
        )
    }
}

/// Estimated constants and the step sizes they induce.
pub fn cmd_estimate(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    let prep = prepare(cfg, Need::Nothing)?;
    let tau_max = schedule_tau_max(cfg)?;
    let constants = estimate_constants(cfg, &prep)?;
    let mut params = ScheduleParams::new(
        constants.lipschitz,
        tau_max,
        constants.sigma,
        constants.c,
        cfg.oracle.batch as u64,
    );
    params.radius = cfg
        .schedules
        .radius
        .or_else(|| default_radius(&prep.problem));
    let mu = prep.problem.reg.mu_psi();
    params.mu_psi = (mu > 0.0).then_some(mu);
    params.q = cfg.schedules.q;
    params.epsilon = cfg.schedules.epsilon;
    let msg = |e: asyncmb_core::Error| field_of(e).to_string();
    let gamma0 = |kind| {
        Schedule::new(kind, params)
            .map(|s| s.gamma_at(0))
            .map_err(msg)
    };
    Ok(EstimateReport {
        constants,
        batch: cfg.oracle.batch as u64,
        tau_max,
        epsilon_gamma: epsilon_targeted_gamma(&params).map_err(msg),
        sqrt_decay_gamma0: gamma0(ScheduleKind::SqrtDecay),
        strongly_convex_gamma0: gamma0(ScheduleKind::StronglyConvex),
    })
}

/// Re-executes a recorded delay log (and worker log, for threaded runs).
pub fn cmd_replay(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let trace_path = cfg
        .replay
        .trace
        .as_deref()
        .ok_or_else(|| AppError::config("replay.trace", "a delay log is required"))?;
    let trace: Vec<u64> = read_int_log(trace_path)?;
    let workers: Option<Vec<u32>> = cfg
        .replay
        .workers
        .as_deref()
        .map(read_int_log)
        .transpose()?;
    let mut plan = Plan::new(cfg, Need::Reference(RUN_REFERENCE_ITERATIONS))?;
    let t = trace.len() as u64;
    plan.opts.checkpoints = Some(checkpoints(t, cfg.engine.checkpoints));
    let mut exp = plan.experiment(cfg, cfg.engine.seed);
    exp.iterations = t;
    let start = std::time::Instant::now();
    let report = replay(&exp, &trace, workers.as_deref(), &plan.opts)?;
    let elapsed_s = start.elapsed().as_secs_f64();
    write_outputs(cfg, &report)?;
    let prep = &plan.prep;
    Ok(RunSummary {
        phi_average: phi_value(&prep.problem, &prep.dataset, &report.cesaro_x),
        phi_last: phi_value(&prep.problem, &prep.dataset, &report.final_x),
        phi_star: prep.phi_star,
        schedule: plan.schedule.kind(),
        schedule_tau_max: plan.schedule.params().tau_max,
        elapsed_s,
        report,
    })
}
