//! TOML experiment configuration. Sections mirror the library modules.

use std::path::{Path, PathBuf};

use asyncmb_core::{DistanceGenerator, LossKind, ProblemSpec, Regularizer, Sampling};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub geometry: GeometryConfig,
    pub composite: CompositeConfig,
    pub oracle: OracleConfig,
    pub schedules: ScheduleConfig,
    pub engine: EngineConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
    pub speedup: SpeedupConfig,
    pub replay: ReplayConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Libsvm,
    Lasso,
    StronglyConvex,
    #[default]
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// libsvm file; relative paths resolve against the config file.
    pub path: Option<PathBuf>,
    pub n: usize,
    pub m: usize,
    /// Planted nonzeros (lasso).
    pub sparsity: usize,
    /// Label noise standard deviation (lasso).
    pub noise: f64,
    /// Feature density (logistic).
    pub density: f64,
    /// Generator seed; defaults to `engine.seed`.
    pub seed: Option<u64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Logistic,
            path: None,
            n: 50,
            m: 500,
            sparsity: 5,
            noise: 0.1,
            density: 1.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    #[default]
    Euclidean,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub generator: Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Logistic,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    Zero,
    Ball,
    Simplex,
    #[default]
    L1,
    L1Ball,
    L2,
    ElasticNet,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeConfig {
    pub loss: Loss,
    pub regularizer: RegKind,
    /// ℓ1 weight; 0.01 when unset.
    pub lambda: Option<f64>,
    /// ℓ2 weight; required by `l2` and `elastic_net`.
    pub rho: Option<f64>,
    /// Ball radius; 100 when unset.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    #[default]
    Iid,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub batch: usize,
    pub sampling: SamplingKind,
    /// Overrides the computed Lipschitz bound.
    pub lipschitz: Option<f64>,
    /// Overrides the estimated noise level.
    pub sigma: Option<f64>,
    /// Draws per probe point when estimating σ.
    pub sigma_samples: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            batch: 1000,
            sampling: SamplingKind::Iid,
            lipschitz: None,
            sigma: None,
            sigma_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    Constant,
    #[default]
    Epsilon,
    Horizon,
    /// `1/γ(k) = L(τmax+1)² + σ√c √(k+1)/(R√b)`
    SqrtDecay,
    /// `1/γ(k) = 2L(τmax+1)² + μΨ(k+τmax+1)/(3Q)`
    StronglyConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleChoice,
    /// Step for `constant`.
    pub gamma: Option<f64>,
    /// Target accuracy for `epsilon` (and the speedup target).
    pub epsilon: Option<f64>,
    /// Delay bound assumed by the schedule; defaults to the delay model's.
    pub tau_max: Option<u64>,
    /// `R`; derived from the ball radius when unset.
    pub radius: Option<f64>,
    pub q: f64,
    /// Bound on `D_ω(x(0), x*)`; exact for synthetic problems when unset.
    pub d0: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            kind: ScheduleChoice::Epsilon,
            gamma: None,
            epsilon: None,
            tau_max: None,
            radius: None,
            q: 1.0,
            d0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Simulate,
    Threaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayChoice {
    #[default]
    None,
    Cyclic,
    Random,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub mode: Mode,
    /// `T`; for the `epsilon` schedule defaults to the iteration complexity.
    pub iterations: Option<u64>,
    pub delay: DelayChoice,
    /// Cyclic delay workers, or threads in threaded mode.
    pub workers: u64,
    /// Bound for the `random` delay model.
    pub tau_max: Option<u64>,
    /// Delay trace file for the `trace` model.
    pub trace: Option<PathBuf>,
    pub seed: u64,
    pub phi_sample: usize,
    pub checkpoints: u64,
    pub record_every: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Simulate,
            iterations: None,
            delay: DelayChoice::None,
            workers: 1,
            tau_max: None,
            trace: None,
            seed: 0,
            phi_sample: asyncmb_core::engine::DEFAULT_PHI_SAMPLE,
            checkpoints: asyncmb_core::engine::DEFAULT_CHECKPOINTS,
            record_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    /// Realized `d(k)` log, one integer per line.
    pub delays: Option<PathBuf>,
    /// Worker id per update, same format.
    pub workers: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub replicates: u64,
    /// Allowed ratio of measured mean to bound.
    pub slack: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            replicates: 20,
            slack: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedupConfig {
    pub p_list: Vec<u64>,
    pub runs: u64,
    /// Solver iterations for the reference point defining the target.
    pub reference_iterations: usize,
}

impl Default for SpeedupConfig {
    fn default() -> Self {
        SpeedupConfig {
            p_list: vec![1, 2, 4],
            runs: 10,
            reference_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub trace: Option<PathBuf>,
    pub workers: Option<PathBuf>,
}

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_RADIUS: f64 = 100.0;

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(AppError::config(
            field,
            format!("must be finite and positive, got {v}"),
        ))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AppError::config("config", e.to_string().trim_end()))
    }

    /// Reads a config file; relative data and trace paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.data.path,
            &mut cfg.engine.trace,
            &mut cfg.replay.trace,
            &mut cfg.replay.workers,
        ] {
            if let Some(rel) = p.as_mut().filter(|q| q.is_relative()) {
                *rel = base.join(&*rel);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn loss(&self) -> LossKind {
        match self.composite.loss {
            Loss::Logistic => LossKind::Logistic,
            Loss::Squared => LossKind::Squared,
        }
    }

    pub fn sampling(&self) -> Sampling {
        match self.oracle.sampling {
            SamplingKind::Iid => Sampling::Iid,
            SamplingKind::Sequential => Sampling::Sequential,
        }
    }

    pub fn regularizer(&self) -> Result<Regularizer> {
        let c = &self.composite;
        let lambda = || positive("composite.lambda", c.lambda.unwrap_or(DEFAULT_LAMBDA));
        let radius = || positive("composite.radius", c.radius.unwrap_or(DEFAULT_RADIUS));
        let rho = || {
            c.rho
                .ok_or_else(|| AppError::config("composite.rho", "required by this regularizer"))
                .and_then(|v| positive("composite.rho", v))
        };
        Ok(match c.regularizer {
            RegKind::Zero => Regularizer::Zero,
            RegKind::Ball => Regularizer::IndicatorL2Ball { radius: radius()? },
            RegKind::Simplex => Regularizer::IndicatorSimplex,
            RegKind::L1 => Regularizer::L1 { lambda: lambda()? },
            RegKind::L1Ball => Regularizer::L1PlusL2Ball {
                lambda: lambda()?,
                radius: radius()?,
            },
            RegKind::L2 => Regularizer::L2 { rho: rho()? },
            RegKind::ElasticNet => Regularizer::ElasticNet {
                lambda: lambda()?,
                rho: rho()?,
            },
        })
    }

    pub fn problem(&self, dim: usize) -> Result<ProblemSpec> {
        let dg = match self.geometry.generator {
            Generator::Euclidean => DistanceGenerator::euclidean(dim),
            Generator::Entropy => DistanceGenerator::entropy(dim),
        };
        ProblemSpec::new(self.loss(), self.regularizer()?, dg)
            .map_err(|e| AppError::config("composite.regularizer", e.to_string()))
    }

    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.engine.seed)
    }

    /// Range checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.oracle.batch == 0 {
            return Err(AppError::config("oracle.batch", "must be at least 1"));
        }
        if self.oracle.sigma_samples == 0 {
            return Err(AppError::config(
                "oracle.sigma_samples",
                "must be at least 1",
            ));
        }
        if let Some(l) = self.oracle.lipschitz {
            positive("oracle.lipschitz", l)?;
        }
        if let Some(s) = self.oracle.sigma {
            if !(s.is_finite() && s >= 0.0) {
                return Err(AppError::config(
                    "oracle.sigma",
                    "must be finite and non-negative",
                ));
            }
        }
        if self.engine.workers == 0 {
            return Err(AppError::config("engine.workers", "must be at least 1"));
        }
        if self.engine.iterations == Some(0) {
            return Err(AppError::config("engine.iterations", "must be at least 1"));
        }
        if self.engine.checkpoints == 0 {
            return Err(AppError::config("engine.checkpoints", "must be at least 1"));
        }
        if self.engine.phi_sample == 0 {
            return Err(AppError::config("engine.phi_sample", "must be at least 1"));
        }
        if !(self.schedules.q >= 1.0 && self.schedules.q.is_finite()) {
            return Err(AppError::config("schedules.q", "must be at least 1"));
        }
        for (field, v) in [
            ("schedules.gamma", self.schedules.gamma),
            ("schedules.epsilon", self.schedules.epsilon),
            ("schedules.radius", self.schedules.radius),
            ("schedules.d0", self.schedules.d0),
        ] {
            if let Some(v) = v {
                positive(field, v)?;
            }
        }
        if self.data.source == DataSource::Libsvm && self.data.path.is_none() {
            return Err(AppError::config(
                "data.path",
                "required for the libsvm source",
            ));
        }
        if self.engine.delay == DelayChoice::Trace && self.engine.trace.is_none() {
            return Err(AppError::config(
                "engine.trace",
                "required for the trace delay model",
            ));
        }
        if self.verify.replicates == 0 {
            return Err(AppError::config("verify.replicates", "must be at least 1"));
        }
        positive("verify.slack", self.verify.slack)?;
        if self.speedup.runs == 0 {
            return Err(AppError::config("speedup.runs", "must be at least 1"));
        }
        if self.speedup.p_list.is_empty() || self.speedup.p_list.contains(&0) {
            return Err(AppError::config(
                "speedup.p_list",
                "needs at least one entry, all ≥ 1",
            ));
        }
        self.regularizer()?;
        Ok(())
    }
}
