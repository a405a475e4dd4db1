//! Step-size policies and the analytic right-hand sides of the convergence
//! bounds for constant, time-varying and strongly convex schedules.
//!
//! All policies share the constant `L(τmax+1)²`, which absorbs the effect of
//! bounded delays.

use crate::error::{domain, Error, Result};
use crate::math;

/// Constant steps are capped at this fraction of `1/(L(τmax+1)²)` so that
/// they stay strictly inside the admissible open interval.
pub const ADMISSIBLE_CAP: f64 = 0.999;

/// Problem and algorithm constants feeding the schedules and bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    /// Gradient Lipschitz constant `L`.
    pub lipschitz: f64,
    pub tau_max: u64,
    /// Gradient noise level `σ`.
    pub sigma: f64,
    /// Variance constant `c ∈ [1, b]`.
    pub c: f64,
    pub batch: u64,
    /// `R = sqrt(max D_ω(x, y))` over `dom Ψ`.
    pub radius: Option<f64>,
    pub mu_psi: Option<f64>,
    /// Quadratic-growth constant `Q ≥ 1`.
    pub q: f64,
    pub epsilon: Option<f64>,
    /// Fixed horizon `T_F`.
    pub horizon: Option<u64>,
    /// `D_ω(x(0), x*)` or an upper bound on it.
    pub d0: Option<f64>,
}

impl ScheduleParams {
    pub fn new(lipschitz: f64, tau_max: u64, sigma: f64, c: f64, batch: u64) -> Self {
        ScheduleParams {
            lipschitz,
            tau_max,
            sigma,
            c,
            batch,
            radius: None,
            mu_psi: None,
            q: 1.0,
            epsilon: None,
            horizon: None,
            d0: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(domain(alloc::format!(
                    "{name} must be finite and positive, got {v}"
                )))
            }
        };
        finite_pos("L", self.lipschitz)?;
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(domain(alloc::format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        if self.batch == 0 {
            return Err(domain("batch size must be at least 1"));
        }
        if !(self.c >= 1.0 && self.c <= self.batch as f64) {
            return Err(domain(alloc::format!("c = {} outside [1, b]", self.c)));
        }
        if !(self.q.is_finite() && self.q >= 1.0) {
            return Err(domain(alloc::format!(
                "Q must be at least 1, got {}",
                self.q
            )));
        }
        for (name, v) in [
            ("R", self.radius),
            ("mu_psi", self.mu_psi),
            ("epsilon", self.epsilon),
            ("D0", self.d0),
        ] {
            if let Some(v) = v {
                finite_pos(name, v)?;
            }
        }
        Ok(())
    }

    /// `L(τmax+1)²`
    pub fn delay_curvature(&self) -> f64 {
        let t = (self.tau_max + 1) as f64;
        self.lipschitz * t * t
    }

    /// Supremum of the admissible constant step sizes.
    pub fn admissible_bound(&self) -> f64 {
        1.0 / self.delay_curvature()
    }

    fn capped(&self, gamma: f64) -> f64 {
        gamma.min(ADMISSIBLE_CAP * self.admissible_bound())
    }

    fn require(v: Option<f64>, name: &'static str) -> Result<f64> {
        v.ok_or(Error::MissingParam(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Constant(f64),
    /// `1/γ(k) = L(τmax+1)² + σ√c √(k+1) / (R√b)`
    SqrtDecay,
    /// `1/γ(k) = 2L(τmax+1)² + μΨ (k + τmax + 1) / (3Q)`
    StronglyConvex,
}

/// A validated step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    params: ScheduleParams,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, params: ScheduleParams) -> Result<Self> {
        params.validate()?;
        match kind {
            ScheduleKind::Constant(gamma) => {
                if !(gamma > 0.0 && gamma < params.admissible_bound()) {
                    return Err(domain(alloc::format!(
                        "constant step {gamma} outside (0, {})",
                        params.admissible_bound()
                    )));
                }
            }
            ScheduleKind::SqrtDecay => {
                ScheduleParams::require(params.radius, "R")?;
            }
            ScheduleKind::StronglyConvex => {
                let mu = ScheduleParams::require(params.mu_psi, "mu_psi")?;
                if mu <= 0.0 {
                    return Err(domain("mu_psi must be positive"));
                }
            }
        }
        Ok(Schedule { kind, params })
    }

    pub fn constant(gamma: f64, params: ScheduleParams) -> Result<Self> {
        Self::new(ScheduleKind::Constant(gamma), params)
    }

    pub fn sqrt_decay(params: ScheduleParams) -> Result<Self> {
        Self::new(ScheduleKind::SqrtDecay, params)
    }

    pub fn strongly_convex(params: ScheduleParams) -> Result<Self> {
        Self::new(ScheduleKind::StronglyConvex, params)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn gamma_at(&self, k: u64) -> f64 {
        let p = &self.params;
        match self.kind {
            ScheduleKind::Constant(gamma) => gamma,
            ScheduleKind::SqrtDecay => {
                let radius = p.radius.expect("validated");
                let alpha = p.sigma * math::sqrt(p.c) * math::sqrt((k + 1) as f64)
                    / (radius * math::sqrt(p.batch as f64));
                1.0 / (p.delay_curvature() + alpha)
            }
            ScheduleKind::StronglyConvex => {
                let mu = p.mu_psi.expect("validated");
                let beta = mu * (k + p.tau_max + 1) as f64 / (3.0 * p.q);
                1.0 / (2.0 * p.delay_curvature() + beta)
            }
        }
    }
}

pub fn gamma_at(schedule: &Schedule, k: u64) -> f64 {
    schedule.gamma_at(k)
}

/// `γ = ε / (Lε(τmax+1)² + cσ²/b)`, capped inside the admissible interval.
pub fn epsilon_targeted_gamma(params: &ScheduleParams) -> Result<f64> {
    params.validate()?;
    let eps = ScheduleParams::require(params.epsilon, "epsilon")?;
    let noise = params.c * params.sigma * params.sigma / params.batch as f64;
    Ok(params.capped(eps / (eps * params.delay_curvature() + noise)))
}

/// Horizon-tuned constant step `1/(L(τmax+1)² + α*√T_F)` with
/// `α* = σ√c / sqrt(2b·D0)`, capped inside the admissible interval.
pub fn horizon_gamma(params: &ScheduleParams) -> Result<f64> {
    params.validate()?;
    let d0 = ScheduleParams::require(params.d0, "D0")?;
    let horizon = params.horizon.ok_or(Error::MissingParam("T_F"))?;
    let alpha = params.sigma * math::sqrt(params.c) / math::sqrt(2.0 * params.batch as f64 * d0);
    Ok(params.capped(1.0 / (params.delay_curvature() + alpha * math::sqrt(horizon as f64))))
}

/// `T_ε = ⌈2ε₀ (L(τmax+1)²/ε + cσ²/(bε²))⌉` with `ε₀ = D0`.
pub fn iteration_complexity(params: &ScheduleParams) -> Result<u64> {
    params.validate()?;
    let eps = ScheduleParams::require(params.epsilon, "epsilon")?;
    let eps0 = ScheduleParams::require(params.d0, "D0")?;
    let noise = params.c * params.sigma * params.sigma / params.batch as f64;
    let t = 2.0 * eps0 * (params.delay_curvature() / eps + noise / (eps * eps));
    Ok((math::ceil(t) as u64).max(1))
}

/// Constant-step bound on `E φ(x_ave(T)) − φ*`:
/// `D0/(γT) + γcσ² / (2b(1 − γL(τmax+1)²))`.
pub fn bound_constant_step(params: &ScheduleParams, gamma: f64, t: u64) -> Result<f64> {
    params.validate()?;
    let d0 = ScheduleParams::require(params.d0, "D0")?;
    if !(gamma > 0.0 && gamma < params.admissible_bound()) {
        return Err(domain(alloc::format!(
            "step {gamma} outside the admissible interval"
        )));
    }
    if t == 0 {
        return Err(domain("T must be at least 1"));
    }
    let residual = gamma * params.c * params.sigma * params.sigma
        / (2.0 * params.batch as f64 * (1.0 - gamma * params.delay_curvature()));
    Ok(d0 / (gamma * t as f64) + residual)
}

/// Time-varying-step bound: `LR²(τmax+1)²/T + 2σR√c/√(bT)`.
pub fn bound_sqrt_decay(params: &ScheduleParams, t: u64) -> Result<f64> {
    params.validate()?;
    let r = ScheduleParams::require(params.radius, "R")?;
    if t == 0 {
        return Err(domain("T must be at least 1"));
    }
    let t = t as f64;
    Ok(params.delay_curvature() * r * r / t
        + 2.0 * params.sigma * r * math::sqrt(params.c) / math::sqrt(params.batch as f64 * t))
}

/// Strongly convex bound on `E‖x(T) − x*‖²`:
/// `2(6LQ/μΨ + 1)²(τmax+1)⁴ D0/(T+1)² + 18cσ²Q²/(bμΨ²(T+1))`.
pub fn bound_strongly_convex(params: &ScheduleParams, t: u64) -> Result<f64> {
    params.validate()?;
    let mu = ScheduleParams::require(params.mu_psi, "mu_psi")?;
    let d0 = ScheduleParams::require(params.d0, "D0")?;
    let q = params.q;
    let t1 = (t + 1) as f64;
    let tau1 = (params.tau_max + 1) as f64;
    let lead = 6.0 * params.lipschitz * q / mu + 1.0;
    Ok(
        2.0 * lead * lead * tau1 * tau1 * tau1 * tau1 * d0 / (t1 * t1)
            + 18.0 * params.c * params.sigma * params.sigma * q * q
                / (params.batch as f64 * mu * mu * t1),
    )
}
