//! Regularizers and the composite mirror-descent step
//! `argmin_z ⟨g, z⟩ + Ψ(z) + (1/γ) D_ω(x, z)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, domain, Error, Result};
use crate::geometry::{DistanceGenerator, GeneratorKind, NormPair, ENTROPY_FLOOR};
use crate::math;
use crate::oracle::{mean_loss, DataPoint, Dataset, LossKind};

/// Relative slack when testing membership of the ℓ2 ball.
const BALL_SLACK: f64 = 1e-12;
/// Absolute slack on `Σ xᵢ = 1` when testing membership of the simplex.
const SIMPLEX_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    IndicatorL2Ball { radius: f64 },
    IndicatorSimplex,
    L1 { lambda: f64 },
    L1PlusL2Ball { lambda: f64, radius: f64 },
    L2 { rho: f64 },
    ElasticNet { lambda: f64, rho: f64 },
}

impl Regularizer {
    /// Strong-convexity modulus w.r.t. ℓ2.
    pub fn mu_psi(&self) -> f64 {
        match *self {
            Regularizer::L2 { rho } | Regularizer::ElasticNet { rho, .. } => rho,
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Zero => "zero",
            Regularizer::IndicatorL2Ball { .. } => "ball",
            Regularizer::IndicatorSimplex => "simplex",
            Regularizer::L1 { .. } => "l1",
            Regularizer::L1PlusL2Ball { .. } => "l1_ball",
            Regularizer::L2 { .. } => "l2",
            Regularizer::ElasticNet { .. } => "elastic_net",
        }
    }

    /// Radius of the feasible ball, when `dom Ψ` is one.
    pub fn ball_radius(&self) -> Option<f64> {
        match *self {
            Regularizer::IndicatorL2Ball { radius } | Regularizer::L1PlusL2Ball { radius, .. } => {
                Some(radius)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(domain(alloc::format!(
                    "regularizer parameter {name} must be positive, got {v}"
                )))
            }
        };
        match *self {
            Regularizer::Zero | Regularizer::IndicatorSimplex => Ok(()),
            Regularizer::IndicatorL2Ball { radius } => positive("radius", radius),
            Regularizer::L1 { lambda } => positive("lambda", lambda),
            Regularizer::L1PlusL2Ball { lambda, radius } => {
                positive("lambda", lambda).and(positive("radius", radius))
            }
            Regularizer::L2 { rho } => positive("rho", rho),
            Regularizer::ElasticNet { lambda, rho } => {
                positive("lambda", lambda).and(positive("rho", rho))
            }
        }
    }

    fn supported_with(&self, kind: GeneratorKind) -> bool {
        match kind {
            GeneratorKind::Entropy => matches!(self, Regularizer::IndicatorSimplex),
            GeneratorKind::Euclidean => !matches!(self, Regularizer::IndicatorSimplex),
        }
    }
}

/// `Ψ(x)`; `+∞` exactly when an indicator is violated.
pub fn psi_value(reg: &Regularizer, x: &[f64]) -> f64 {
    let in_ball = |r: f64| math::norm2_sq(x) <= (r * (1.0 + BALL_SLACK)) * (r * (1.0 + BALL_SLACK));
    match *reg {
        Regularizer::Zero => 0.0,
        Regularizer::IndicatorL2Ball { radius } => {
            if in_ball(radius) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Regularizer::IndicatorSimplex => {
            let sum: f64 = x.iter().sum();
            if x.iter().all(|&v| v >= 0.0) && (sum - 1.0).abs() <= SIMPLEX_SLACK {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Regularizer::L1 { lambda } => lambda * math::norm1(x),
        Regularizer::L1PlusL2Ball { lambda, radius } => {
            if in_ball(radius) {
                lambda * math::norm1(x)
            } else {
                f64::INFINITY
            }
        }
        Regularizer::L2 { rho } => 0.5 * rho * math::norm2_sq(x),
        Regularizer::ElasticNet { lambda, rho } => {
            lambda * math::norm1(x) + 0.5 * rho * math::norm2_sq(x)
        }
    }
}

/// Loss, regularizer and geometry; fully defines `φ = f + Ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub loss: LossKind,
    pub reg: Regularizer,
    pub dg: DistanceGenerator,
    pub np: NormPair,
}

impl ProblemSpec {
    /// Checks the geometry/norm pairing and regularizer compatibility.
    pub fn new(loss: LossKind, reg: Regularizer, dg: DistanceGenerator) -> Result<Self> {
        reg.validate()?;
        if dg.dim == 0 {
            return Err(domain("dimension must be positive"));
        }
        if !reg.supported_with(dg.kind) {
            return Err(Error::Config(alloc::format!(
                "regularizer `{}` is not supported with the {:?} generator",
                reg.name(),
                dg.kind
            )));
        }
        Ok(ProblemSpec {
            loss,
            reg,
            dg,
            np: dg.natural_norm(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dg.dim
    }

    /// Default starting point: the origin, or the simplex barycenter.
    pub fn initial_point(&self) -> Vec<f64> {
        match self.dg.kind {
            GeneratorKind::Euclidean => vec![0.0; self.dim()],
            GeneratorKind::Entropy => vec![1.0 / self.dim() as f64; self.dim()],
        }
    }
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn project_ball(z: &mut [f64], radius: f64) {
    let norm = math::sqrt(math::norm2_sq(z));
    if norm > radius {
        let s = radius / norm;
        z.iter_mut().for_each(|v| *v *= s);
    }
}

/// Composite mirror step written into `out`. Inputs are never mutated.
pub fn mirror_step_into(
    dg: &DistanceGenerator,
    reg: &Regularizer,
    x: &[f64],
    g: &[f64],
    gamma: f64,
    out: &mut [f64],
) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(alloc::format!(
            "step size must be positive, got {gamma}"
        )));
    }
    check_dim(dg.dim, x.len())?;
    check_dim(dg.dim, g.len())?;
    check_dim(dg.dim, out.len())?;
    if !reg.supported_with(dg.kind) {
        return Err(Error::Config(alloc::format!(
            "no closed-form step for regularizer `{}` with the {:?} generator",
            reg.name(),
            dg.kind
        )));
    }
    match dg.kind {
        GeneratorKind::Euclidean => {
            for ((o, &xi), &gi) in out.iter_mut().zip(x).zip(g) {
                *o = xi - gamma * gi;
            }
            match *reg {
                Regularizer::Zero => {}
                Regularizer::IndicatorL2Ball { radius } => project_ball(out, radius),
                Regularizer::L1 { lambda } => out
                    .iter_mut()
                    .for_each(|v| *v = soft_threshold(*v, gamma * lambda)),
                Regularizer::L1PlusL2Ball { lambda, radius } => {
                    out.iter_mut()
                        .for_each(|v| *v = soft_threshold(*v, gamma * lambda));
                    project_ball(out, radius);
                }
                Regularizer::L2 { rho } => {
                    let s = 1.0 / (1.0 + gamma * rho);
                    out.iter_mut().for_each(|v| *v *= s);
                }
                Regularizer::ElasticNet { lambda, rho } => {
                    let s = 1.0 / (1.0 + gamma * rho);
                    out.iter_mut()
                        .for_each(|v| *v = soft_threshold(*v, gamma * lambda) * s);
                }
                Regularizer::IndicatorSimplex => unreachable!(),
            }
        }
        GeneratorKind::Entropy => {
            // exponentiated gradient, normalized in log space
            if x.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(domain("entropy step needs a strictly positive point"));
            }
            for ((o, &xi), &gi) in out.iter_mut().zip(x).zip(g) {
                *o = math::ln(xi.max(ENTROPY_FLOOR)) - gamma * gi;
            }
            let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for o in out.iter_mut() {
                *o = math::exp(*o - top);
                sum += *o;
            }
            let mut total = 0.0;
            for o in out.iter_mut() {
                *o = (*o / sum).max(ENTROPY_FLOOR);
                total += *o;
            }
            out.iter_mut().for_each(|v| *v /= total);
        }
    }
    Ok(())
}

pub fn mirror_step(
    dg: &DistanceGenerator,
    reg: &Regularizer,
    x: &[f64],
    g: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    mirror_step_into(dg, reg, x, g, gamma, &mut out)?;
    Ok(out)
}

/// Empirical composite objective: mean loss plus `Ψ(x)`.
pub fn phi_value(problem: &ProblemSpec, dataset: &Dataset, x: &[f64]) -> f64 {
    phi_on(problem, dataset.points(), x)
}

/// Composite objective with the loss averaged over `points`.
pub fn phi_on(problem: &ProblemSpec, points: &[DataPoint], x: &[f64]) -> f64 {
    mean_loss(problem.loss, points, x) + psi_value(&problem.reg, x)
}

/// Running Cesàro average `x_ave(T) = (1/T) Σ_{k=1..T} x(k)`, O(n) per push.
#[derive(Debug, Clone, PartialEq)]
pub struct CesaroAverage {
    sum: Vec<f64>,
    count: u64,
}

impl CesaroAverage {
    pub fn new(dim: usize) -> Self {
        CesaroAverage {
            sum: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        for (s, v) in self.sum.iter_mut().zip(x) {
            *s += v;
        }
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `None` before the first push.
    pub fn mean(&self) -> Option<Vec<f64>> {
        if self.count == 0 {
            return None;
        }
        let inv = self.count as f64;
        Some(self.sum.iter().map(|s| s / inv).collect())
    }
}

pub fn cesaro_average(iterates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = iterates
        .first()
        .ok_or_else(|| domain("need at least one iterate"))?;
    let mut avg = CesaroAverage::new(first.len());
    for x in iterates {
        check_dim(first.len(), x.len())?;
        avg.push(x);
    }
    Ok(avg.mean().unwrap())
}
