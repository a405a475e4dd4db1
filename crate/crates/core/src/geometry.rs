//! Distance generating functions and the Bregman distances they induce.
//!
//! Two generators are built in:
//!
//! * Euclidean, `ω(x) = ½‖x‖₂²`, 1-strongly convex w.r.t. ℓ2 on all of ℝⁿ.
//! * Entropy, `ω(x) = Σ xᵢ log xᵢ + log n`, 1-strongly convex w.r.t. ℓ1 on
//!   the probability simplex. The `+ log n` shift makes `ω ≥ 0` on the
//!   simplex; it cancels in gradients differences and Bregman distances.
//!
//! Both are normalized to modulus 1.

use alloc::vec::Vec;

use crate::error::{check_dim, domain, Result};
use crate::math;

/// Coordinates below this value are raised to it before taking a logarithm.
pub const ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Euclidean,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceGenerator {
    pub kind: GeneratorKind,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimalNorm {
    L2,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DualNorm {
    L2,
    Linf,
}

/// A primal norm together with its exact dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NormPair {
    pub primal: PrimalNorm,
}

impl NormPair {
    pub const L2: NormPair = NormPair {
        primal: PrimalNorm::L2,
    };
    pub const L1: NormPair = NormPair {
        primal: PrimalNorm::L1,
    };

    pub fn dual(&self) -> DualNorm {
        match self.primal {
            PrimalNorm::L2 => DualNorm::L2,
            PrimalNorm::L1 => DualNorm::Linf,
        }
    }

    pub fn primal_norm(&self, v: &[f64]) -> f64 {
        match self.primal {
            PrimalNorm::L2 => math::sqrt(math::norm2_sq(v)),
            PrimalNorm::L1 => math::norm1(v),
        }
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self.dual() {
            DualNorm::L2 => math::sqrt(math::norm2_sq(v)),
            DualNorm::Linf => math::norm_inf(v),
        }
    }

    pub fn dual_norm_sq(&self, v: &[f64]) -> f64 {
        match self.dual() {
            DualNorm::L2 => math::norm2_sq(v),
            DualNorm::Linf => {
                let m = math::norm_inf(v);
                m * m
            }
        }
    }
}

impl DistanceGenerator {
    pub fn euclidean(dim: usize) -> Self {
        DistanceGenerator {
            kind: GeneratorKind::Euclidean,
            dim,
        }
    }

    pub fn entropy(dim: usize) -> Self {
        DistanceGenerator {
            kind: GeneratorKind::Entropy,
            dim,
        }
    }

    /// The norm pair w.r.t. which this generator is 1-strongly convex.
    pub fn natural_norm(&self) -> NormPair {
        match self.kind {
            GeneratorKind::Euclidean => NormPair::L2,
            GeneratorKind::Entropy => NormPair::L1,
        }
    }

    fn check_point(&self, x: &[f64], allow_zero: bool) -> Result<()> {
        check_dim(self.dim, x.len())?;
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(domain(alloc::format!("coordinate {i} is not finite")));
            }
            if self.kind == GeneratorKind::Entropy && (v < 0.0 || (v == 0.0 && !allow_zero)) {
                return Err(domain(alloc::format!(
                    "entropy generator needs positive coordinates, x[{i}] = {v}"
                )));
            }
        }
        Ok(())
    }

    /// `ω(x)`. Exact zeros contribute `0·log 0 = 0` under Entropy.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x, true)?;
        Ok(match self.kind {
            GeneratorKind::Euclidean => 0.5 * math::norm2_sq(x),
            GeneratorKind::Entropy => {
                let s: f64 = x
                    .iter()
                    .map(|&v| if v == 0.0 { 0.0 } else { v * math::ln(v) })
                    .sum();
                s + math::ln(self.dim as f64)
            }
        })
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(x, false)?;
        check_dim(self.dim, out.len())?;
        match self.kind {
            GeneratorKind::Euclidean => out.copy_from_slice(x),
            GeneratorKind::Entropy => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = 1.0 + math::ln(v.max(ENTROPY_FLOOR));
                }
            }
        }
        Ok(())
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; x.len()];
        self.grad_into(x, &mut out)?;
        Ok(out)
    }

    /// `D_ω(x, y) = ω(y) − ω(x) − ⟨∇ω(x), y − x⟩`; the gradient is taken at `x`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x, false)?;
        self.check_point(y, true)?;
        Ok(match self.kind {
            GeneratorKind::Euclidean => {
                0.5 * x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>()
            }
            // Expanded form Σ yᵢ log(yᵢ/xᵢ) − yᵢ + xᵢ avoids the cancellation
            // in ω(y) − ω(x).
            GeneratorKind::Entropy => x
                .iter()
                .zip(y)
                .map(|(&a, &b)| {
                    let t = if b == 0.0 {
                        0.0
                    } else {
                        b * (math::ln(b.max(ENTROPY_FLOOR)) - math::ln(a.max(ENTROPY_FLOOR)))
                    };
                    t - b + a
                })
                .sum::<f64>()
                .max(0.0),
        })
    }
}

pub fn bregman(dg: &DistanceGenerator, x: &[f64], y: &[f64]) -> Result<f64> {
    dg.bregman(x, y)
}

pub fn grad_omega(dg: &DistanceGenerator, x: &[f64]) -> Result<Vec<f64>> {
    dg.grad(x)
}

pub fn dual_norm(np: NormPair, v: &[f64]) -> f64 {
    np.dual_norm(v)
}

/// The constant `c ∈ [1, b]` of the averaged-gradient variance bound.
///
/// `c = 1` when the dual norm is ℓ2, otherwise `2·max_{‖x‖≤1} ω(x)`. The
/// shifted entropy attains its maximum over `{x ≥ 0, ‖x‖₁ ≤ 1}` at a vertex,
/// giving `2 log n`. The result is clamped into `[1, b]`.
pub fn variance_constant_c(dg: &DistanceGenerator, np: NormPair, batch: u64) -> f64 {
    let b = batch.max(1) as f64;
    let raw = match np.dual() {
        DualNorm::L2 => 1.0,
        DualNorm::Linf => match dg.kind {
            GeneratorKind::Entropy => 2.0 * math::ln(dg.dim.max(1) as f64),
            // max ½‖x‖₂² over the ℓ1 unit ball is ½.
            GeneratorKind::Euclidean => 1.0,
        },
    };
    raw.clamp(1.0, b)
}
