//! Independent numeric minimizer of the composite step objective
//! `⟨g, z⟩ + Ψ(z) + (1/γ) D_ω(x, z)`.
//!
//! Nothing here uses the closed forms of the library. Separable problems are
//! solved coordinate-wise by bisection on the one-sided derivatives;
//! ball and simplex constraints are handled through an outer bisection on
//! the Lagrange multiplier.

use asyncmb_core::{DistanceGenerator, GeneratorKind, Regularizer};

const ITERS: usize = 200;

/// Minimizes `g z + λ|z| + (1/2γ)(z − x)² + (ρ/2) z²` over ℝ by bisection on
/// the right derivative: the minimizer is the smallest `z` where it is ≥ 0.
fn scalar_min(x: f64, g: f64, gamma: f64, lambda: f64, rho: f64) -> f64 {
    let right = |z: f64| g + (z - x) / gamma + rho * z + if z >= 0.0 { lambda } else { -lambda };
    let mut span = 1.0 + x.abs() + gamma * (g.abs() + lambda);
    while right(-span) >= 0.0 {
        span *= 2.0;
    }
    while right(span) < 0.0 {
        span *= 2.0;
    }
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..ITERS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if right(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn separable(x: &[f64], g: &[f64], gamma: f64, lambda: f64, rho: f64) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| scalar_min(xi, gi, gamma, lambda, rho))
        .collect()
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Ball constraint `‖z‖ ≤ r` via the multiplier `ν` of `(ν/2)(‖z‖² − r²)`.
fn with_ball(x: &[f64], g: &[f64], gamma: f64, lambda: f64, radius: f64) -> Vec<f64> {
    let z0 = separable(x, g, gamma, lambda, 0.0);
    if norm(&z0) <= radius {
        return z0;
    }
    let mut hi = 1.0;
    while norm(&separable(x, g, gamma, lambda, hi)) > radius {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..ITERS {
        let mid = 0.5 * (lo + hi);
        if norm(&separable(x, g, gamma, lambda, mid)) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    separable(x, g, gamma, lambda, hi)
}

/// Simplex with the entropy generator: for a multiplier `ν`, each coordinate
/// solves `gᵢ + (1/γ) ln(zᵢ/xᵢ) + ν = 0` (bisection in `ln zᵢ`); `ν` is then
/// bisected until `Σ zᵢ = 1`.
fn entropy_simplex(x: &[f64], g: &[f64], gamma: f64) -> Vec<f64> {
    let coord = |xi: f64, gi: f64, nu: f64| {
        let (mut lo, mut hi) = (-745.0f64, 710.0f64);
        for _ in 0..ITERS {
            let mid = 0.5 * (lo + hi);
            if gi + (mid - xi.ln()) / gamma + nu >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    };
    let total = |nu: f64| x.iter().zip(g).map(|(&a, &b)| coord(a, b, nu)).sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while total(lo) < 1.0 {
        lo *= 2.0;
    }
    while total(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..ITERS {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    x.iter().zip(g).map(|(&a, &b)| coord(a, b, nu)).collect()
}

pub fn brute_force_step(
    dg: &DistanceGenerator,
    reg: &Regularizer,
    x: &[f64],
    g: &[f64],
    gamma: f64,
) -> Vec<f64> {
    match (dg.kind, *reg) {
        (GeneratorKind::Euclidean, Regularizer::Zero) => separable(x, g, gamma, 0.0, 0.0),
        (GeneratorKind::Euclidean, Regularizer::L1 { lambda }) => {
            separable(x, g, gamma, lambda, 0.0)
        }
        (GeneratorKind::Euclidean, Regularizer::L2 { rho }) => separable(x, g, gamma, 0.0, rho),
        (GeneratorKind::Euclidean, Regularizer::ElasticNet { lambda, rho }) => {
            separable(x, g, gamma, lambda, rho)
        }
        (GeneratorKind::Euclidean, Regularizer::IndicatorL2Ball { radius }) => {
            with_ball(x, g, gamma, 0.0, radius)
        }
        (GeneratorKind::Euclidean, Regularizer::L1PlusL2Ball { lambda, radius }) => {
            with_ball(x, g, gamma, lambda, radius)
        }
        (GeneratorKind::Entropy, Regularizer::IndicatorSimplex) => entropy_simplex(x, g, gamma),
        (kind, reg) => panic!("no oracle for {kind:?} + {reg:?}"),
    }
}

/// Every supported (generator, regularizer) pair with representative parameters.
pub fn supported_pairs(
    dim: usize,
    lambda: f64,
    rho: f64,
    radius: f64,
) -> Vec<(DistanceGenerator, Regularizer)> {
    let e = DistanceGenerator::euclidean(dim);
    vec![
        (e, Regularizer::Zero),
        (e, Regularizer::IndicatorL2Ball { radius }),
        (e, Regularizer::L1 { lambda }),
        (e, Regularizer::L1PlusL2Ball { lambda, radius }),
        (e, Regularizer::L2 { rho }),
        (e, Regularizer::ElasticNet { lambda, rho }),
        (
            DistanceGenerator::entropy(dim),
            Regularizer::IndicatorSimplex,
        ),
    ]
}
