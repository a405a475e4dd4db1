//! Synthetic problems with certified optimizers, and the deterministic
//! full-batch solver that certifies them.

use asyncmb_core::oracle::full_gradient_into;
use asyncmb_core::{
    mirror_step_into, phi_value, DataPoint, Dataset, DistanceGenerator, GeneratorKind, LossKind,
    ProblemSpec, Regularizer,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AppError, Result};

/// Residual every synthetic optimizer is certified to.
pub const CERTIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub dataset: Dataset,
    pub x_star: Vec<f64>,
    pub phi_star: f64,
    pub problem: ProblemSpec,
    /// First-order optimality residual of `x_star`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    /// `L‖x − prox(x − ∇f(x)/L)‖₂` at the final step constant `L`.
    pub residual: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of `AᵀA/m` by power iteration (a lower estimate).
fn gram_spectral_norm(dataset: &Dataset) -> f64 {
    let n = dataset.dim();
    let m = dataset.len() as f64;
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut w = vec![0.0; n];
        for p in dataset.points() {
            p.add_scaled_to(p.dot(&v) / m, &mut w);
        }
        let nrm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        let prev = lambda;
        lambda = nrm;
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / nrm);
        if (lambda - prev).abs() <= 1e-10 * lambda {
            break;
        }
    }
    lambda
}

fn loss_mean(problem: &ProblemSpec, dataset: &Dataset, x: &[f64]) -> f64 {
    asyncmb_core::oracle::mean_loss(problem.loss, dataset.points(), x)
}

/// Accelerated proximal gradient with backtracking and adaptive restart on
/// the full empirical objective. Euclidean geometry only.
pub fn reference_solve(
    problem: &ProblemSpec,
    dataset: &Dataset,
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<ReferenceSolution> {
    if problem.dg.kind != GeneratorKind::Euclidean {
        return Err(AppError::config(
            "geometry.generator",
            "the reference solver needs the euclidean generator",
        ));
    }
    let n = problem.dim();
    let dg = DistanceGenerator::euclidean(n);
    let curvature = if problem.loss == LossKind::Logistic {
        0.25
    } else {
        1.0
    };
    let mut lip = (curvature * gram_spectral_norm(dataset)).max(1e-12);

    let mut x = x0
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| problem.initial_point());
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut g = vec![0.0; n];
    let mut z = vec![0.0; n];
    let residual_at = |x: &[f64], lip: f64, g: &mut Vec<f64>, z: &mut Vec<f64>| -> Result<f64> {
        full_gradient_into(problem.loss, dataset, x, g);
        mirror_step_into(&dg, &problem.reg, x, g, 1.0 / lip, z)?;
        Ok(lip
            * x.iter()
                .zip(z.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt())
    };

    for it in 0..max_iter {
        if it % 10 == 0 {
            let r = residual_at(&x, lip, &mut g, &mut z)?;
            if r < tol {
                return Ok(ReferenceSolution {
                    x,
                    residual: r,
                    iterations: it,
                });
            }
        }
        full_gradient_into(problem.loss, dataset, &y, &mut g);
        let fy = loss_mean(problem, dataset, &y);
        loop {
            mirror_step_into(&dg, &problem.reg, &y, &g, 1.0 / lip, &mut z)?;
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lin: f64 = diff.iter().zip(&g).map(|(d, gi)| d * gi).sum();
            let quad: f64 = diff.iter().map(|d| d * d).sum();
            let fz = loss_mean(problem, dataset, &z);
            if fz <= fy + lin + 0.5 * lip * quad + 1e-14 * fy.abs().max(1.0) {
                break;
            }
            lip *= 2.0;
        }
        // gradient-based adaptive restart: drop momentum when it points uphill
        let uphill: f64 = (0..n).map(|i| (y[i] - z[i]) * (z[i] - x[i])).sum();
        if uphill > 0.0 {
            t = 1.0;
            y.copy_from_slice(&z);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..n {
                y[i] = z[i] + beta * (z[i] - x[i]);
            }
            t = t_next;
        }
        x.copy_from_slice(&z);
    }
    let r = residual_at(&x, lip, &mut g, &mut z)?;
    Ok(ReferenceSolution {
        x,
        residual: r,
        iterations: max_iter,
    })
}

/// Builds a [`SyntheticProblem`] after checking `residual < CERTIFY_TOL`.
pub fn certify(
    problem: ProblemSpec,
    dataset: Dataset,
    x_star: Vec<f64>,
    residual: f64,
) -> Result<SyntheticProblem> {
    if !(residual < CERTIFY_TOL) {
        return Err(AppError::Runtime(format!(
            "optimizer certification failed: residual {residual:e} ≥ {CERTIFY_TOL:e}"
        )));
    }
    let phi_star = phi_value(&problem, &dataset, &x_star);
    Ok(SyntheticProblem {
        dataset,
        x_star,
        phi_star,
        problem,
        residual,
    })
}

/// Certified optimum of an arbitrary Euclidean problem on `dataset`.
pub fn solve_certified(problem: ProblemSpec, dataset: Dataset) -> Result<SyntheticProblem> {
    let sol = reference_solve(&problem, &dataset, None, 0.1 * CERTIFY_TOL, 200_000)?;
    certify(problem, dataset, sol.x, sol.residual)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `m × n` design with i.i.d. `N(0, 1)` entries, so `AᵀA/m ≈ I`.
fn gaussian_design(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..n).map(|_| normal(rng)).collect())
        .collect()
}

fn dataset_from_rows(rows: &[Vec<f64>], labels: &[f64], source: String) -> Result<Dataset> {
    let n = rows.first().map_or(0, Vec::len);
    let points = rows
        .iter()
        .zip(labels)
        .map(|(a, &y)| DataPoint::from_dense(a, y))
        .collect::<asyncmb_core::Result<Vec<_>>>()?;
    Ok(Dataset::new(points, n)?.with_source(source))
}

/// Lasso `½(a·x − y)² + λ‖x‖₁` on an existing dataset.
pub fn lasso_from_dataset(dataset: Dataset, lambda: f64) -> Result<SyntheticProblem> {
    let problem = ProblemSpec::new(
        LossKind::Squared,
        Regularizer::L1 { lambda },
        DistanceGenerator::euclidean(dataset.dim()),
    )?;
    solve_certified(problem, dataset)
}

/// Gaussian design, an `s`-sparse planted signal
/// with entries `±U(0.5, 1.5)` and labels `a·x + σ_n·N(0, 1)`.
pub fn gen_lasso(
    n: usize,
    m: usize,
    sparsity: usize,
    noise: f64,
    lambda: f64,
    seed: u64,
) -> Result<SyntheticProblem> {
    if n == 0 || sparsity == 0 || sparsity > n {
        return Err(AppError::config("data.sparsity", "need 0 < s ≤ n"));
    }
    if m < n {
        return Err(AppError::config("data.m", "need m ≥ n"));
    }
    if !(noise >= 0.0) || !(lambda >= 0.0) {
        return Err(AppError::config(
            "data.noise",
            "noise and lambda must be non-negative",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planted = vec![0.0; n];
    for i in sample(&mut rng, n, sparsity) {
        let mag: f64 = rng.random_range(0.5..1.5);
        planted[i] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    let rows = gaussian_design(&mut rng, n, m);
    let labels: Vec<f64> = rows
        .iter()
        .map(|a| a.iter().zip(&planted).map(|(u, v)| u * v).sum::<f64>() + noise * normal(&mut rng))
        .collect();
    let ds = dataset_from_rows(
        &rows,
        &labels,
        format!("lasso(n={n},m={m},s={sparsity},noise={noise},seed={seed})"),
    )?;
    lasso_from_dataset(ds, lambda)
}

/// Squared loss with `(ρ/2)‖x‖²`, solved through the normal equations.
pub fn strongly_convex_from_dataset(dataset: Dataset, rho: f64) -> Result<SyntheticProblem> {
    let n = dataset.dim();
    let problem = ProblemSpec::new(
        LossKind::Squared,
        Regularizer::L2 { rho },
        DistanceGenerator::euclidean(n),
    )?;
    let m = dataset.len() as f64;
    let mut h = DMatrix::<f64>::identity(n, n) * rho;
    let mut rhs = DVector::<f64>::zeros(n);
    for p in dataset.points() {
        let a = p.indices().iter().zip(p.values());
        for (&i, &vi) in a.clone() {
            rhs[i as usize] += vi * p.label / m;
            for (&j, &vj) in a.clone() {
                h[(i as usize, j as usize)] += vi * vj / m;
            }
        }
    }
    let x = h
        .cholesky()
        .ok_or_else(|| AppError::Runtime("normal equations are not positive definite".into()))?
        .solve(&rhs);
    let x_star: Vec<f64> = x.iter().copied().collect();
    let mut g = vec![0.0; n];
    full_gradient_into(LossKind::Squared, &dataset, &x_star, &mut g);
    let residual = g
        .iter()
        .zip(&x_star)
        .map(|(gi, xi)| (gi + rho * xi).powi(2))
        .sum::<f64>()
        .sqrt();
    certify(problem, dataset, x_star, residual)
}

/// Gaussian design, labels from a dense planted model plus `N(0, 0.25)` noise.
pub fn gen_strongly_convex(n: usize, m: usize, rho: f64, seed: u64) -> Result<SyntheticProblem> {
    if n == 0 || m == 0 {
        return Err(AppError::config("data.n", "need n ≥ 1 and m ≥ 1"));
    }
    if !(rho > 0.0) {
        return Err(AppError::config("composite.rho", "rho must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let rows = gaussian_design(&mut rng, n, m);
    let labels: Vec<f64> = rows
        .iter()
        .map(|a| a.iter().zip(&planted).map(|(u, v)| u * v).sum::<f64>() + 0.5 * normal(&mut rng))
        .collect();
    let ds = dataset_from_rows(
        &rows,
        &labels,
        format!("strongly_convex(n={n},m={m},seed={seed})"),
    )?;
    strongly_convex_from_dataset(ds, rho)
}

/// Sparse logistic data: each feature is present with probability
/// `density`, values `N(0, 1/(density·n))`, labels `±1` drawn from the
/// logistic model of a planted `N(0, 1)` vector.
pub fn gen_logistic_dataset(n: usize, m: usize, density: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || m == 0 {
        return Err(AppError::config("data.n", "need n ≥ 1 and m ≥ 1"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(AppError::config(
            "data.density",
            "density must be in (0, 1]",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let scale = 1.0 / (density * n as f64).sqrt();
    let mut points = Vec::with_capacity(m);
    for _ in 0..m {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for i in 0..n {
            if density >= 1.0 || rng.random_bool(density) {
                idx.push(i as u32);
                val.push(scale * normal(&mut rng));
            }
        }
        let margin: f64 = idx
            .iter()
            .zip(&val)
            .map(|(&i, v)| planted[i as usize] * v)
            .sum();
        let p_pos = 1.0 / (1.0 + (-margin).exp());
        let label = if rng.random_bool(p_pos) { 1.0 } else { -1.0 };
        points.push(DataPoint::new(idx, val, label)?);
    }
    Ok(Dataset::new(points, n)?.with_source(format!(
        "logistic(n={n},m={m},density={density},seed={seed})"
    )))
}

/// Logistic problem with a certified reference optimum for `reg`.
pub fn gen_logistic(
    n: usize,
    m: usize,
    density: f64,
    reg: Regularizer,
    seed: u64,
) -> Result<SyntheticProblem> {
    let ds = gen_logistic_dataset(n, m, density, seed)?;
    let problem = ProblemSpec::new(LossKind::Logistic, reg, DistanceGenerator::euclidean(n))?;
    solve_certified(problem, ds)
}
