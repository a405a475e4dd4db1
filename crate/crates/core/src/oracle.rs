//! Losses, the sampled first-order oracle, and estimation of `L` and `σ`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, domain, Error, Result};
use crate::geometry::{DualNorm, NormPair};
use crate::math;

/// One observation `ξ = (a, b)` with sparse features.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    indices: Vec<u32>,
    values: Vec<f64>,
    pub label: f64,
}

impl DataPoint {
    /// Indices must be strictly increasing and values finite.
    pub fn new(indices: Vec<u32>, values: Vec<f64>, label: f64) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(domain("indices and values differ in length"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("feature indices must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) || !label.is_finite() {
            return Err(domain("non-finite feature value or label"));
        }
        Ok(DataPoint {
            indices,
            values,
            label,
        })
    }

    /// Builds a point from a dense feature vector, dropping exact zeros.
    pub fn from_dense(a: &[f64], label: f64) -> Result<Self> {
        let (indices, values) = a
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        Self::new(indices, values, label)
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v * x[i as usize])
            .sum()
    }

    /// `out += coef · a`
    #[inline]
    pub fn add_scaled_to(&self, coef: f64, out: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] += coef * v;
        }
    }

    pub fn dual_norm_sq(&self, np: NormPair) -> f64 {
        match np.dual() {
            DualNorm::L2 => self.values.iter().map(|v| v * v).sum(),
            DualNorm::Linf => {
                let m = math::norm_inf(&self.values);
                m * m
            }
        }
    }

    fn max_index(&self) -> Option<u32> {
        self.indices.last().copied()
    }
}

/// The empirical distribution the oracle samples from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
    dim: usize,
    /// Source path or generator description.
    pub source: String,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>, dim: usize) -> Result<Self> {
        if let Some(bad) = points
            .iter()
            .filter_map(DataPoint::max_index)
            .find(|&i| i as usize >= dim)
        {
            return Err(domain(alloc::format!(
                "feature index {bad} out of range for dimension {dim}"
            )));
        }
        Ok(Dataset {
            points,
            dim,
            source: String::new(),
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `log(1 + exp(−b⟨a, x⟩))`
    Logistic,
    /// `½(⟨a, x⟩ − b)²`
    Squared,
}

impl LossKind {
    #[inline]
    fn value_at(self, margin: f64, label: f64) -> f64 {
        match self {
            LossKind::Logistic => math::softplus(-label * margin),
            LossKind::Squared => {
                let r = margin - label;
                0.5 * r * r
            }
        }
    }

    /// Scalar `s` such that `∇ₓF(x, ξ) = s · a`.
    #[inline]
    fn grad_coef_at(self, margin: f64, label: f64) -> f64 {
        match self {
            LossKind::Logistic => -label * math::sigmoid_neg(label * margin),
            LossKind::Squared => margin - label,
        }
    }

    /// Maximum curvature of the loss along `a`: `σ'(t) ≤ ¼` for logistic.
    fn curvature(self) -> f64 {
        match self {
            LossKind::Logistic => 0.25,
            LossKind::Squared => 1.0,
        }
    }
}

pub fn loss_value(loss: LossKind, x: &[f64], point: &DataPoint) -> f64 {
    loss.value_at(point.dot(x), point.label)
}

pub fn loss_grad_coef(loss: LossKind, x: &[f64], point: &DataPoint) -> f64 {
    loss.grad_coef_at(point.dot(x), point.label)
}

/// Dense per-sample gradient `∇ₓF(x, ξ)`.
pub fn loss_grad(loss: LossKind, x: &[f64], point: &DataPoint) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    point.add_scaled_to(loss_grad_coef(loss, x, point), &mut g);
    g
}

/// Mean loss over `points`.
pub fn mean_loss(loss: LossKind, points: &[DataPoint], x: &[f64]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().map(|p| loss_value(loss, x, p)).sum::<f64>() / points.len() as f64
}

/// `∇f(x)` for the empirical mean objective.
pub fn full_gradient_into(loss: LossKind, dataset: &Dataset, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for p in dataset.points() {
        p.add_scaled_to(loss_grad_coef(loss, x, p), out);
    }
    let inv = 1.0 / dataset.len().max(1) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
}

pub fn full_gradient(loss: LossKind, dataset: &Dataset, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    full_gradient_into(loss, dataset, x, &mut g);
    g
}

/// How the oracle picks sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// i.i.d. uniform draws with replacement from the empirical distribution.
    #[default]
    Iid,
    /// Walk the dataset in order, wrapping around. Deterministic test mode.
    Sequential,
}

/// Stream-split generator: each `(seed, stream)` pair is an independent sequence.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stochastic first-order oracle over an immutable dataset.
///
/// Each instance owns a private random stream derived from `(seed, stream)`,
/// so workers holding distinct streams can query concurrently.
#[derive(Debug, Clone)]
pub struct StochasticOracle<'a> {
    dataset: &'a Dataset,
    loss: LossKind,
    rng: ChaCha8Rng,
    sampling: Sampling,
    cursor: usize,
}

impl<'a> StochasticOracle<'a> {
    pub fn new(dataset: &'a Dataset, loss: LossKind, seed: u64) -> Self {
        Self::with_stream(dataset, loss, seed, 0)
    }

    pub fn with_stream(dataset: &'a Dataset, loss: LossKind, seed: u64, stream: u64) -> Self {
        StochasticOracle {
            dataset,
            loss,
            rng: stream_rng(seed, stream),
            sampling: Sampling::Iid,
            cursor: 0,
        }
    }

    pub fn sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// Draws one sample index.
    pub fn draw(&mut self) -> usize {
        match self.sampling {
            Sampling::Iid => self.rng.random_range(0..self.dataset.len()),
            Sampling::Sequential => {
                let i = self.cursor;
                self.cursor = (self.cursor + 1) % self.dataset.len();
                i
            }
        }
    }

    /// Mean of `b` per-sample gradients at `x`, written into `out`.
    pub fn batch_gradient_into(&mut self, x: &[f64], b: usize, out: &mut [f64]) -> Result<()> {
        if b == 0 {
            return Err(domain("batch size must be at least 1"));
        }
        if self.dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(self.dataset.dim(), x.len())?;
        check_dim(x.len(), out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..b {
            let p = &self.dataset.points()[self.draw()];
            p.add_scaled_to(loss_grad_coef(self.loss, x, p), out);
        }
        let inv = 1.0 / b as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        Ok(())
    }

    pub fn batch_gradient(&mut self, x: &[f64], b: usize) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        self.batch_gradient_into(x, b, &mut g)?;
        Ok(g)
    }
}

pub fn batch_gradient(oracle: &mut StochasticOracle<'_>, x: &[f64], b: usize) -> Result<Vec<f64>> {
    oracle.batch_gradient(x, b)
}

/// Per-sample gradient Lipschitz constant `L = curvature · max ‖a‖*²`.
pub fn lipschitz_bound(loss: LossKind, dataset: &Dataset, np: NormPair) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let max_sq = dataset
        .points()
        .iter()
        .map(|p| p.dual_norm_sq(np))
        .fold(0.0, f64::max);
    Ok(loss.curvature() * max_sq)
}

/// `σ̂ = sqrt(max over probes of mean ‖∇ₓF(x, ξ) − ∇f(x)‖*²)`, sampling
/// `samples_per_point` draws per probe from the oracle's stream.
pub fn estimate_sigma(
    oracle: &mut StochasticOracle<'_>,
    probes: &[Vec<f64>],
    samples_per_point: usize,
    np: NormPair,
) -> Result<f64> {
    if probes.is_empty() {
        return Err(domain("at least one probe point is required"));
    }
    if samples_per_point == 0 {
        return Err(domain("samples_per_point must be positive"));
    }
    let dataset = oracle.dataset;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.dim();
    let mut mean_grad = vec![0.0; n];
    let mut dev = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for x in probes {
        check_dim(n, x.len())?;
        full_gradient_into(oracle.loss, dataset, x, &mut mean_grad);
        let mut acc = 0.0;
        for _ in 0..samples_per_point {
            let p = &dataset.points()[oracle.draw()];
            dev.copy_from_slice(&mean_grad);
            dev.iter_mut().for_each(|v| *v = -*v);
            p.add_scaled_to(loss_grad_coef(oracle.loss, x, p), &mut dev);
            acc += np.dual_norm_sq(&dev);
        }
        worst = worst.max(acc / samples_per_point as f64);
    }
    Ok(math::sqrt(worst))
}
